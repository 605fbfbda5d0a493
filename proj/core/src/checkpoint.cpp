#include "bier/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "bier/errors.hpp"
#include "bier/model_io.hpp"

namespace bier {

namespace {
constexpr std::string_view kTrainMagic = "BIERTRN1";
}

void write_bank(std::ostream& os, const RegressorBank& bank) {
  detail::ByteWriter w(os);
  w.u32(static_cast<std::uint32_t>(bank.size()));
  for (std::size_t r = 0; r < bank.size(); ++r) {
    const Regressor& g = bank.regressors[r];
    w.u32(static_cast<std::uint32_t>(bank.pairs[r].first));
    w.u32(static_cast<std::uint32_t>(bank.pairs[r].second));
    w.u32(static_cast<std::uint32_t>(g.source_dim()));
    w.u32(static_cast<std::uint32_t>(g.target_dim()));
    w.u32(static_cast<std::uint32_t>(g.hidden()));
    for (double v : g.W1.span()) w.f64(v);
    for (double v : g.b1) w.f64(v);
    for (double v : g.W2.span()) w.f64(v);
    for (double v : g.b2) w.f64(v);
  }
}

RegressorBank read_bank(std::istream& is) {
  detail::ByteReader r(is, "regressor bank");
  const std::uint32_t n = r.u32("regressor count");
  if (n > (1u << 16)) r.fail("implausible regressor count");
  RegressorBank bank;
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t i = r.u32("pair i");
    const std::uint32_t j = r.u32("pair j");
    const std::uint32_t src = r.u32("source dim");
    const std::uint32_t tgt = r.u32("target dim");
    const std::uint32_t hidden = r.u32("hidden dim");
    if (src == 0 || tgt == 0 || hidden == 0 || src > (1u << 20) || tgt > (1u << 20) || hidden > (1u << 20)) {
      r.fail("implausible regressor shape");
    }
    Regressor g{Matrix(hidden, src), Vector(hidden), Matrix(tgt, hidden), Vector(tgt)};
    for (double& v : g.W1.span()) v = r.f64("W1");
    for (double& v : g.b1) v = r.f64("b1");
    for (double& v : g.W2.span()) v = r.f64("W2");
    for (double& v : g.b2) v = r.f64("b2");
    bank.pairs.emplace_back(i, j);
    bank.regressors.push_back(std::move(g));
  }
  return bank;
}

void write_checkpoint(std::ostream& os, const TrainState& state) {
  write_model(os, state.model);
  detail::ByteWriter w(os);
  w.raw(kTrainMagic);
  w.u64(state.iteration);
  w.u8(state.bank ? 1 : 0);
  if (state.bank) write_bank(os, *state.bank);
  state.optimizer.write(os);
  w.str(state.rng.state());
  if (!w.ok()) throw IoError("write_checkpoint: stream write failed");
}

TrainState read_checkpoint(std::istream& is) {
  TrainState state;
  state.model = read_model(is);
  detail::ByteReader r(is, "checkpoint training state");
  if (r.at_eof()) r.fail("no training state (model-only file)");
  if (r.raw(kTrainMagic.size(), "magic") != kTrainMagic) r.fail("bad magic (expected BIERTRN1)");
  state.iteration = r.u64("iteration");
  const std::uint8_t has_bank = r.u8("bank flag");
  if (has_bank > 1) r.fail("bad bank flag");
  if (has_bank == 1) {
    state.bank = read_bank(is);
    validate_bank(*state.bank, state.model.partition);
  }
  state.optimizer = Optimizer::read(is);
  detail::ByteReader tail(is, "checkpoint rng state");
  state.rng.restore(tail.str("rng state"));
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, state);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("file not found: '" + path.string() + "'");
  return read_checkpoint(is);
}

}  // namespace bier
