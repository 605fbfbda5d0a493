#include "bier/model_io.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "bier/errors.hpp"

namespace bier {

namespace {
constexpr std::string_view kModelMagic = "BIERMDL1";
constexpr std::uint32_t kMaxDim = 1u << 24;
}  // namespace

void write_model(std::ostream& os, const EnsembleModel& model) {
  model.validate();
  detail::ByteWriter w(os);
  w.raw(kModelMagic);
  w.u32(static_cast<std::uint32_t>(model.W.rows()));
  w.u32(static_cast<std::uint32_t>(model.W.cols()));
  w.u32(static_cast<std::uint32_t>(model.learners()));
  for (std::size_t s : model.partition.sizes()) w.u32(static_cast<std::uint32_t>(s));
  for (double v : model.W.span()) w.f64(v);
  w.u8(model.backbone ? 1 : 0);
  if (model.backbone) {
    w.u32(static_cast<std::uint32_t>(model.backbone->input_dim()));
    for (double v : model.backbone->weights.span()) w.f64(v);
    for (double v : model.backbone->bias) w.f64(v);
  }
  if (!w.ok()) throw IoError("write_model: stream write failed");
}

EnsembleModel read_model(std::istream& is) {
  detail::ByteReader r(is, "model");
  if (r.raw(kModelMagic.size(), "magic") != kModelMagic) r.fail("bad magic (expected BIERMDL1)");
  const std::uint32_t h = r.u32("h");
  const std::uint32_t d = r.u32("d");
  const std::uint32_t M = r.u32("M");
  if (h == 0 || h > kMaxDim || d == 0 || d > kMaxDim || M == 0 || M > d) r.fail("implausible header");
  std::vector<std::size_t> sizes(M);
  std::uint64_t total = 0;
  for (auto& s : sizes) {
    s = r.u32("group size");
    if (s == 0) r.fail("zero group size");
    total += s;
  }
  if (total != d) r.fail("group sizes do not sum to d");
  EnsembleModel model;
  model.partition = GroupPartition(std::move(sizes));
  model.schedule = make_schedule(M);
  model.W = Matrix(h, d);
  for (double& v : model.W.span()) v = r.f64("W");
  const std::uint8_t flag = r.u8("backbone flag");
  if (flag > 1) r.fail("bad backbone flag");
  if (flag == 1) {
    const std::uint32_t in = r.u32("backbone input dim");
    if (in == 0 || in > kMaxDim) r.fail("implausible backbone input dim");
    Backbone bb{Matrix(h, in), Vector(h)};
    for (double& v : bb.weights.span()) v = r.f64("backbone weights");
    for (double& v : bb.bias) v = r.f64("backbone bias");
    model.backbone = std::move(bb);
  }
  return model;
}

void save_model(const std::filesystem::path& path, const EnsembleModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_model(os, model);
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("file not found: '" + path.string() + "'");
  return read_model(is);
}

}  // namespace bier
