#include "bier/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "binary_io.hpp"
#include "bier/errors.hpp"
#include "bier/rng.hpp"

namespace bier {

namespace {
constexpr std::string_view kFeatureMagic = "BIERFT01";
}

std::vector<Vector> FeatureSet::samples() const {
  std::vector<Vector> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(sample(i));
  return out;
}

std::vector<Vector> FeatureSet::samples(std::span<const std::size_t> indices) const {
  std::vector<Vector> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(sample(i));
  return out;
}

void FeatureSet::validate() const {
  if (features.rows() != labels.size()) throw InvalidArgument("feature set: label count != row count");
  for (std::uint32_t l : labels) {
    if (l >= n_classes) throw InvalidArgument("feature set: label out of range");
  }
  if (!all_finite(features.span())) throw InvalidArgument("feature set: non-finite feature value");
}

void write_features(std::ostream& os, const FeatureSet& set) {
  set.validate();
  detail::ByteWriter w(os);
  w.raw(kFeatureMagic);
  w.u64(set.size());
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.u32(set.n_classes);
  for (std::uint32_t l : set.labels) w.u32(l);
  for (double v : set.features.span()) w.f32(static_cast<float>(v));
  if (!w.ok()) throw IoError("write_features: stream write failed");
}

FeatureSet read_features(std::istream& is) {
  detail::ByteReader r(is, "feature file");
  if (r.at_eof()) r.fail("missing magic");
  if (r.raw(kFeatureMagic.size(), "magic") != kFeatureMagic) r.fail("bad magic (expected BIERFT01)");
  const std::uint64_t n = r.u64("sample count");
  const std::uint32_t h = r.u32("feature dim");
  const std::uint32_t classes = r.u32("class count");
  if (n > (1ull << 32) || (n > 0 && h == 0) || (n > 0 && n * h > (1ull << 34))) r.fail("implausible header");
  FeatureSet set;
  set.n_classes = classes;
  set.labels.resize(n);
  for (auto& l : set.labels) {
    const std::uint64_t at = r.offset();
    l = r.u32("label");
    if (l >= classes) {
      throw FormatError("feature file: label " + std::to_string(l) + " >= class count " +
                            std::to_string(classes) + " at byte offset " + std::to_string(at),
                        at);
    }
  }
  set.features = Matrix(n, h);
  for (double& v : set.features.span()) {
    const std::uint64_t at = r.offset();
    const float f = r.f32("features");
    if (!std::isfinite(f)) {
      throw FormatError("feature file: non-finite value at byte offset " + std::to_string(at), at);
    }
    v = f;
  }
  return set;
}

void save_features(const std::filesystem::path& path, const FeatureSet& set) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_features(os, set);
}

FeatureSet load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("file not found: '" + path.string() + "'");
  return read_features(is);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void csv_fail(std::size_t line, const std::string& msg) {
  throw FormatError("csv line " + std::to_string(line) + ": " + msg, line);
}

}  // namespace

FeatureSet read_csv(std::istream& is) {
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::uint32_t> labels;
  std::vector<double> values;
  std::size_t h = 0;
  bool have_h = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      fields.push_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) csv_fail(lineno, "expected a label and at least one value");
    const std::size_t row_h = fields.size() - 1;
    if (!have_h) {
      h = row_h;
      have_h = true;
    } else if (row_h != h) {
      csv_fail(lineno, "ragged row: " + std::to_string(row_h) + " values, expected " + std::to_string(h));
    }
    if (fields[0].empty()) csv_fail(lineno, "empty label");
    const auto [it, inserted] =
        ids.try_emplace(std::string(fields[0]), static_cast<std::uint32_t>(ids.size()));
    labels.push_back(it->second);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const std::string_view f = fields[k];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        csv_fail(lineno, "field " + std::to_string(k + 1) + " is not a finite number: '" + std::string(f) + "'");
      }
      values.push_back(v);
    }
  }
  FeatureSet set;
  set.n_classes = static_cast<std::uint32_t>(ids.size());
  set.features = Matrix(labels.size(), h, std::move(values));
  set.labels = std::move(labels);
  return set;
}

FeatureSet load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("file not found: '" + path.string() + "'");
  return read_csv(is);
}

void write_csv(std::ostream& os, const FeatureSet& set) {
  char buf[64];
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << set.labels[i];
    for (double v : set.features.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      os << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    os << '\n';
  }
}

void SynthSpec::validate() const {
  if (classes < 2) throw InvalidArgument("synth: classes must be >= 2");
  if (per_class < 2) throw InvalidArgument("synth: per_class must be >= 2");
  if (feature_dim < 1) throw InvalidArgument("synth: feature_dim must be >= 1");
  if (!(cluster_spread >= 0.0) || !(noise >= 0.0)) throw InvalidArgument("synth: spread and noise must be >= 0");
}

FeatureSet synth_gaussian(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t h = spec.feature_dim;
  Matrix centers(spec.classes, h);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    auto row = centers.row(c);
    double n2 = 0.0;
    do {
      for (double& v : row) v = rng.normal();
      n2 = squared_norm(row);
    } while (n2 == 0.0);
    const double scale = spec.cluster_spread / std::sqrt(n2);
    for (double& v : row) v *= scale;
  }
  FeatureSet set;
  set.n_classes = spec.classes;
  const std::size_t n = static_cast<std::size_t>(spec.classes) * spec.per_class;
  set.features = Matrix(n, h);
  set.labels.resize(n);
  std::size_t i = 0;
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    for (std::uint32_t k = 0; k < spec.per_class; ++k, ++i) {
      set.labels[i] = c;
      auto row = set.features.row(i);
      for (std::size_t j = 0; j < h; ++j) row[j] = centers(c, j) + spec.noise * rng.normal();
    }
  }
  return set;
}

namespace {

FeatureSet subset(const FeatureSet& set, const std::vector<std::size_t>& rows, bool remap) {
  FeatureSet out;
  out.features = Matrix(rows.size(), set.dim());
  out.labels.resize(rows.size());
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(set.features.row(rows[r]).begin(), set.dim(), out.features.row(r).begin());
    const std::uint32_t l = set.labels[rows[r]];
    if (remap) {
      out.labels[r] = ids.try_emplace(l, static_cast<std::uint32_t>(ids.size())).first->second;
    } else {
      out.labels[r] = l;
    }
  }
  out.n_classes = remap ? static_cast<std::uint32_t>(ids.size()) : set.n_classes;
  return out;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

Split split(const FeatureSet& set, const SplitOptions& options) {
  set.validate();
  if (!(options.train_fraction > 0.0 && options.train_fraction <= 1.0)) {
    throw InvalidArgument("split: train_fraction must be in (0, 1]");
  }
  Rng rng(options.seed);
  std::vector<std::vector<std::size_t>> by_class(set.n_classes);
  for (std::size_t i = 0; i < set.size(); ++i) by_class[set.labels[i]].push_back(i);
  std::vector<std::uint32_t> present;
  for (std::uint32_t c = 0; c < set.n_classes; ++c) {
    if (!by_class[c].empty()) present.push_back(c);
  }

  std::vector<std::size_t> train_rows, test_rows;
  if (options.mode == SplitMode::disjoint_classes) {
    if (present.size() < 2) throw InvalidArgument("split: disjoint-class mode needs at least 2 classes");
    const auto n_train = static_cast<std::size_t>(
        std::llround(options.train_fraction * static_cast<double>(present.size())));
    if (n_train == 0 || n_train >= present.size()) {
      throw InvalidArgument("split: fraction leaves one side without classes");
    }
    if (options.shuffle_classes) shuffle(present, rng);
    std::vector<bool> is_train(set.n_classes, false);
    for (std::size_t k = 0; k < n_train; ++k) is_train[present[k]] = true;
    for (std::size_t i = 0; i < set.size(); ++i) (is_train[set.labels[i]] ? train_rows : test_rows).push_back(i);
    return {subset(set, train_rows, true), subset(set, test_rows, true)};
  }

  for (std::uint32_t c : present) {
    auto rows = by_class[c];
    shuffle(rows, rng);
    const auto n_train = static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < rows.size(); ++k) (k < n_train ? train_rows : test_rows).push_back(rows[k]);
  }
  if (train_rows.empty()) throw InvalidArgument("split: empty training set");
  if (test_rows.empty()) throw InvalidArgument("split: empty test set");
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {subset(set, train_rows, false), subset(set, test_rows, false)};
}

}  // namespace bier
