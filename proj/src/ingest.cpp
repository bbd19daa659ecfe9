#include "latentbench/ingest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "latentbench/error.hpp"
#include "latentbench/results.hpp"

namespace latentbench {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint32_t read_be32(std::string_view bytes, std::size_t offset) {
  if (offset + 4 > bytes.size())
    throw ParseError("idx: truncated header at byte offset " + std::to_string(offset), offset);
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void put_be32(std::string& out, std::uint32_t v) {
  out += static_cast<char>((v >> 24) & 0xff);
  out += static_cast<char>((v >> 16) & 0xff);
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>(v & 0xff);
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

IdxHeader parse_idx_header(std::string_view bytes) {
  IdxHeader h;
  h.magic = read_be32(bytes, 0);
  std::size_t ndims = 0;
  if (h.magic == kIdxImagesMagic) {
    ndims = 3;
  } else if (h.magic == kIdxLabelsMagic) {
    ndims = 1;
  } else {
    throw ParseError("idx: bad magic at byte offset 0", 0);
  }
  for (std::size_t i = 0; i < ndims; ++i) h.dims.push_back(read_be32(bytes, 4 + 4 * i));
  return h;
}

Dataset read_idx_pair(const std::string& images_path, const std::string& labels_path) {
  const std::string img = slurp(images_path);
  const std::string lab = slurp(labels_path);

  const IdxHeader ih = parse_idx_header(img);
  if (ih.magic != kIdxImagesMagic)
    throw ParseError("idx: " + images_path + " is not an image file (magic at byte offset 0)", 0);
  const IdxHeader lh = parse_idx_header(lab);
  if (lh.magic != kIdxLabelsMagic)
    throw ParseError("idx: " + labels_path + " is not a label file (magic at byte offset 0)", 0);

  const std::size_t count = ih.dims[0];
  const std::size_t p = std::size_t{ih.dims[1]} * ih.dims[2];
  const std::size_t img_offset = 16;
  const std::size_t lab_offset = 8;
  if (img.size() != img_offset + count * p)
    throw ParseError("idx: image payload truncated or oversized at byte offset " +
                         std::to_string(std::min(img.size(), img_offset + count * p)),
                     std::min(img.size(), img_offset + count * p));
  if (lh.dims[0] != count)
    throw ParseError("idx: label count " + std::to_string(lh.dims[0]) +
                         " does not match image count " + std::to_string(count) +
                         " (byte offset 4)",
                     4);
  if (lab.size() != lab_offset + count)
    throw ParseError("idx: label payload truncated or oversized at byte offset " +
                         std::to_string(std::min(lab.size(), lab_offset + count)),
                     std::min(lab.size(), lab_offset + count));
  if (count == 0 || p == 0) throw DataError("idx: empty image set");

  Matrix features(count, p);
  const auto* px = reinterpret_cast<const unsigned char*>(img.data() + img_offset);
  for (std::size_t i = 0; i < count * p; ++i) features.data()[i] = px[i] / 255.0;

  TargetColumn t{"label", std::vector<int>(count), 0};
  const auto* lb = reinterpret_cast<const unsigned char*>(lab.data() + lab_offset);
  for (std::size_t i = 0; i < count; ++i) {
    t.labels[i] = lb[i];
    t.class_count = std::max(t.class_count, int{lb[i]} + 1);
  }
  return make_dataset(std::move(features), {std::move(t)}, FeatureKind::image_pixels_unit_interval);
}

void write_idx_pair(const Dataset& ds, std::size_t rows, std::size_t cols,
                    const std::string& images_path, const std::string& labels_path) {
  if (rows * cols != ds.p()) throw ConfigError("idx: rows * cols must equal p");
  const auto& t = ds.target();
  std::string img;
  img.reserve(16 + ds.n() * ds.p());
  put_be32(img, kIdxImagesMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.n()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : ds.features.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("idx: pixel outside [0, 1]");
    img += static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  std::string lab;
  put_be32(lab, kIdxLabelsMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.n()));
  for (int y : t.labels) {
    if (y < 0 || y > 255) throw ConfigError("idx: label outside a byte");
    lab += static_cast<char>(static_cast<unsigned char>(y));
  }
  write_file(images_path, img);
  write_file(labels_path, lab);
}

// ---------------------------------------------------------------- tables

namespace {

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e && std::isfinite(out);
}

bool parse_label(const std::string& s, int& out) {
  double v = 0.0;
  if (!parse_double(s, v)) return false;
  if (v < 0 || v != std::floor(v) || v > 1e9) return false;
  out = static_cast<int>(v);
  return true;
}

std::vector<std::string> split_plain(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    const auto a = f.find_first_not_of(" \t\r");
    const auto b = f.find_last_not_of(" \t\r");
    f = a == std::string::npos ? std::string() : f.substr(a, b - a + 1);
  }
  return out;
}

}  // namespace

TableRead read_table(const std::string& path, char delimiter,
                     const std::vector<std::string>& target_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("table: missing header row (line 1)", 1);
  const auto header = split_plain(line, delimiter);

  std::vector<int> target_pos(header.size(), -1);
  for (std::size_t t = 0; t < target_columns.size(); ++t) {
    auto it = std::find(header.begin(), header.end(), target_columns[t]);
    if (it == header.end())
      throw ParseError("table: target column '" + target_columns[t] + "' not in header (line 1)", 1);
    target_pos[static_cast<std::size_t>(it - header.begin())] = static_cast<int>(t);
  }
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (target_pos[c] < 0) feature_names.push_back(header[c]);
  if (feature_names.empty()) throw ParseError("table: no feature columns (line 1)", 1);

  std::vector<double> values;
  std::vector<std::vector<int>> labels(target_columns.size());
  std::size_t rows = 0, dropped = 0;
  std::uint64_t line_no = 1;
  std::vector<double> row_values(feature_names.size());
  std::vector<int> row_labels(target_columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_plain(line, delimiter);
    if (cells.size() != header.size())
      throw ParseError("table: line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header.size()),
                       line_no);
    bool ok = true;
    std::size_t f = 0;
    for (std::size_t c = 0; c < cells.size() && ok; ++c) {
      if (target_pos[c] >= 0)
        ok = parse_label(cells[c], row_labels[static_cast<std::size_t>(target_pos[c])]);
      else
        ok = parse_double(cells[c], row_values[f++]);
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    values.insert(values.end(), row_values.begin(), row_values.end());
    for (std::size_t t = 0; t < labels.size(); ++t) labels[t].push_back(row_labels[t]);
    ++rows;
  }
  if (rows == 0) throw DataError("table: no usable rows in " + path);

  std::vector<TargetColumn> targets;
  for (std::size_t t = 0; t < target_columns.size(); ++t) {
    const int k = *std::max_element(labels[t].begin(), labels[t].end()) + 1;
    targets.push_back({target_columns[t], std::move(labels[t]), std::max(k, 1)});
  }
  const std::size_t p = feature_names.size();
  return {make_dataset(Matrix(rows, p, std::move(values)), std::move(targets),
                       FeatureKind::tabular_standardized, std::move(feature_names)),
          dropped};
}

void write_table(const Dataset& ds, const std::string& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write table " + path);
  for (std::size_t c = 0; c < ds.p(); ++c) {
    if (c) out << delimiter;
    out << (ds.column_names.empty() ? "f" + std::to_string(c) : ds.column_names[c]);
  }
  for (const auto& t : ds.targets) out << delimiter << t.name;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t c = 0; c < ds.p(); ++c) {
      if (c) out << delimiter;
      std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, c));
      out << buf;
    }
    for (const auto& t : ds.targets) out << delimiter << t.labels[i];
    out << '\n';
  }
}

// ---------------------------------------------------------- standardization

Standardizer standardize_fit(const Dataset& ds) {
  if (ds.n() < 2) throw ConfigError("standardize_fit needs at least 2 rows");
  const std::size_t n = ds.n(), p = ds.p();
  Standardizer st{std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < p; ++c) st.means[c] += ds.features(i, c);
  for (auto& m : st.means) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < p; ++c) {
      const double d = ds.features(i, c) - st.means[c];
      st.stds[c] += d * d;
    }
  for (auto& s : st.stds) {
    s = std::sqrt(s / static_cast<double>(n - 1));
    if (s == 0.0) s = 1.0;
  }
  return st;
}

Dataset standardize_apply(const Dataset& ds, const Standardizer& st) {
  if (st.means.size() != ds.p() || st.stds.size() != ds.p())
    throw ConfigError("standardize_apply: statistics have length " +
                      std::to_string(st.means.size()) + ", dataset has p=" +
                      std::to_string(ds.p()));
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n(); ++i) {
    auto r = out.features.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = (r[c] - st.means[c]) / st.stds[c];
  }
  out.feature_kind = FeatureKind::tabular_standardized;
  return out;
}

Dataset standardize_inverse(const Dataset& ds, const Standardizer& st) {
  if (st.means.size() != ds.p() || st.stds.size() != ds.p())
    throw ConfigError("standardize_inverse: length mismatch");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n(); ++i) {
    auto r = out.features.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = r[c] * st.stds[c] + st.means[c];
  }
  return out;
}

// ---------------------------------------------------------- surrogate

void SurrogateSpec::validate() const {
  if (n == 0 || p == 0 || k_latent == 0) throw ConfigError("surrogate: n, p, k must be positive");
  if (k_latent > p) throw ConfigError("surrogate: k_latent exceeds p");
  if (!(noise_sigma >= 0.0)) throw ConfigError("surrogate: noise_sigma must be >= 0");
  if (!latent_scales.empty()) {
    if (latent_scales.size() != k_latent)
      throw ConfigError("surrogate: latent_scales length != k_latent");
    for (double v : latent_scales)
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("surrogate: latent scales must be > 0");
  }
  if (mixing == Mixing::identity && k_latent != p)
    throw ConfigError("surrogate: identity mixing needs k_latent == p");
  for (const auto& t : targets) {
    if (t.class_count < 2) throw ConfigError("surrogate: target '" + t.name + "' needs >= 2 classes");
    if (t.weights.size() != k_latent)
      throw ConfigError("surrogate: target '" + t.name + "' weight length != k_latent");
    if (t.link == TargetLink::xor_ && t.weights2.size() != k_latent)
      throw ConfigError("surrogate: xor target '" + t.name + "' needs weights2");
    if (!t.weights3.empty() && t.weights3.size() != k_latent)
      throw ConfigError("surrogate: target '" + t.name + "' weights3 length != k_latent");
    if (!(t.noise >= 0.0)) throw ConfigError("surrogate: target noise must be >= 0");
  }
}

Surrogate generate_surrogate(const SurrogateSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n, p = spec.p, k = spec.k_latent;

  Rng zrng(derive_seed(spec.seed, "surrogate.latent"));
  Matrix z(n, k);
  for (double& v : z.values()) v = zrng.normal();

  Matrix mixing(p, k);  // orthonormal columns
  if (spec.mixing == Mixing::identity) {
    mixing = Matrix::identity(p);
  } else {
    Rng wrng(derive_seed(spec.seed, "surrogate.mixing"));
    Eigen::MatrixXd g(p, k);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = wrng.normal();
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(p, k);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < k; ++c)
        mixing(r, c) = q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  Matrix loaded = z;
  if (!spec.latent_scales.empty())
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) loaded(i, c) *= spec.latent_scales[c];
  Matrix features = multiply_transposed(loaded, mixing);
  if (spec.noise_sigma > 0.0) {
    Rng nrng(derive_seed(spec.seed, "surrogate.noise"));
    for (double& v : features.values()) v += spec.noise_sigma * nrng.normal();
  }

  std::vector<TargetColumn> targets;
  for (std::size_t ti = 0; ti < spec.targets.size(); ++ti) {
    const auto& def = spec.targets[ti];
    Rng trng(derive_seed(spec.seed, "surrogate.target", {ti}));
    std::vector<double> prob(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += def.weights[c] * z(i, c);
      if (def.link == TargetLink::xor_) {
        for (std::size_t c = 0; c < k; ++c) s2 += def.weights2[c] * z(i, c);
        s *= s2;
        for (std::size_t c = 0; c < def.weights3.size(); ++c) s += def.weights3[c] * z(i, c);
      }
      if (def.noise > 0.0) s += def.noise * trng.normal();
      prob[i] = 1.0 / (1.0 + std::exp(-s));
    }
    // Equal-count bins over the logistic scores; ties keep row order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return prob[a] < prob[b]; });
    TargetColumn col{def.name, std::vector<int>(n), def.class_count};
    for (std::size_t rank = 0; rank < n; ++rank)
      col.labels[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(def.class_count) / n);
    targets.push_back(std::move(col));
  }

  std::vector<std::string> names(p);
  for (std::size_t c = 0; c < p; ++c) names[c] = "idp_" + std::to_string(c);
  return {make_dataset(std::move(features), std::move(targets), FeatureKind::tabular_standardized,
                       std::move(names)),
          std::move(z)};
}

SurrogateSpec ukbb_surrogate_spec(std::string_view modality, std::uint64_t seed) {
  SurrogateSpec spec;
  spec.n = 7500;
  spec.k_latent = 10;
  spec.seed = seed;
  if (modality == "t1") {
    spec.p = 164;
    spec.noise_sigma = 0.35;
  } else if (modality == "rfmri") {
    spec.p = 210;
    spec.noise_sigma = 0.7;
  } else if (modality == "dmri") {
    spec.p = 432;
    spec.noise_sigma = 0.5;
  } else {
    throw ConfigError("unknown surrogate modality '" + std::string(modality) +
                      "' (expected t1, rfmri or dmri)");
  }
  const std::size_t k = spec.k_latent;
  // Distinct loadings 0.7, 0.9, ..., 2.5 so each latent is its own principal
  // axis; the xor factors carry the most variance.
  spec.latent_scales.resize(k);
  for (std::size_t c = 0; c < k; ++c) spec.latent_scales[c] = 0.7 + 0.2 * static_cast<double>(c);
  auto axis = [k](std::initializer_list<std::pair<std::size_t, double>> entries) {
    std::vector<double> w(k, 0.0);
    for (auto [i, v] : entries) w[i] = v;
    return w;
  };
  spec.targets = {
      {"sex", 2, axis({{0, 2.0}}), TargetLink::linear, {}, {}, 0.5},
      {"age", 5, axis({{1, 1.2}, {2, 0.8}}), TargetLink::linear, {}, {}, 0.3},
      {"smoking", 4, axis({{3, 1.2}}), TargetLink::linear, {}, {}, 0.4},
      {"work_satisfaction", 5, axis({{4, 1.0}, {0, 0.4}}), TargetLink::linear, {}, {}, 0.4},
      {"household_income", 5, axis({{5, 1.0}, {6, 0.6}}), TargetLink::linear, {}, {}, 0.3},
      {"household_size", 5, axis({{7, 1.0}}), TargetLink::xor_, axis({{8, 1.0}}),
       axis({{9, 0.4}}), 0.3},
  };
  return spec;
}

}  // namespace latentbench
