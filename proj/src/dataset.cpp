#include "latentbench/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "latentbench/error.hpp"
#include "latentbench/log.hpp"

namespace latentbench {

namespace {
std::atomic<std::uint64_t> g_leakage_checks{0};
}

std::string_view to_string(FeatureKind kind) noexcept {
  return kind == FeatureKind::image_pixels_unit_interval ? "image_pixels_unit_interval"
                                                         : "tabular_standardized";
}

const TargetColumn& Dataset::target() const {
  if (targets.size() != 1)
    throw ConfigError("expected exactly one target column, found " +
                      std::to_string(targets.size()));
  return targets.front();
}

TargetColumn& Dataset::target() {
  return const_cast<TargetColumn&>(static_cast<const Dataset&>(*this).target());
}

void Dataset::validate() const {
  if (n() == 0 || p() == 0) throw DataError("dataset must have n > 0 and p > 0");
  if (!all_finite(features.values())) throw DataError("dataset contains non-finite features");
  if (!column_names.empty() && column_names.size() != p())
    throw DataError("column name count does not match feature count");
  if (row_ids.size() != n() || partition.size() != n())
    throw DataError("row provenance does not match row count");
  for (const auto& t : targets) {
    if (t.labels.size() != n()) throw DataError("target '" + t.name + "' has wrong length");
    if (t.class_count <= 0) throw DataError("target '" + t.name + "' has no classes");
    for (int y : t.labels)
      if (y < 0 || y >= t.class_count)
        throw DataError("target '" + t.name + "' has label " + std::to_string(y) +
                        " outside [0, " + std::to_string(t.class_count) + ")");
  }
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.feature_kind = feature_kind;
  out.column_names = column_names;
  out.row_ids.reserve(indices.size());
  out.partition.reserve(indices.size());
  for (std::size_t i : indices) {
    out.row_ids.push_back(row_ids[i]);
    out.partition.push_back(partition[i]);
  }
  for (const auto& t : targets) {
    TargetColumn col{t.name, {}, t.class_count};
    col.labels.reserve(indices.size());
    for (std::size_t i : indices) col.labels.push_back(t.labels[i]);
    out.targets.push_back(std::move(col));
  }
  return out;
}

Dataset Dataset::with_target(std::string_view name) const {
  for (const auto& t : targets) {
    if (t.name == name) {
      Dataset out = *this;
      out.targets = {t};
      return out;
    }
  }
  throw ConfigError("unknown target column '" + std::string(name) + "'");
}

Dataset Dataset::without_targets() const {
  Dataset out = *this;
  out.targets.clear();
  return out;
}

Dataset make_dataset(Matrix features, std::vector<TargetColumn> targets, FeatureKind kind,
                     std::vector<std::string> column_names) {
  Dataset ds;
  const std::size_t n = features.rows();
  ds.features = std::move(features);
  ds.targets = std::move(targets);
  ds.feature_kind = kind;
  ds.column_names = std::move(column_names);
  ds.row_ids.resize(n);
  std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
  ds.partition.assign(n, Partition::source);
  ds.validate();
  return ds;
}

TrainTest split_train_test(const Dataset& ds, const SplitSpec& spec) {
  if (!ds.has_targets()) throw ConfigError("split_train_test requires targets");
  if (spec.train_size == 0 || spec.test_size == 0 ||
      spec.train_size + spec.test_size > ds.n())
    throw ConfigError("split sizes train=" + std::to_string(spec.train_size) +
                      " test=" + std::to_string(spec.test_size) +
                      " do not fit a dataset of " + std::to_string(ds.n()) + " rows");
  Rng rng(derive_seed(spec.master_seed, "split", {spec.repetition_index}));
  const auto perm = rng.permutation(ds.n());
  const std::span<const std::size_t> all(perm);
  TrainTest out{ds.select(all.first(spec.train_size)),
                ds.select(all.subspan(spec.train_size, spec.test_size))};
  std::fill(out.train.partition.begin(), out.train.partition.end(), Partition::train);
  std::fill(out.test.partition.begin(), out.test.partition.end(), Partition::test);
  return out;
}

double target_mean(const Dataset& ds) {
  const auto& labels = ds.target().labels;
  if (labels.empty()) throw ConfigError("target_mean of an empty dataset");
  double s = 0.0;
  for (int y : labels) s += y;
  return s / static_cast<double>(labels.size());
}

Dataset binarize_target(const Dataset& ds, double reference_mean) {
  if (!ds.has_targets()) throw ConfigError("binarize_target requires integer targets");
  Dataset out = ds;
  auto& t = out.target();
  if (t.class_count == 2) return out;  // already binary
  for (int& y : t.labels) y = static_cast<double>(y) > reference_mean ? 1 : 0;
  t.class_count = 2;
  return out;
}

std::vector<std::size_t> class_frequencies(const Dataset& ds) {
  const auto& t = ds.target();
  std::vector<std::size_t> freq(static_cast<std::size_t>(t.class_count), 0);
  for (int y : t.labels) ++freq[static_cast<std::size_t>(y)];
  return freq;
}

Subsample subsample_indices(const Dataset& ds, std::size_t size, Rng& stream, bool stratify) {
  if (size == 0 || size > ds.n())
    throw ConfigError("subsample size " + std::to_string(size) + " exceeds " +
                      std::to_string(ds.n()) + " available rows");
  Subsample out;
  if (stratify && ds.targets.size() == 1) {
    const auto& t = ds.target();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(t.class_count));
    for (std::size_t i = 0; i < ds.n(); ++i)
      by_class[static_cast<std::size_t>(t.labels[i])].push_back(i);
    std::size_t present = 0;
    for (const auto& rows : by_class) present += rows.empty() ? 0 : 1;

    if (size >= present) {
      const std::size_t k = by_class.size();
      std::vector<double> ideal(k, 0.0);
      std::vector<std::size_t> quota(k, 0);
      std::size_t total = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const std::size_t nc = by_class[c].size();
        if (nc == 0) continue;
        ideal[c] = static_cast<double>(size) * static_cast<double>(nc) /
                   static_cast<double>(ds.n());
        quota[c] = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(ideal[c])), 1, nc);
        total += quota[c];
      }
      while (total < size) {
        std::size_t best = k;
        for (std::size_t c = 0; c < k; ++c) {
          if (quota[c] >= by_class[c].size()) continue;
          if (best == k || ideal[c] - quota[c] > ideal[best] - quota[best]) best = c;
        }
        ++quota[best];
        ++total;
      }
      while (total > size) {
        std::size_t best = k;
        for (std::size_t c = 0; c < k; ++c) {
          if (quota[c] <= 1) continue;
          if (best == k || ideal[c] - quota[c] <= ideal[best] - quota[best]) best = c;
        }
        --quota[best];
        --total;
      }
      for (std::size_t c = 0; c < k; ++c) {
        auto rows = by_class[c];
        stream.shuffle(rows);
        out.indices.insert(out.indices.end(), rows.begin(),
                           rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
      }
      stream.shuffle(out.indices);
      out.stratified = true;
      return out;
    }
    log().warn("subsample of {} rows cannot cover {} classes; drawing unstratified", size,
               present);
  }
  auto perm = stream.permutation(ds.n());
  perm.resize(size);
  out.indices = std::move(perm);
  return out;
}

Dataset subsample(const Dataset& ds, std::size_t size, Rng& stream, bool stratify) {
  const auto s = subsample_indices(ds, size, stream, stratify);
  return ds.select(s.indices);
}

void require_no_test_rows(const Dataset& ds, std::string_view stage) {
  g_leakage_checks.fetch_add(1, std::memory_order_relaxed);
  for (std::size_t i = 0; i < ds.partition.size(); ++i)
    if (ds.partition[i] == Partition::test)
      throw LeakageError("leakage: " + std::string(stage) + " would be fit on test row " +
                         std::to_string(ds.row_ids[i]));
}

std::uint64_t leakage_checks_performed() noexcept { return g_leakage_checks.load(); }

}  // namespace latentbench
