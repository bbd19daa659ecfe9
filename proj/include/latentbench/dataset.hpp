#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentbench/matrix.hpp"
#include "latentbench/rng.hpp"

namespace latentbench {

enum class FeatureKind { image_pixels_unit_interval, tabular_standardized };

std::string_view to_string(FeatureKind kind) noexcept;

/// Where a row sits relative to the current repetition's split. Every fit in
/// the harness checks that none of its rows carry `test`.
enum class Partition : std::uint8_t { source, train, test };

struct TargetColumn {
  std::string name;
  std::vector<int> labels;
  int class_count = 0;

  bool operator==(const TargetColumn&) const = default;
};

struct Dataset {
  Matrix features;
  std::vector<TargetColumn> targets;
  FeatureKind feature_kind = FeatureKind::tabular_standardized;
  std::vector<std::string> column_names;
  /// Row index in the originally loaded dataset.
  std::vector<std::size_t> row_ids;
  std::vector<Partition> partition;

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t p() const noexcept { return features.cols(); }
  bool has_targets() const noexcept { return !targets.empty(); }

  /// The only target column; usage error when there is not exactly one.
  const TargetColumn& target() const;
  TargetColumn& target();

  /// Throws DataError on any broken invariant.
  void validate() const;

  /// Rows by index (order kept); targets, ids and provenance follow.
  Dataset select(std::span<const std::size_t> indices) const;
  /// Same rows, keeping only the named target column.
  Dataset with_target(std::string_view name) const;
  Dataset without_targets() const;
};

/// Builds a dataset with fresh row ids 0..n-1 and source provenance.
Dataset make_dataset(Matrix features, std::vector<TargetColumn> targets, FeatureKind kind,
                     std::vector<std::string> column_names = {});

struct SplitSpec {
  std::size_t train_size = 7000;
  std::size_t test_size = 500;
  std::uint64_t repetition_index = 0;
  std::uint64_t master_seed = 0;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Disjoint random split; the permutation depends only on
/// (master_seed, repetition_index). Rows are tagged train/test.
TrainTest split_train_test(const Dataset& ds, const SplitSpec& spec);

/// y -> 1 if y > reference_mean else 0 for the single target; class_count 2.
/// Two-class targets are returned unchanged, so applying it twice is a no-op.
Dataset binarize_target(const Dataset& ds, double reference_mean);

double target_mean(const Dataset& ds);

struct Subsample {
  std::vector<std::size_t> indices;
  bool stratified = false;
};

/// Row indices of a size-`size` subsample. With `stratify` and a single
/// target present, classes get proportional quotas with at least one row per
/// class present; falls back to plain random (and logs) when size is smaller
/// than the number of classes present.
Subsample subsample_indices(const Dataset& ds, std::size_t size, Rng& stream, bool stratify);
Dataset subsample(const Dataset& ds, std::size_t size, Rng& stream, bool stratify);

/// Per-class counts of the single target.
std::vector<std::size_t> class_frequencies(const Dataset& ds);

/// Throws LeakageError if any row of `ds` is tagged as test. `stage` names the
/// statistic about to be fit.
void require_no_test_rows(const Dataset& ds, std::string_view stage);
/// Number of leakage checks performed by this process (for audits).
std::uint64_t leakage_checks_performed() noexcept;

}  // namespace latentbench
