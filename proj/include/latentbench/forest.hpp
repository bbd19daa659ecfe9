#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentbench/matrix.hpp"
#include "latentbench/model_io.hpp"

namespace latentbench {

/// Gini impurity 1 - sum_k (n_k / n)^2 of a class histogram.
double gini_impurity(std::span<const double> counts) noexcept;

struct TreeNode {
  int feature = -1;         // -1 marks a leaf
  double threshold = 0.0;   // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  std::vector<double> histogram;  // leaves only: class counts of training rows

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(std::span<const double> row) const;
  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

enum class MaxFeatures { sqrt, all };

struct ForestConfig {
  std::size_t trees = 100;
  MaxFeatures max_features = MaxFeatures::sqrt;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t classes = 0;
  std::size_t d = 0;
  ForestConfig config;
  /// Out-of-bag accuracy over rows left out of at least one tree (bootstrap only).
  std::optional<double> oob_accuracy;
};

/// Breiman forest: bootstrap per tree, ceil(sqrt(d)) candidate features per
/// node, Gini decrease over midpoints of consecutive distinct values, ties to
/// the lowest feature index then the lowest threshold.
ForestModel forest_fit(const Matrix& x, std::span<const int> y, std::size_t classes,
                       const ForestConfig& config = {});

/// Majority vote of the trees' leaf argmaxes, ties to the lower class index.
std::vector<int> forest_predict(const ForestModel& model, const Matrix& x);

/// Indented human-readable dump of every tree.
std::string dump_trees(const ForestModel& model);

void save_forest(const ForestModel& model, ModelWriter& out);
ForestModel load_forest(const ModelReader& in);

}  // namespace latentbench
