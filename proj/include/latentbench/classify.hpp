#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "latentbench/forest.hpp"
#include "latentbench/logreg.hpp"
#include "latentbench/matrix.hpp"
#include "latentbench/plan.hpp"

namespace latentbench {

/// Fraction of exact matches; ConfigError on empty or unequal input.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct ClassifierConfig {
  LogRegOptions logreg;
  ForestConfig forest;
};

nlohmann::json to_json(const ClassifierConfig& cfg);
/// Inverse of to_json; missing fields keep their defaults, unknown ones are rejected.
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

/// Either of the two fitted classifiers behind one predict call.
struct Classifier {
  ClassifierKind kind = ClassifierKind::logreg;
  LogRegModel logreg;
  ForestModel forest;

  std::vector<int> predict(const Matrix& x) const;
  nlohmann::json summary() const;
};

Classifier classifier_fit(ClassifierKind kind, const Matrix& x, std::span<const int> y,
                          std::size_t classes, const ClassifierConfig& cfg);

}  // namespace latentbench
