#include "latentbench/classify.hpp"

#include "latentbench/error.hpp"

namespace latentbench {

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw ConfigError("accuracy: empty input");
  if (predicted.size() != truth.size())
    throw ConfigError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                      std::to_string(truth.size()) + " labels");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

nlohmann::json to_json(const ClassifierConfig& cfg) {
  return {{"logreg",
           {{"lambda", cfg.logreg.lambda},
            {"gradient_tolerance", cfg.logreg.gradient_tolerance},
            {"max_iterations", cfg.logreg.max_iterations},
            {"history", cfg.logreg.history}}},
          {"forest",
           {{"trees", cfg.forest.trees},
            {"max_features", cfg.forest.max_features == MaxFeatures::sqrt ? "sqrt" : "all"},
            {"min_leaf", cfg.forest.min_leaf},
            {"bootstrap", cfg.forest.bootstrap}}}};
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig cfg;
  if (!j.is_object()) throw ConfigError("classifier config must be a JSON object");
  try {
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object()) throw ConfigError("classifier config '" + section + "' must be an object");
      for (const auto& [key, v] : body.items()) {
        if (section == "logreg" && key == "lambda") cfg.logreg.lambda = v.get<double>();
        else if (section == "logreg" && key == "gradient_tolerance") cfg.logreg.gradient_tolerance = v.get<double>();
        else if (section == "logreg" && key == "max_iterations") cfg.logreg.max_iterations = v.get<std::size_t>();
        else if (section == "logreg" && key == "history") cfg.logreg.history = v.get<std::size_t>();
        else if (section == "forest" && key == "trees") cfg.forest.trees = v.get<std::size_t>();
        else if (section == "forest" && key == "min_leaf") cfg.forest.min_leaf = v.get<std::size_t>();
        else if (section == "forest" && key == "bootstrap") cfg.forest.bootstrap = v.get<bool>();
        else if (section == "forest" && key == "max_features") {
          const auto name = v.get<std::string>();
          if (name == "sqrt") cfg.forest.max_features = MaxFeatures::sqrt;
          else if (name == "all") cfg.forest.max_features = MaxFeatures::all;
          else throw ConfigError("unknown max_features '" + name + "'");
        } else {
          throw ConfigError("unknown classifier setting '" + section + "." + key + "'");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("classifier config: ") + e.what());
  }
  return cfg;
}

std::vector<int> Classifier::predict(const Matrix& x) const {
  return kind == ClassifierKind::logreg ? logreg_predict(logreg, x).labels
                                        : forest_predict(forest, x);
}

nlohmann::json Classifier::summary() const {
  if (kind == ClassifierKind::logreg)
    return {{"lambda", logreg.lambda},
            {"converged", logreg.converged},
            {"iterations", logreg.iterations}};
  nlohmann::json j{{"trees", forest.trees.size()}};
  if (forest.oob_accuracy) j["oob_accuracy"] = *forest.oob_accuracy;
  return j;
}

Classifier classifier_fit(ClassifierKind kind, const Matrix& x, std::span<const int> y,
                          std::size_t classes, const ClassifierConfig& cfg) {
  Classifier c;
  c.kind = kind;
  if (kind == ClassifierKind::logreg)
    c.logreg = logreg_fit(x, y, classes, cfg.logreg);
  else
    c.forest = forest_fit(x, y, classes, cfg.forest);
  return c;
}

}  // namespace latentbench
