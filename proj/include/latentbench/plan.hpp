#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace latentbench {

enum class EmbedderKind { pca, isomap, vae, raw };
enum class ClassifierKind { logreg, random_forest };

std::string_view to_string(EmbedderKind kind) noexcept;
std::string_view to_string(ClassifierKind kind) noexcept;
EmbedderKind parse_embedder(std::string_view name);
ClassifierKind parse_classifier(std::string_view name);

/// Declarative description of one benchmark sweep.
struct ExperimentPlan {
  std::string dataset_id;
  std::string target_name;
  EmbedderKind embedder = EmbedderKind::pca;
  ClassifierKind classifier = ClassifierKind::logreg;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> labeled_sizes;
  std::vector<std::size_t> unlabeled_sizes;
  std::size_t repetitions = 25;
  std::uint64_t master_seed = 0;
  bool binarize = false;

  /// Throws ConfigError on empty size lists, zero sizes, zero repetitions,
  /// or when latent_dim exceeds the smallest unlabeled size.
  void validate() const;

  bool operator==(const ExperimentPlan&) const = default;
};

nlohmann::json to_json(const ExperimentPlan& plan);
/// Strict: unknown or mistyped fields are rejected with ConfigError.
ExperimentPlan plan_from_json(const nlohmann::json& j);

ExperimentPlan read_plan(const std::string& path);
/// A plan file holds one plan object or an array of them.
std::vector<ExperimentPlan> read_plans(const std::string& path);
void write_plan(const ExperimentPlan& plan, const std::string& path);

/// 16 hex digits over the canonical serialization of the plan plus any
/// additional run configuration that changes results.
std::string plan_fingerprint(const ExperimentPlan& plan,
                             const nlohmann::json& run_config = nlohmann::json::object());

}  // namespace latentbench
