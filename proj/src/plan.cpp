#include "latentbench/plan.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "latentbench/error.hpp"
#include "latentbench/rng.hpp"

namespace latentbench {

using nlohmann::json;

std::string_view to_string(EmbedderKind kind) noexcept {
  switch (kind) {
    case EmbedderKind::pca: return "pca";
    case EmbedderKind::isomap: return "isomap";
    case EmbedderKind::vae: return "vae";
    case EmbedderKind::raw: return "raw";
  }
  return "?";
}

std::string_view to_string(ClassifierKind kind) noexcept {
  return kind == ClassifierKind::logreg ? "logreg" : "random_forest";
}

EmbedderKind parse_embedder(std::string_view name) {
  for (auto k : {EmbedderKind::pca, EmbedderKind::isomap, EmbedderKind::vae, EmbedderKind::raw})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown embedder '" + std::string(name) + "'");
}

ClassifierKind parse_classifier(std::string_view name) {
  for (auto k : {ClassifierKind::logreg, ClassifierKind::random_forest})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown classifier '" + std::string(name) + "'");
}

void ExperimentPlan::validate() const {
  if (dataset_id.empty()) throw ConfigError("plan: dataset_id is empty");
  if (target_name.empty()) throw ConfigError("plan: target_name is empty");
  if (labeled_sizes.empty() || unlabeled_sizes.empty())
    throw ConfigError("plan: labeled_sizes and unlabeled_sizes must be non-empty");
  if (repetitions == 0) throw ConfigError("plan: repetitions must be positive");
  if (latent_dim == 0) throw ConfigError("plan: latent_dim must be positive");
  for (auto s : labeled_sizes)
    if (s == 0) throw ConfigError("plan: labeled sizes must be positive");
  for (auto s : unlabeled_sizes)
    if (s == 0) throw ConfigError("plan: unlabeled sizes must be positive");
  const auto min_u = *std::min_element(unlabeled_sizes.begin(), unlabeled_sizes.end());
  if (embedder != EmbedderKind::raw && latent_dim > min_u)
    throw ConfigError("plan: latent_dim " + std::to_string(latent_dim) +
                      " exceeds smallest unlabeled size " + std::to_string(min_u));
}

json to_json(const ExperimentPlan& plan) {
  return json{{"dataset_id", plan.dataset_id},
              {"target_name", plan.target_name},
              {"embedder", std::string(to_string(plan.embedder))},
              {"classifier", std::string(to_string(plan.classifier))},
              {"latent_dim", plan.latent_dim},
              {"labeled_sizes", plan.labeled_sizes},
              {"unlabeled_sizes", plan.unlabeled_sizes},
              {"repetitions", plan.repetitions},
              {"master_seed", plan.master_seed},
              {"binarize", plan.binarize}};
}

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ConfigError(std::string("plan: missing field '") + name + "'");
  return *it;
}

std::size_t positive(const json& v, const char* name) {
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
    throw ConfigError(std::string("plan: '") + name + "' must be a positive integer");
  return v.get<std::size_t>();
}

std::vector<std::size_t> size_list(const json& v, const char* name) {
  if (!v.is_array()) throw ConfigError(std::string("plan: '") + name + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(positive(e, name));
  return out;
}

}  // namespace

ExperimentPlan plan_from_json(const json& j) {
  static const std::set<std::string> known{
      "dataset_id", "target_name", "embedder",    "classifier",  "latent_dim",
      "labeled_sizes", "unlabeled_sizes", "repetitions", "master_seed", "binarize"};
  if (!j.is_object()) throw ConfigError("plan: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("plan: unknown field '" + key + "'");

  ExperimentPlan plan;
  const auto& ds = field(j, "dataset_id");
  const auto& tn = field(j, "target_name");
  const auto& em = field(j, "embedder");
  const auto& cl = field(j, "classifier");
  if (!ds.is_string() || !tn.is_string() || !em.is_string() || !cl.is_string())
    throw ConfigError("plan: dataset_id, target_name, embedder, classifier must be strings");
  plan.dataset_id = ds.get<std::string>();
  plan.target_name = tn.get<std::string>();
  plan.embedder = parse_embedder(em.get<std::string>());
  plan.classifier = parse_classifier(cl.get<std::string>());
  plan.labeled_sizes = size_list(field(j, "labeled_sizes"), "labeled_sizes");
  plan.unlabeled_sizes = size_list(field(j, "unlabeled_sizes"), "unlabeled_sizes");
  const auto& seed = field(j, "master_seed");
  if (!seed.is_number_unsigned()) throw ConfigError("plan: master_seed must be unsigned");
  plan.master_seed = seed.get<std::uint64_t>();
  if (j.contains("latent_dim")) plan.latent_dim = positive(j["latent_dim"], "latent_dim");
  if (j.contains("repetitions")) plan.repetitions = positive(j["repetitions"], "repetitions");
  if (j.contains("binarize")) {
    if (!j["binarize"].is_boolean()) throw ConfigError("plan: binarize must be a boolean");
    plan.binarize = j["binarize"].get<bool>();
  }
  plan.validate();
  return plan;
}

namespace {
json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("plan file " + path + ": " + e.what());
  }
}
}  // namespace

ExperimentPlan read_plan(const std::string& path) { return plan_from_json(parse_file(path)); }

std::vector<ExperimentPlan> read_plans(const std::string& path) {
  const json j = parse_file(path);
  std::vector<ExperimentPlan> plans;
  if (j.is_array()) {
    for (const auto& e : j) plans.push_back(plan_from_json(e));
  } else {
    plans.push_back(plan_from_json(j));
  }
  return plans;
}

void write_plan(const ExperimentPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write plan file " + path);
  out << to_json(plan).dump(2) << '\n';
}

std::string plan_fingerprint(const ExperimentPlan& plan, const json& run_config) {
  const json canonical{{"plan", to_json(plan)}, {"config", run_config}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical.dump())));
  return buf;
}

}  // namespace latentbench
