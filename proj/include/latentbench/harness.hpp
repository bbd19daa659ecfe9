#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentbench/classify.hpp"
#include "latentbench/dataset.hpp"
#include "latentbench/plan.hpp"
#include "latentbench/results.hpp"
#include "latentbench/vae.hpp"

namespace latentbench {

/// Where the floor and ceiling of the semisupervision effect come from:
/// the plan's own embedder+classifier, or raw features with the same classifier.
enum class EffectBaseline { pipeline, raw };

std::string_view to_string(EffectBaseline b) noexcept;
EffectBaseline parse_effect_baseline(std::string_view name);

/// Settings that change results but are not part of the plan document.
/// Everything except `record_timing` and `embedding_cache` enters the fingerprint.
struct RunConfig {
  std::size_t train_size = 7000;
  std::size_t test_size = 500;
  std::size_t isomap_k = 5;
  std::uint64_t max_geodesic_bytes = std::uint64_t{2} << 30;
  ClassifierConfig classifier;
  VaeTrainConfig vae;
  EffectBaseline effect_baseline = EffectBaseline::pipeline;
  /// Adds the ceiling cell (L = U = train_size) to every repetition of a sweep,
  /// plus raw floor cells when the baseline is raw.
  bool include_anchors = true;
  bool record_timing = true;
  std::size_t embedding_cache = 4;

  nlohmann::json to_json() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);

/// Resolves dataset ids:
///   idx:<images>,<labels>       IDX image/label pair
///   csv:<path>[;<target>,...]   comma table; every listed column becomes a target
///   surrogate:<t1|rfmri|dmri>[:seed]
/// Loaded datasets are memoized per id.
std::shared_ptr<const Dataset> load_dataset(const std::string& dataset_id);

struct RunCell {
  std::size_t repetition = 0;
  std::size_t labeled_size = 0;
  std::size_t unlabeled_size = 0;
  EmbedderKind embedder = EmbedderKind::pca;
  ClassifierKind classifier = ClassifierKind::logreg;
  double test_accuracy = 0.0;  // NaN when the cell failed
  std::string failure;
  nlohmann::json metadata = nlohmann::json::object();

  bool ok() const noexcept { return failure.empty(); }
};

class EmbeddingCache;

/// One sweep cell. `dataset` must carry the plan's target. Embedding failures
/// are returned as a failed cell; configuration errors propagate.
RunCell run_cell(const ExperimentPlan& plan, const Dataset& dataset, std::size_t repetition,
                 std::size_t labeled_size, std::size_t unlabeled_size, const RunConfig& cfg,
                 EmbeddingCache* cache = nullptr);

/// Shares fitted embeddings between cells whose unlabeled pools are the same
/// row set. Fits are pure functions of the pool, so a hit returns exactly what
/// a fresh fit would.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::size_t capacity);
  ~EmbeddingCache();
  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

struct CellKey {
  std::size_t repetition = 0;
  std::size_t labeled_size = 0;
  std::size_t unlabeled_size = 0;
  EmbedderKind embedder = EmbedderKind::pca;
  std::string role;  // "grid", "ceiling" or "floor"
};

/// The cells of a plan in execution order: repetition, then L, then U with U >= L,
/// then the anchors of that repetition.
std::vector<CellKey> sweep_cells(const ExperimentPlan& plan, const RunConfig& cfg);

ResultRecord to_record(const ExperimentPlan& plan, const std::string& fingerprint,
                       const RunCell& cell, double wall_time_s);

struct SweepOptions {
  std::string results_path;
  std::size_t workers = 1;
  bool resume = false;
  /// Called after every appended record; returning false stops the sweep
  /// (used to simulate interruption).
  std::function<bool(const ResultRecord&)> on_record;
};

struct SweepSummary {
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  bool stopped = false;
};

/// Runs every plan's cells, appending to the results file through one writer.
/// With `resume`, cells already present under the same fingerprint are skipped
/// and a torn final line is cut off first.
SweepSummary run_sweep(std::span<const ExperimentPlan> plans, const RunConfig& cfg,
                       const SweepOptions& options);

struct SemisupEffect {
  double value = 0.0;  // mean over repetitions with a defined effect
  double std = 0.0;    // sample standard deviation
  std::size_t count = 0;
  std::size_t undefined = 0;
  double floor_accuracy = 0.0;
  double semi_accuracy = 0.0;
  double ceiling_accuracy = 0.0;
  std::vector<std::size_t> repetitions;
  std::vector<double> per_repetition;  // NaN where undefined
};

struct EffectQuery {
  std::string dataset_id;
  std::string target;
  std::string embedder;
  std::string classifier;
  std::size_t labeled_reference = 100;
  std::size_t labeled_ceiling = 7000;
  std::size_t unlabeled_max = 0;  // 0: largest U present for labeled_reference
  EffectBaseline baseline = EffectBaseline::pipeline;
};

/// Per repetition (semi - floor) / (ceiling - floor) with floor = (L_ref, L_ref),
/// semi = (L_ref, U_max), ceiling = (L_ceiling, L_ceiling); repetitions with
/// |ceiling - floor| < 1e-9 are counted as undefined.
SemisupEffect semisupervision_effect(std::span<const ResultRecord> records,
                                     const EffectQuery& query);

/// The same formula over already paired accuracies.
double effect_value(double floor, double semi, double ceiling);

struct WeightedAccuracy {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  std::vector<double> weights;
};

/// per_target[t][r] is target t's accuracy in repetition r. The weighted mean
/// over targets is taken per repetition, then mean and sample std over
/// repetitions. Empty weights mean uniform.
WeightedAccuracy weighted_cross_target_accuracy(
    const std::vector<std::vector<double>>& per_target, std::span<const double> weights = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard deviation (n - 1 divisor, 0 for a single value).
MeanStd mean_std(std::span<const double> values);

}  // namespace latentbench
