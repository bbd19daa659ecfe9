#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "latentbench/harness.hpp"
#include "latentbench/results.hpp"

namespace latentbench {

struct AggregateKey {
  std::string dataset_id;
  std::string target;
  std::string embedder;
  std::string classifier;
  std::size_t labeled_size = 0;
  std::size_t unlabeled_size = 0;

  auto operator<=>(const AggregateKey&) const = default;
};

struct AggregateRow {
  AggregateKey key;
  std::string fingerprint;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;   // successful repetitions
  std::size_t failed = 0;  // failed repetitions, excluded from mean/std
  std::optional<MeanStd> effect;

  bool operator==(const AggregateRow&) const = default;
};

bool operator==(const MeanStd& a, const MeanStd& b);

/// Groups by key in lexicographic order. Mixed fingerprints inside one group
/// raise DataError. Groups whose cells all failed get NaN mean and count 0.
std::vector<AggregateRow> aggregate(std::span<const ResultRecord> records);

struct EffectRow {
  std::string dataset_id;
  std::string target;
  std::string embedder;
  std::string classifier;
  std::size_t labeled_size = 0;
  std::size_t unlabeled_max = 0;
  SemisupEffect effect;
};

/// Semisupervision effect for every (dataset, target, embedder, classifier, L)
/// with L below the ceiling and at least one U > L.
std::vector<EffectRow> compute_effects(std::span<const ResultRecord> records,
                                       std::size_t labeled_ceiling, EffectBaseline baseline);

/// Copies each effect onto the aggregate row of its (L, U_max) cell.
void attach_effects(std::vector<AggregateRow>& rows, std::span<const EffectRow> effects);

/// Comma-separated table with a '#' header block naming fingerprints and the
/// meaning of std. Numbers use 17 significant digits so parsing is exact.
std::string format_aggregates(std::span<const AggregateRow> rows);
std::vector<AggregateRow> parse_aggregates(std::string_view text);

enum class FigureKind { f1_unlabeled_curves, f2_embedder_grid, f3_modality_bars };

FigureKind parse_figure(std::string_view name);
std::string_view to_string(FigureKind kind) noexcept;

struct FigureTable {
  std::string text;
  std::vector<std::string> warnings;  // one per absent key
};

struct FigureOptions {
  /// f1: labeled size of the curves (0: smallest present).
  std::size_t labeled_size = 0;
  /// Embedders expected as f2 columns.
  std::vector<std::string> embedders = {"pca", "isomap", "vae"};
};

/// f1: one curve per (dataset, target, embedder, classifier) over U at fixed L.
/// f2: per target and embedder, one curve over U per L.
/// f3: per dataset, target and classifier, one bar per L at the largest U.
/// Absent combinations become rows with empty values and a warning.
FigureTable emit_figure_table(std::span<const AggregateRow> rows, FigureKind kind,
                              const FigureOptions& options = {});

struct EffectSummaryRow {
  std::string dataset_id;
  std::string embedder;
  std::string classifier;
  std::size_t labeled_size = 0;
  std::vector<std::string> targets;
  std::vector<double> weights;
  MeanStd effect;  // over repetitions of the per-repetition weighted mean
};

/// Per (dataset, embedder, classifier, L): weighted cross-target effect.
/// Targets missing a repetition's effect are left out of that repetition's
/// weighted mean. Empty weights mean uniform; otherwise every target needs one.
std::vector<EffectSummaryRow> summarize_effects(
    std::span<const EffectRow> effects, const std::map<std::string, double>& weights = {});

nlohmann::json effects_to_json(std::span<const EffectSummaryRow> rows);
/// Aligned text table; every "±" is followed by the repetition count.
std::string effects_to_text(std::span<const EffectSummaryRow> rows);

}  // namespace latentbench
