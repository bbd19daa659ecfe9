#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "latentbench/dataset.hpp"

namespace latentbench {

// ---------------------------------------------------------------- IDX files

inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
};

/// Parses the big-endian header from the start of `bytes`.
IdxHeader parse_idx_header(std::string_view bytes);

/// MNIST-style image/label pair. Pixels are divided by 255 and flattened row
/// by row; labels become the single target "label".
Dataset read_idx_pair(const std::string& images_path, const std::string& labels_path);

/// Inverse of read_idx_pair. Features must lie in [0, 1]; they are stored as
/// round(255 * x). `rows * cols` must equal p.
void write_idx_pair(const Dataset& ds, std::size_t rows, std::size_t cols,
                    const std::string& images_path, const std::string& labels_path);

// ---------------------------------------------------------- delimited text

struct TableRead {
  Dataset dataset;
  std::size_t dropped_rows = 0;
};

/// Header row required. Named target columns must hold non-negative integers;
/// every other column becomes a feature. Rows with any unparseable cell are
/// dropped and counted. Ragged rows and missing targets are parse errors.
TableRead read_table(const std::string& path, char delimiter,
                     const std::vector<std::string>& target_columns);

/// Writes features then target columns with a header row.
void write_table(const Dataset& ds, const std::string& path, char delimiter = ',');

// ---------------------------------------------------------- standardization

struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
};

/// Column means and sample standard deviations (divisor n-1); a zero std is
/// stored as 1. Requires n >= 2.
Standardizer standardize_fit(const Dataset& ds);
Dataset standardize_apply(const Dataset& ds, const Standardizer& st);
Dataset standardize_inverse(const Dataset& ds, const Standardizer& st);

// ------------------------------------------------------- synthetic surrogate

enum class TargetLink {
  linear,  // score = w . z
  xor_,    // score = (w . z) * (w2 . z) + (w3 . z)
};

struct TargetDef {
  std::string name;
  int class_count = 2;
  std::vector<double> weights;   // length k_latent
  TargetLink link = TargetLink::linear;
  std::vector<double> weights2;  // xor link only
  std::vector<double> weights3;  // xor link only, optional linear part
  double noise = 0.0;            // std of Gaussian noise added to the score
};

enum class Mixing { random_orthonormal, identity };

struct SurrogateSpec {
  std::size_t n = 7500;
  std::size_t p = 164;
  std::size_t k_latent = 10;
  double noise_sigma = 0.5;
  /// Per-latent loading scale (empty: all 1). Distinct scales make the
  /// latent axes identifiable as principal directions.
  std::vector<double> latent_scales;
  std::vector<TargetDef> targets;
  std::uint64_t seed = 0;
  Mixing mixing = Mixing::random_orthonormal;

  void validate() const;
};

struct Surrogate {
  Dataset dataset;
  Matrix latents;  // n x k_latent
};

/// z ~ N(0, I); features = z S W^T + sigma * noise with S = diag(latent_scales)
/// and W (p x k) having orthonormal columns. Each target bins a logistic
/// transform of its score into class_count equal-count bins. Features are
/// tabular.
Surrogate generate_surrogate(const SurrogateSpec& spec);

/// Shape-matched stand-ins for the three imaging tables: "t1" (p=164),
/// "rfmri" (p=210), "dmri" (p=432), each with n=7500 and the six targets
/// sex(2), age(5), smoking(4), work_satisfaction(5), household_income(5),
/// household_size(5). household_size uses the xor link; the rest are linear.
SurrogateSpec ukbb_surrogate_spec(std::string_view modality, std::uint64_t seed);

}  // namespace latentbench
