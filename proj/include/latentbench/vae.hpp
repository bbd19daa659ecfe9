#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentbench/dataset.hpp"
#include "latentbench/matrix.hpp"
#include "latentbench/model_io.hpp"

namespace latentbench {

/// Encoder x -> relu(W1 x + b1) -> (mu, logvar); decoder z -> relu(W2 z + b2)
/// -> W_out h + b_out (logits for images, means for tabular rows).
struct VaeParams {
  Matrix w1;      // hidden x p
  std::vector<double> b1;
  Matrix w_mu;    // d x hidden
  std::vector<double> b_mu;
  Matrix w_logvar;  // d x hidden
  std::vector<double> b_logvar;
  Matrix w2;      // hidden x d
  std::vector<double> b2;
  Matrix w_out;   // p x hidden
  std::vector<double> b_out;

  std::size_t p() const noexcept { return w1.cols(); }
  std::size_t d() const noexcept { return w_mu.rows(); }
  std::size_t hidden() const noexcept { return w1.rows(); }

  /// Zero-initialized parameters of the given shape.
  static VaeParams zeros(std::size_t p, std::size_t d, std::size_t hidden);
  /// Every tensor in a fixed order: w1 b1 w_mu b_mu w_logvar b_logvar w2 b2 w_out b_out.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool operator==(const VaeParams&) const = default;
};

struct VaeTrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 100;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t hidden = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const VaeTrainConfig& cfg);
VaeTrainConfig vae_config_from_json(const nlohmann::json& j);

/// Batch-averaged negative ELBO. kl >= 0.
struct ElboParts {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// KL(N(mu, exp(logvar)) || N(0, 1)) for one latent coordinate.
double gaussian_kl(double mu, double logvar) noexcept;

/// Bernoulli cross-entropy of target x in [0,1] against a logit, in the
/// overflow-free form max(o,0) - x*o + log1p(exp(-|o|)).
double bernoulli_cross_entropy(double x, double logit) noexcept;

/// Loss for one batch with externally supplied standard-normal noise
/// (batch x d). When `grad` is non-null it receives the gradient of `total`
/// with respect to every parameter (same shapes as `params`).
ElboParts vae_loss(const VaeParams& params, const Matrix& batch, FeatureKind kind,
                   const Matrix& noise, VaeParams* grad = nullptr);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
VaeParams vae_init(std::size_t p, std::size_t d, std::size_t hidden, std::uint64_t seed);

struct EpochStats {
  std::size_t epoch = 0;  // 0 is the untrained network
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct VaeFit {
  VaeParams params;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
};

/// Adam on shuffled minibatches; returns the parameters from the epoch with
/// the lowest mean training loss. Stops after `patience` epochs without
/// improvement. Throws NumericError on a non-finite loss.
VaeFit vae_fit(const Matrix& rows, FeatureKind kind, std::size_t d, const VaeTrainConfig& cfg);

/// Encoder means.
Matrix vae_encode(const VaeParams& params, const Matrix& rows);

void write_training_curve(const std::vector<EpochStats>& curve, const std::string& path);

void save_vae(const VaeParams& params, const VaeTrainConfig& cfg, FeatureKind kind,
              ModelWriter& out);
struct LoadedVae {
  VaeParams params;
  VaeTrainConfig config;
  FeatureKind kind = FeatureKind::tabular_standardized;
};
LoadedVae load_vae(const ModelReader& in);

}  // namespace latentbench
