#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latentbench/matrix.hpp"
#include "latentbench/model_io.hpp"

namespace latentbench {

/// Multinomial logistic regression. The bias of class 0 is pinned at zero to
/// remove the softmax's additive gauge; all weights carry the L2 penalty.
struct LogRegModel {
  Matrix weights;             // c x d
  std::vector<double> biases; // c, biases[0] == 0
  double lambda = 1.0;
  bool converged = false;
  std::size_t iterations = 0;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t d() const noexcept { return weights.cols(); }
};

struct LogRegOptions {
  double lambda = 1.0;
  double gradient_tolerance = 1e-6;  // on the infinity norm
  std::size_t max_iterations = 1000;
  std::size_t history = 10;          // L-BFGS memory
};

/// Mean cross-entropy of softmax(W x + b) plus (lambda / 2) * ||W||^2.
/// `grad`, when non-empty, receives the gradient in packed layout: W row-major
/// followed by biases 1..c-1.
double logreg_objective(const LogRegModel& model, const Matrix& x, std::span<const int> y,
                        std::span<double> grad = {});

/// Packs W and biases[1..] into one vector (and back).
std::vector<double> logreg_pack(const LogRegModel& model);
void logreg_unpack(std::span<const double> theta, LogRegModel& model);

/// Deterministic full-batch L-BFGS with a backtracking Armijo line search.
LogRegModel logreg_fit(const Matrix& x, std::span<const int> y, std::size_t classes,
                       const LogRegOptions& options = {});

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;  // n x c
};

/// Argmax of softmax scores, ties to the lower class index.
Prediction logreg_predict(const LogRegModel& model, const Matrix& x);

void save_logreg(const LogRegModel& model, ModelWriter& out);
LogRegModel load_logreg(const ModelReader& in);

}  // namespace latentbench
