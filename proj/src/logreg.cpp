#include "latentbench/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "latentbench/error.hpp"
#include "latentbench/kernels.hpp"

namespace latentbench {

namespace {

void check_inputs(const Matrix& x, std::span<const int> y, std::size_t classes) {
  if (x.rows() == 0) throw ConfigError("logreg: no training rows");
  if (y.size() != x.rows()) throw ConfigError("logreg: label count does not match rows");
  if (classes < 2) throw ConfigError("logreg: need at least 2 classes");
  if (!all_finite(x.values())) throw ConfigError("logreg: non-finite input");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw ConfigError("logreg: label " + std::to_string(v) + " outside [0, " +
                        std::to_string(classes) + ")");
}

// Row-wise softmax in place; returns log-sum-exp per row.
void softmax_rows(Matrix& scores, std::vector<double>& lse) {
  lse.resize(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto r = scores.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : r) v /= s;
    lse[i] = mx + std::log(s);
  }
}

Matrix scores_of(const LogRegModel& m, const Matrix& x) {
  Matrix s = multiply_transposed(x, m.weights);
  for (std::size_t i = 0; i < s.rows(); ++i) kernels::axpy(1.0, m.biases, s.row(i));
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) { return kernels::dot(a, b); }

}  // namespace

std::vector<double> logreg_pack(const LogRegModel& m) {
  std::vector<double> theta(m.weights.values().begin(), m.weights.values().end());
  theta.insert(theta.end(), m.biases.begin() + 1, m.biases.end());
  return theta;
}

void logreg_unpack(std::span<const double> theta, LogRegModel& m) {
  const std::size_t nw = m.weights.size();
  std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(nw), m.weights.data());
  m.biases[0] = 0.0;
  std::copy(theta.begin() + static_cast<std::ptrdiff_t>(nw), theta.end(), m.biases.begin() + 1);
}

double logreg_objective(const LogRegModel& m, const Matrix& x, std::span<const int> y,
                        std::span<double> grad) {
  const std::size_t n = x.rows(), c = m.classes(), d = m.d();
  Matrix prob = scores_of(m, x);
  std::vector<double> raw(prob.values().begin(), prob.values().end());
  std::vector<double> lse;
  softmax_rows(prob, lse);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += lse[i] - raw[i * c + static_cast<std::size_t>(y[i])];
  const double inv_n = 1.0 / static_cast<double>(n);
  const double penalty = 0.5 * m.lambda * dot(m.weights.values(), m.weights.values());
  if (!grad.empty()) {
    // residual = (p - onehot) / n, gradW = residual^T x + lambda W
    for (std::size_t i = 0; i < n; ++i) {
      auto r = prob.row(i);
      r[static_cast<std::size_t>(y[i])] -= 1.0;
      for (double& v : r) v *= inv_n;
    }
    const Matrix rt = prob.transposed();  // c x n
    kernels::gemm_nn(rt.data(), x.data(), grad.data(), c, d, n);
    for (std::size_t i = 0; i < c * d; ++i) grad[i] += m.lambda * m.weights.data()[i];
    for (std::size_t k = 1; k < c; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += rt(k, i);
      grad[c * d + k - 1] = s;
    }
  }
  return loss * inv_n + penalty;
}

LogRegModel logreg_fit(const Matrix& x, std::span<const int> y, std::size_t classes,
                       const LogRegOptions& opt) {
  check_inputs(x, y, classes);
  if (!(opt.lambda > 0.0)) throw ConfigError("logreg: lambda must be positive");
  LogRegModel m;
  m.weights = Matrix(classes, x.cols());
  m.biases.assign(classes, 0.0);
  m.lambda = opt.lambda;

  std::vector<double> theta = logreg_pack(m);
  const std::size_t dim = theta.size();
  std::vector<double> g(dim), g_new(dim), dir(dim), trial(dim);
  auto eval = [&](std::span<const double> th, std::span<double> gr) {
    logreg_unpack(th, m);
    return logreg_objective(m, x, y, gr);
  };
  auto inf_norm = [](std::span<const double> v) {
    double r = 0.0;
    for (double e : v) r = std::max(r, std::abs(e));
    return r;
  };

  double f = eval(theta, g);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::size_t it = 0;
  bool converged = inf_norm(g) < opt.gradient_tolerance;
  while (!converged && it < opt.max_iterations) {
    ++it;
    // Two-loop recursion for dir = -H g.
    dir = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      kernels::axpy(-alpha[k], y_hist[k], dir);
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      kernels::axpy(alpha[k] - beta, s_hist[k], dir);
    }
    for (double& v : dir) v = -v;
    double slope = dot(g, dir);
    if (slope >= 0.0) {  // not a descent direction; restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -g[i];
      slope = dot(g, dir);
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(inf_norm(g), 1e-12)) : 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i) trial[i] = theta[i] + step * dir[i];
      f_new = eval(trial, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no progress possible at double precision

    std::vector<double> s(dim), yv(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = trial[i] - theta[i];
      yv[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(yv, yv))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta = trial;
    g = g_new;
    f = f_new;
    converged = inf_norm(g) < opt.gradient_tolerance;
  }
  logreg_unpack(theta, m);
  m.converged = converged;
  m.iterations = it;
  if (!all_finite(m.weights.values()) || !all_finite(m.biases))
    throw NumericError("logreg: non-finite parameters after fitting");
  return m;
}

Prediction logreg_predict(const LogRegModel& m, const Matrix& x) {
  if (x.cols() != m.d())
    throw ConfigError("logreg_predict: rows have width " + std::to_string(x.cols()) +
                      ", model expects " + std::to_string(m.d()));
  Prediction p;
  p.probabilities = scores_of(m, x);
  std::vector<double> lse;
  softmax_rows(p.probabilities, lse);
  p.labels.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = p.probabilities.row(i);
    p.labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return p;
}

void save_logreg(const LogRegModel& m, ModelWriter& out) {
  out.matrix("WGHT", m.weights);
  out.vector("BIAS", m.biases);
  out.vector("SCAL", std::vector<double>{m.lambda, m.converged ? 1.0 : 0.0,
                                         static_cast<double>(m.iterations)});
}

LogRegModel load_logreg(const ModelReader& in) {
  in.expect(ModelKind::logreg);
  LogRegModel m;
  m.weights = in.matrix("WGHT");
  m.biases = in.vector("BIAS");
  const auto s = in.vector("SCAL");
  if (s.size() != 3 || m.biases.size() != m.weights.rows())
    throw DataError("logreg model: inconsistent sections");
  m.lambda = s[0];
  m.converged = s[1] != 0.0;
  m.iterations = static_cast<std::size_t>(s[2]);
  return m;
}

}  // namespace latentbench
