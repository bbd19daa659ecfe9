#include "latentbench/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "latentbench/error.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/log.hpp"
#include "latentbench/rng.hpp"

namespace latentbench {

void orient_sign(std::span<double> v) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (!v.empty() && v[best] < 0)
    for (double& x : v) x = -x;
}

namespace {

void orient_columns(Matrix& vectors) {
  std::vector<double> col(vectors.rows());
  for (std::size_t c = 0; c < vectors.cols(); ++c) {
    for (std::size_t r = 0; r < vectors.rows(); ++r) col[r] = vectors(r, c);
    orient_sign(col);
    for (std::size_t r = 0; r < vectors.rows(); ++r) vectors(r, c) = col[r];
  }
}

double norm(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

}  // namespace

EigenPairs top_eigenpairs_dense(const Matrix& a, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(a.rows());
  if (a.rows() != a.cols()) throw std::invalid_argument("top_eigenpairs_dense: not square");
  d = std::min<std::size_t>(d, a.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      a.data(), n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed");
  EigenPairs out;
  out.vectors = Matrix(a.rows(), d);
  for (std::size_t i = 0; i < d; ++i) {
    const Eigen::Index src = n - 1 - static_cast<Eigen::Index>(i);
    out.values.push_back(solver.eigenvalues()(src));
    for (Eigen::Index r = 0; r < n; ++r)
      out.vectors(static_cast<std::size_t>(r), i) = solver.eigenvectors()(r, src);
  }
  orient_columns(out.vectors);
  return out;
}

EigenPairs top_eigenpairs_lanczos(const MatVec& op, std::size_t n, std::size_t d,
                                  const LanczosOptions& opt) {
  if (d == 0 || d > n) throw std::invalid_argument("top_eigenpairs_lanczos: bad d");
  const std::size_t usable = opt.deflate_constant ? n - 1 : n;
  d = std::min(d, usable);
  const std::size_t max_basis =
      std::min(usable, opt.max_basis ? opt.max_basis : std::max(6 * d, d + 200));

  Rng rng(opt.seed);
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;  // beta[j] couples basis[j] and basis[j+1]
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  auto orthogonalize = [&](std::vector<double>& w) {
    for (int pass = 0; pass < 2; ++pass) {
      if (opt.deflate_constant) {
        double mean = 0.0;
        for (double x : w) mean += x;
        mean /= static_cast<double>(n);
        for (double& x : w) x -= mean;
      }
      for (const auto& q : basis) kernels::axpy(-kernels::dot(q, w), q, w);
    }
  };
  auto fresh_start = [&]() {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0) * inv_sqrt_n;
    orthogonalize(v);
    const double nv = norm(v);
    for (double& x : v) x /= nv;
    return v;
  };

  std::vector<double> q = fresh_start();
  std::vector<double> w(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  std::size_t m = 0;
  bool converged = false;
  double worst = 0.0;
  while (true) {
    basis.push_back(q);
    op(q, w);
    const double a = kernels::dot(q, w);
    alpha.push_back(a);
    orthogonalize(w);
    const double b = norm(w);
    m = basis.size();

    const bool at_limit = m >= max_basis;
    const bool check = m >= d && (m % 10 == 0 || at_limit || b == 0.0);
    if (check) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) {
        t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
        if (i + 1 < m) {
          t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
          t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
        }
      }
      tri.compute(t);
      const auto& theta = tri.eigenvalues();
      const double scale = std::max(std::abs(theta(0)), std::abs(theta(static_cast<Eigen::Index>(m) - 1)));
      worst = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const Eigen::Index col = static_cast<Eigen::Index>(m - 1 - i);
        const double resid = std::abs(b * tri.eigenvectors()(static_cast<Eigen::Index>(m) - 1, col));
        worst = std::max(worst, resid / std::max(scale, 1e-300));
      }
      converged = worst <= opt.tolerance;
      log().debug("lanczos: {} steps, worst relative residual {:.3g}", m, worst);
      if (converged || at_limit) break;
    }
    if (at_limit) break;

    if (b <= 1e-14 * std::max(1.0, std::abs(a))) {
      // Invariant subspace; continue from a new direction orthogonal to it.
      beta.push_back(0.0);
      q = fresh_start();
    } else {
      beta.push_back(b);
      for (std::size_t i = 0; i < n; ++i) q[i] = w[i] / b;
    }
  }
  if (!converged)
    log().warn("lanczos: top-{} eigenpairs not converged after {} steps (relative residual {:.3g})",
               d, m, worst);

  EigenPairs out;
  out.iterations = m;
  out.vectors = Matrix(n, d);
  for (std::size_t i = 0; i < d; ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(m - 1 - i);
    out.values.push_back(tri.eigenvalues()(col));
    for (std::size_t j = 0; j < m; ++j) {
      const double s = tri.eigenvectors()(static_cast<Eigen::Index>(j), col);
      for (std::size_t r = 0; r < n; ++r) out.vectors(r, i) += s * basis[j][r];
    }
  }
  orient_columns(out.vectors);
  return out;
}

}  // namespace latentbench
