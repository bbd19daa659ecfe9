#include "latentbench/pca.hpp"

#include <algorithm>
#include <cmath>

#include "latentbench/error.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/linalg.hpp"

namespace latentbench {

namespace {

Matrix centered(const Matrix& rows, const std::vector<double>& mean) {
  Matrix c = rows;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto r = c.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= mean[j];
  }
  return c;
}

// Completes a row that came out degenerate (zero-variance direction) with the
// first standard basis vector orthogonal to the rows above it.
void complete_row(Matrix& comp, std::size_t i) {
  const std::size_t p = comp.cols();
  for (std::size_t e = 0; e < p; ++e) {
    std::vector<double> v(p, 0.0);
    v[e] = 1.0;
    for (std::size_t k = 0; k < i; ++k) kernels::axpy(-comp(k, e), comp.row(k), v);
    const double nv = std::sqrt(kernels::dot(v, v));
    if (nv > 1e-6) {
      for (std::size_t j = 0; j < p; ++j) comp(i, j) = v[j] / nv;
      return;
    }
  }
}

}  // namespace

PcaModel pca_fit(const Matrix& rows, std::size_t d, PcaSolver solver) {
  const std::size_t n = rows.rows(), p = rows.cols();
  if (n < 2) throw ConfigError("pca_fit needs at least 2 rows");
  if (d == 0 || d > std::min(n - 1, p))
    throw ConfigError("pca_fit: d=" + std::to_string(d) + " must be in [1, min(n-1, p)] = [1, " +
                      std::to_string(std::min(n - 1, p)) + "]");
  if (!all_finite(rows.values())) throw ConfigError("pca_fit: non-finite input");

  PcaModel model;
  model.mean.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) kernels::axpy(1.0, rows.row(i), model.mean);
  for (double& m : model.mean) m /= static_cast<double>(n);
  const Matrix xc = centered(rows, model.mean);
  const double denom = static_cast<double>(n - 1);

  if (solver == PcaSolver::automatic) solver = p <= n ? PcaSolver::covariance : PcaSolver::gram;
  model.components = Matrix(d, p);
  model.explained_variance.assign(d, 0.0);

  if (solver == PcaSolver::covariance) {
    const Matrix xt = xc.transposed();
    Matrix cov = multiply_transposed(xt, xt);
    for (double& v : cov.values()) v /= denom;
    const auto eig = top_eigenpairs_dense(cov, d);
    for (std::size_t i = 0; i < d; ++i) {
      model.explained_variance[i] = std::max(eig.values[i], 0.0);
      for (std::size_t j = 0; j < p; ++j) model.components(i, j) = eig.vectors(j, i);
    }
  } else {
    const Matrix gram = multiply_transposed(xc, xc);
    const auto eig = top_eigenpairs_dense(gram, d);
    const double floor = 1e-12 * std::max(eig.values.front(), 1e-300);
    for (std::size_t i = 0; i < d; ++i) {
      const double lambda = eig.values[i];
      model.explained_variance[i] = std::max(lambda, 0.0) / denom;
      if (lambda <= floor) {
        model.explained_variance[i] = 0.0;
        complete_row(model.components, i);
        continue;
      }
      auto comp = model.components.row(i);
      for (std::size_t r = 0; r < n; ++r) kernels::axpy(eig.vectors(r, i), xc.row(r), comp);
      const double nc = std::sqrt(kernels::dot(comp, comp));
      for (double& v : comp) v /= nc;
    }
  }
  for (std::size_t i = 0; i < d; ++i) orient_sign(model.components.row(i));
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& rows) {
  if (rows.cols() != model.p())
    throw ConfigError("pca_transform: rows have width " + std::to_string(rows.cols()) +
                      ", model expects " + std::to_string(model.p()));
  return multiply_transposed(centered(rows, model.mean), model.components);
}

Matrix pca_inverse_transform(const PcaModel& model, const Matrix& embedded) {
  if (embedded.cols() != model.d()) throw ConfigError("pca_inverse_transform: width mismatch");
  Matrix out = multiply(embedded, model.components);
  for (std::size_t i = 0; i < out.rows(); ++i) kernels::axpy(1.0, model.mean, out.row(i));
  return out;
}

void save_pca(const PcaModel& model, ModelWriter& out) {
  out.vector("MEAN", model.mean);
  out.matrix("COMP", model.components);
  out.vector("EVAR", model.explained_variance);
}

PcaModel load_pca(const ModelReader& in) {
  in.expect(ModelKind::pca);
  PcaModel m{in.vector("MEAN"), in.matrix("COMP"), in.vector("EVAR")};
  if (m.components.cols() != m.mean.size() || m.explained_variance.size() != m.components.rows())
    throw DataError("pca model: inconsistent section shapes");
  return m;
}

}  // namespace latentbench
