#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "latentbench/error.hpp"
#include "latentbench/pca.hpp"
#include "latentbench/rng.hpp"

using namespace latentbench;

namespace {

Matrix random_rows(Rng& rng, std::size_t n, std::size_t p) {
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x(i, j) = (1.0 + 0.5 * static_cast<double>(j)) * rng.normal() + 0.3 * j;
  return x;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

std::vector<double> column_variances(const Matrix& x) {
  std::vector<double> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, j);
    m /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[j] += (x(i, j) - m) * (x(i, j) - m);
    out[j] /= static_cast<double>(x.rows() - 1);
  }
  return out;
}

Eigen::MatrixXd projector(const PcaModel& m) {
  const Eigen::MatrixXd c = to_eigen(m.components);
  return c.transpose() * c;
}

}  // namespace

TEST_CASE("variance only along x gives component (1, 0) and variance 10/3") {
  const Matrix x = Matrix::from_rows({{-2, 0}, {-1, 0}, {1, 0}, {2, 0}});
  const PcaModel m = pca_fit(x, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0));
  CHECK(m.components(0, 1) == doctest::Approx(0.0));
  CHECK(m.explained_variance[0] == doctest::Approx(10.0 / 3.0));
}

TEST_CASE("isotropic data has unit explained variances") {
  Rng rng(1);
  Matrix x(10000, 2);
  for (double& v : x.values()) v = rng.normal();
  const PcaModel m = pca_fit(x, 2);
  CHECK(std::abs(m.explained_variance[0] - 1.0) < 0.05);
  CHECK(std::abs(m.explained_variance[1] - 1.0) < 0.05);
}

TEST_CASE("full rank PCA preserves the trace") {
  Rng rng(2);
  const Matrix x = random_rows(rng, 60, 7);
  const PcaModel m = pca_fit(x, 7);
  double total = 0.0, explained = 0.0;
  for (double v : column_variances(x)) total += v;
  for (double v : m.explained_variance) explained += v;
  CHECK(std::abs(total - explained) < 1e-8);
}

TEST_CASE("transform of the mean is zero and d = p round trips") {
  Rng rng(3);
  const Matrix x = random_rows(rng, 40, 6);
  const PcaModel m = pca_fit(x, 6);
  const Matrix mean_row(1, 6, m.mean);
  const Matrix at_mean = pca_transform(m, mean_row);
  for (double v : at_mean.values()) CHECK(std::abs(v) < 1e-12);
  const Matrix back = pca_inverse_transform(m, pca_transform(m, x));
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(back.values()[k] - x.values()[k]) < 1e-8);
}

TEST_CASE("embedded training data is decorrelated with variances matching the model") {
  Rng rng(4);
  const Matrix x = random_rows(rng, 200, 8);
  const PcaModel m = pca_fit(x, 5);
  const Eigen::MatrixXd y = to_eigen(pca_transform(m, x));
  const Eigen::MatrixXd centered = y.rowwise() - y.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(y.rows() - 1);
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      if (i == j)
        CHECK(std::abs(cov(i, i) - m.explained_variance[static_cast<std::size_t>(i)]) < 1e-8);
      else
        CHECK(std::abs(cov(i, j)) < 1e-6);
    }
}

TEST_CASE("components are orthonormal, sorted and sign-fixed across 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n = 20 + rng.index(60), p = 2 + rng.index(12);
    const Matrix x = random_rows(rng, n, p);
    const std::size_t d = 1 + rng.index(std::min(n - 1, p));
    const PcaModel m = pca_fit(x, d);
    const Eigen::MatrixXd c = to_eigen(m.components);
    CHECK((c * c.transpose() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t i = 1; i < d; ++i) CHECK(m.explained_variance[i] <= m.explained_variance[i - 1]);
    for (double v : m.explained_variance) CHECK(v >= 0.0);
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      Eigen::Index at = 0;
      c.row(r).cwiseAbs().maxCoeff(&at);
      CHECK(c(r, at) > 0.0);
    }
  }
}

TEST_CASE("covariance and Gram solvers agree") {
  Rng rng(5);
  const Matrix x = random_rows(rng, 30, 12);
  const PcaModel a = pca_fit(x, 6, PcaSolver::covariance);
  const PcaModel b = pca_fit(x, 6, PcaSolver::gram);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::abs(a.explained_variance[i] - b.explained_variance[i]) < 1e-8);
  CHECK((projector(a) - projector(b)).cwiseAbs().maxCoeff() < 1e-8);
  for (std::size_t k = 0; k < a.components.size(); ++k)
    CHECK(std::abs(a.components.values()[k] - b.components.values()[k]) < 1e-8);
}

TEST_CASE("fitting on rotated data rotates the projector") {
  Rng rng(6);
  const Matrix x = random_rows(rng, 100, 5);
  Eigen::MatrixXd g(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) g(i, j) = rng.normal();
  const Eigen::MatrixXd r = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const PcaModel base = pca_fit(x, 3);
  const PcaModel rotated = pca_fit(from_eigen(to_eigen(x) * r), 3);
  const Eigen::MatrixXd expected = r.transpose() * projector(base) * r;
  CHECK((projector(rotated) - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pca errors and persistence") {
  Rng rng(7);
  const Matrix x = random_rows(rng, 5, 3);
  CHECK_THROWS_AS(pca_fit(x, 4), ConfigError);
  CHECK_THROWS_AS(pca_fit(x, 0), ConfigError);
  CHECK_THROWS_AS(pca_fit(Matrix(1, 3), 1), ConfigError);
  const PcaModel m = pca_fit(x, 2);
  CHECK_THROWS_AS(pca_transform(m, Matrix(2, 4)), ConfigError);

  ModelWriter w(ModelKind::pca, m.p(), m.d());
  save_pca(m, w);
  const PcaModel back = load_pca(ModelReader::from_bytes(w.bytes()));
  CHECK(back.mean == m.mean);
  CHECK(back.components == m.components);
  CHECK(back.explained_variance == m.explained_variance);
}
