#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "latentbench/error.hpp"
#include "latentbench/isomap.hpp"
#include "latentbench/pca.hpp"
#include "latentbench/rng.hpp"

using namespace latentbench;

namespace {

Matrix random_points(Rng& rng, std::size_t n, std::size_t p, double spread = 1.0) {
  Matrix x(n, p);
  for (double& v : x.values()) v = spread * rng.normal();
  return x;
}

double euclid(const Matrix& x, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) s += (x(a, j) - x(b, j)) * (x(a, j) - x(b, j));
  return std::sqrt(s);
}

Matrix pairwise(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j) d(i, j) = euclid(x, i, j);
  return d;
}

Matrix floyd_warshall(const NeighborGraph& g) {
  const std::size_t m = g.size();
  Matrix d(m, m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) {
    d(i, i) = 0.0;
    for (const auto& e : g.adjacency[i]) d(i, e.to) = std::min(d(i, e.to), e.weight);
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

bool has_edge(const NeighborGraph& g, std::size_t a, std::size_t b) {
  return std::any_of(g.adjacency[a].begin(), g.adjacency[a].end(),
                     [b](const GraphEdge& e) { return e.to == b; });
}

// Points along a planar spiral; `offset` shifts them along the curve.
Matrix spiral(std::size_t n, double offset) {
  Matrix x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) + offset) / static_cast<double>(n);
    const double theta = std::numbers::pi * (1.5 + 3.0 * t);
    x(i, 0) = theta * std::cos(theta);
    x(i, 1) = theta * std::sin(theta);
  }
  return x;
}

double distance_residual(const Matrix& reference, const Matrix& embedded_distances) {
  // 1 - r^2 between the upper triangles.
  std::vector<double> a, b;
  for (std::size_t i = 0; i < reference.rows(); ++i)
    for (std::size_t j = i + 1; j < reference.cols(); ++j) {
      a.push_back(reference(i, j));
      b.push_back(embedded_distances(i, j));
    }
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return 1.0 - sab * sab / (saa * sbb);
}

}  // namespace

TEST_CASE("unit square corners with k=2 connect along the sides") {
  const Matrix x = Matrix::from_rows({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const NeighborGraph g = knn_graph(x, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(g.adjacency[i].size() == 2);
    CHECK(has_edge(g, i, (i + 1) % 4));
    CHECK(has_edge(g, i, (i + 3) % 4));
  }
  const Matrix d = geodesic_distances(g);
  CHECK(d(0, 2) == 2.0);
  CHECK(d(1, 3) == 2.0);
  CHECK(g.augmented_edges == 0);
}

TEST_CASE("two distant clusters are joined by one bridging edge") {
  const Matrix x = Matrix::from_rows({{0, 0}, {1, 0}, {100, 0}, {101, 0}});
  const NeighborGraph g = knn_graph(x, 1);
  CHECK(g.augmented_edges == 1);
  CHECK(g.component_count() == 1);
  CHECK(has_edge(g, 1, 2));
  CHECK(geodesic_distances(g)(0, 3) == 101.0);
}

TEST_CASE("path graph geodesic") {
  NeighborGraph g;
  g.adjacency.resize(3);
  g.add_edge(0, 1, 1.0);
  g.add_edge(1, 2, 1.0);
  CHECK(geodesic_distances(g)(0, 2) == 2.0);
}

TEST_CASE("knn graph degree, weights and tie rule") {
  Rng rng(1);
  const Matrix x = random_points(rng, 50, 3);
  const NeighborGraph g = knn_graph(x, 5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.adjacency[i].size() >= 5);
    for (const auto& e : g.adjacency[i]) {
      CHECK(e.weight == doctest::Approx(euclid(x, i, e.to)).epsilon(1e-12));
      CHECK(has_edge(g, e.to, i));
    }
    for (std::size_t j = 1; j < g.adjacency[i].size(); ++j)
      CHECK(g.adjacency[i][j - 1].to < g.adjacency[i][j].to);
  }
  // Point 0 is equidistant from 1 and 2; with k=1 the lower index wins.
  const Matrix tie = Matrix::from_rows({{0, 0}, {1, 0}, {-1, 0}, {5, 5}});
  const NeighborGraph gt = knn_graph(tie, 1);
  CHECK(has_edge(gt, 0, 1));
  CHECK_THROWS_AS(knn_graph(tie, 4), ConfigError);
}

TEST_CASE("geodesics equal a Floyd-Warshall oracle") {
  SUBCASE("exactly on integer-weight graphs") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t m = 2 + rng.index(59);
      NeighborGraph g;
      g.adjacency.resize(m);
      for (std::size_t i = 1; i < m; ++i) g.add_edge(i, rng.index(i), 1.0 + rng.index(9));
      for (std::size_t e = 0; e < m; ++e) {
        const std::size_t a = rng.index(m), b = rng.index(m);
        if (a != b) g.add_edge(a, b, 1.0 + rng.index(9));
      }
      CHECK(geodesic_distances(g) == floyd_warshall(g));
    }
  }
  SUBCASE("to rounding on kNN graphs of random points") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t m = 8 + rng.index(53);
      const NeighborGraph g = knn_graph(random_points(rng, m, 4), 5);
      const Matrix a = geodesic_distances(g), b = floyd_warshall(g);
      for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(std::abs(a.values()[k] - b.values()[k]) <= 1e-12 * (1.0 + b.values()[k]));
    }
  }
}

TEST_CASE("geodesics dominate Euclidean distances and form a metric") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 10 + rng.index(40);
    const Matrix x = random_points(rng, m, 2 + rng.index(4));
    const Matrix d = geodesic_distances(knn_graph(x, 5));
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(d(i, j) == d(j, i));
        CHECK(d(i, j) >= euclid(x, i, j) * (1.0 - 1e-12));
      }
    }
    for (int t = 0; t < 100; ++t) {
      const std::size_t a = rng.index(m), b = rng.index(m), c = rng.index(m);
      CHECK(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
    }
  }
}

TEST_CASE("disconnected graph is a numeric error") {
  NeighborGraph g;
  g.adjacency.resize(3);
  g.add_edge(0, 1, 1.0);
  CHECK_THROWS_AS(geodesic_distances(g), NumericError);
}

TEST_CASE("classical MDS recovers collinear points 0, 3, 4") {
  const Matrix d = Matrix::from_rows({{0, 3, 4}, {3, 0, 1}, {4, 1, 0}});
  const MdsResult r = classical_mds(d, 1);
  REQUIRE(r.retained == 1);
  const double sign = r.embedding(0, 0) < 0 ? 1.0 : -1.0;
  CHECK(sign * r.embedding(0, 0) == doctest::Approx(-7.0 / 3.0));
  CHECK(sign * r.embedding(1, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(sign * r.embedding(2, 0) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("classical MDS reproduces Euclidean distance matrices") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 5 + rng.index(40), dim = 1 + rng.index(4);
    const Matrix x = random_points(rng, m, dim, 3.0);
    const MdsResult r = classical_mds(pairwise(x), dim);
    CHECK(r.retained == dim);
    const Matrix back = pairwise(r.embedding);
    const Matrix orig = pairwise(x);
    for (std::size_t k = 0; k < back.size(); ++k)
      CHECK(std::abs(back.values()[k] - orig.values()[k]) < 1e-8);
  }
}

TEST_CASE("classical MDS of identical points is all zero with a deficit") {
  const MdsResult r = classical_mds(Matrix(4, 4), 2);
  for (double v : r.eigenvalues) CHECK(v == 0.0);
  CHECK(r.retained == 0);
  CHECK(r.deficit == 2);
  for (double v : r.embedding.values()) CHECK(v == 0.0);
}

TEST_CASE("Lanczos and dense solvers agree on a geodesic matrix") {
  Rng rng(6);
  const Matrix d = geodesic_distances(knn_graph(random_points(rng, 300, 5), 5));
  const MdsResult dense = classical_mds(d, 10, EigenSolver::dense);
  const MdsResult lanczos = classical_mds(d, 10, EigenSolver::lanczos);
  REQUIRE(dense.retained == lanczos.retained);
  for (std::size_t i = 0; i < dense.retained; ++i)
    CHECK(std::abs(dense.eigenvalues[i] - lanczos.eigenvalues[i]) < 1e-8 * dense.eigenvalues[0]);
  for (std::size_t k = 0; k < dense.embedding.size(); ++k)
    CHECK(std::abs(dense.embedding.values()[k] - lanczos.embedding.values()[k]) < 1e-6);
}

TEST_CASE("embedding distance error shrinks as d grows") {
  Rng rng(7);
  const Matrix x = random_points(rng, 120, 12);
  const IsomapModel full = isomap_fit(x, 10);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t d : {2u, 5u, 10u}) {
    const IsomapModel m = isomap_fit(x, d);
    const Matrix e = pairwise(m.embedding);
    double err = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double diff = e.values()[k] - full.geodesics.values()[k];
      err += diff * diff;
    }
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("Isomap unrolls a spiral better than PCA") {
  const Matrix x = spiral(500, 0.0);
  const IsomapModel iso = isomap_fit(x, 2);
  const PcaModel pca = pca_fit(x, 2);
  const double iso_res = distance_residual(iso.geodesics, pairwise(iso.embedding));
  const double pca_res = distance_residual(iso.geodesics, pairwise(pca_transform(pca, x)));
  CHECK(iso_res < pca_res);
  CHECK(iso_res < 0.05);
}

TEST_CASE("Nystrom transform reproduces training rows and places held-out rows locally") {
  Rng rng(10);
  const Matrix cloud = random_points(rng, 200, 4);
  const IsomapModel mc = isomap_fit(cloud, 4);
  const Matrix self_cloud = isomap_transform(mc, cloud);
  for (std::size_t k = 0; k < self_cloud.size(); ++k)
    CHECK(std::abs(self_cloud.values()[k] - mc.embedding.values()[k]) < 1e-6);

  // The spiral is one-dimensional; its second eigenvalue is tiny, so the
  // self-consistency check uses the leading coordinate only.
  const Matrix train = spiral(500, 0.0);
  const IsomapModel m = isomap_fit(train, 2);
  const Matrix self = isomap_transform(m, train);
  for (std::size_t i = 0; i < self.rows(); ++i)
    CHECK(std::abs(self(i, 0) - m.embedding(i, 0)) < 1e-6);

  const Matrix held = spiral(50, 0.37);
  const Matrix y = isomap_transform(m, held);
  double total = 0.0;
  for (std::size_t i = 0; i < held.rows(); ++i) {
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < train.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < 2; ++c) s += (held(i, c) - train(j, c)) * (held(i, c) - train(j, c));
      if (s < best) best = s, nearest = j;
    }
    double s = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c)
      s += (y(i, c) - m.embedding(nearest, c)) * (y(i, c) - m.embedding(nearest, c));
    total += std::sqrt(s);
  }
  CHECK(total / static_cast<double>(held.rows()) < 2.0 * std::numbers::pi);
  CHECK_THROWS_AS(isomap_transform(m, Matrix(1, 3)), ConfigError);
}

TEST_CASE("duplicate rows fit and duplicate queries embed alike") {
  Rng rng(8);
  Matrix x = random_points(rng, 40, 3);
  for (std::size_t j = 0; j < 3; ++j) x(1, j) = x(0, j);
  const IsomapModel m = isomap_fit(x, 3);
  CHECK(m.geodesics(0, 1) == 0.0);
  const Matrix q = isomap_transform(m, x.select_rows(std::vector<std::size_t>{0, 1}));
  for (std::size_t c = 0; c < q.cols(); ++c) {
    CHECK(std::abs(q(0, c) - q(1, c)) < 1e-6);
    CHECK(std::abs(q(0, c) - m.embedding(0, c)) < 1e-6);
  }
}

TEST_CASE("isomap fit is deterministic, guarded and persists") {
  Rng rng(9);
  const Matrix x = random_points(rng, 60, 4);
  const IsomapModel a = isomap_fit(x, 3), b = isomap_fit(x, 3);
  CHECK(a.embedding == b.embedding);
  CHECK(a.eigenvalues == b.eigenvalues);

  IsomapOptions tight;
  tight.max_geodesic_bytes = 1000;
  CHECK_THROWS_AS(isomap_fit(x, 3, tight), ConfigError);

  ModelWriter w(ModelKind::isomap, a.p(), a.d());
  save_isomap(a, w);
  const IsomapModel back = load_isomap(ModelReader::from_bytes(w.bytes()));
  CHECK(isomap_transform(back, x) == isomap_transform(a, x));
}
