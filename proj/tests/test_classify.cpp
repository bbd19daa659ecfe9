#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "latentbench/classify.hpp"
#include "latentbench/error.hpp"
#include "latentbench/rng.hpp"

using namespace latentbench;

namespace {

struct Problem {
  Matrix x;
  std::vector<int> y;
};

Problem blobs(Rng& rng, std::size_t n, std::size_t d, int classes, double spread) {
  Problem p{Matrix(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
    for (std::size_t j = 0; j < d; ++j)
      p.x(i, j) = (j == static_cast<std::size_t>(c) % d ? 2.0 : 0.0) + spread * rng.normal();
    p.y.push_back(c);
  }
  return p;
}

Problem xor_clusters(Rng& rng, std::size_t n) {
  Problem p{Matrix(n, 2), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i % 2 == 0) ? 1.0 : -1.0;
    const double b = ((i / 2) % 2 == 0) ? 1.0 : -1.0;
    p.x(i, 0) = a + 0.1 * rng.normal();
    p.x(i, 1) = b + 0.1 * rng.normal();
    p.y.push_back(a * b > 0 ? 1 : 0);
  }
  return p;
}

double weight_norm(const LogRegModel& m) {
  double s = 0.0;
  for (double v : m.weights.values()) s += v * v;
  return std::sqrt(s);
}

LogRegModel random_model(Rng& rng, std::size_t c, std::size_t d, double scale) {
  LogRegModel m;
  m.weights = Matrix(c, d);
  for (double& v : m.weights.values()) v = scale * rng.normal();
  m.biases.assign(c, 0.0);
  for (std::size_t k = 1; k < c; ++k) m.biases[k] = scale * rng.normal();
  return m;
}

// Internal consistency of one fitted tree.
void check_tree_shape(const DecisionTree& tree) {
  REQUIRE(!tree.nodes.empty());
  CHECK(tree.depth() <= tree.nodes.size());
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) {
      CHECK(std::accumulate(node.histogram.begin(), node.histogram.end(), 0.0) > 0.0);
    } else {
      CHECK(node.left > 0);
      CHECK(node.right > 0);
      CHECK(static_cast<std::size_t>(node.left) < tree.nodes.size());
      CHECK(static_cast<std::size_t>(node.right) < tree.nodes.size());
    }
  }
}

}  // namespace

TEST_CASE("accuracy examples and errors") {
  const std::vector<int> a{0, 1, 1, 0}, b{0, 1, 0, 1}, c{1, 0, 0, 1};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(a, c) == 0.0);
  CHECK(accuracy(a, b) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ConfigError);
  CHECK_THROWS_AS(accuracy(a, std::vector<int>{0}), ConfigError);
}

TEST_CASE("symmetric 1-D problem puts the boundary at zero") {
  const Matrix x = Matrix::from_rows({{-1.0}, {1.0}});
  const std::vector<int> y{0, 1};
  LogRegOptions opt;
  opt.lambda = 1.0;
  const LogRegModel m = logreg_fit(x, y, 2, opt);
  CHECK(m.converged);
  const Prediction at_zero = logreg_predict(m, Matrix::from_rows({{0.0}}));
  CHECK(at_zero.probabilities(0, 1) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(logreg_predict(m, Matrix::from_rows({{2.0}})).labels == std::vector<int>{1});
  CHECK(logreg_predict(m, x).labels == y);
}

TEST_CASE("a single observed class is predicted with high confidence") {
  Rng rng(1);
  Matrix x(30, 3);
  for (double& v : x.values()) v = rng.normal();
  const std::vector<int> y(30, 2);
  const LogRegModel m = logreg_fit(x, y, 3);
  const Prediction p = logreg_predict(m, x);
  for (std::size_t i = 0; i < 30; ++i) CHECK(p.probabilities(i, 2) > 0.99);
}

TEST_CASE("logistic objective gradient matches finite differences") {
  Rng rng(2);
  const Problem prob = blobs(rng, 60, 4, 3, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    LogRegModel m = random_model(rng, 3, 4, 0.5);
    m.lambda = 0.3;
    std::vector<double> theta = logreg_pack(m);
    std::vector<double> grad(theta.size());
    logreg_objective(m, prob.x, prob.y, grad);
    const double h = 1e-6;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      std::vector<double> up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      LogRegModel mu = m, md = m;
      logreg_unpack(up, mu);
      logreg_unpack(down, md);
      const double numeric =
          (logreg_objective(mu, prob.x, prob.y) - logreg_objective(md, prob.x, prob.y)) / (2.0 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grad[k]), 1e-3});
      CHECK(std::abs(numeric - grad[k]) / scale < 1e-5);
    }
  }
}

TEST_CASE("fitted loss beats 1000 random parameter draws") {
  Rng rng(3);
  const Problem prob = blobs(rng, 60, 4, 3, 1.0);
  LogRegOptions opt;
  opt.lambda = 0.1;
  const LogRegModel fit = logreg_fit(prob.x, prob.y, 3, opt);
  CHECK(fit.converged);
  const double best = logreg_objective(fit, prob.x, prob.y);
  for (int draw = 0; draw < 1000; ++draw) {
    LogRegModel m = random_model(rng, 3, 4, 1.0);
    m.lambda = opt.lambda;
    CHECK(best <= logreg_objective(m, prob.x, prob.y));
  }
}

TEST_CASE("logistic loss is convex along random segments") {
  Rng rng(4);
  const Problem prob = blobs(rng, 40, 3, 3, 1.0);
  for (int pair = 0; pair < 100; ++pair) {
    LogRegModel a = random_model(rng, 3, 3, 2.0), b = random_model(rng, 3, 3, 2.0);
    a.lambda = b.lambda = 0.5;
    const auto ta = logreg_pack(a), tb = logreg_pack(b);
    std::vector<double> mid(ta.size());
    for (std::size_t k = 0; k < mid.size(); ++k) mid[k] = 0.5 * (ta[k] + tb[k]);
    LogRegModel m = a;
    logreg_unpack(mid, m);
    const double fa = logreg_objective(a, prob.x, prob.y), fb = logreg_objective(b, prob.x, prob.y);
    CHECK(logreg_objective(m, prob.x, prob.y) <= 0.5 * (fa + fb) + 1e-12);
  }
}

TEST_CASE("larger lambda never grows the weight norm") {
  Rng rng(5);
  const Problem prob = blobs(rng, 80, 5, 4, 1.5);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.01, 1.0, 100.0}) {
    LogRegOptions opt;
    opt.lambda = lambda;
    const double norm = weight_norm(logreg_fit(prob.x, prob.y, 4, opt));
    CHECK(norm <= previous);
    previous = norm;
  }
}

TEST_CASE("zero model ties to class 0 and argmax is scale invariant") {
  LogRegModel zero;
  zero.weights = Matrix(4, 3);
  zero.biases.assign(4, 0.0);
  const Matrix x = Matrix::from_rows({{1, 2, 3}, {-1, 0, 4}});
  const Prediction p = logreg_predict(zero, x);
  CHECK(p.labels == std::vector<int>{0, 0});
  for (double v : p.probabilities.values()) CHECK(v == doctest::Approx(0.25));

  Rng rng(6);
  const Problem prob = blobs(rng, 50, 3, 3, 1.0);
  const LogRegModel m = logreg_fit(prob.x, prob.y, 3);
  LogRegModel scaled = m;
  for (double& v : scaled.weights.values()) v *= 3.5;
  for (double& v : scaled.biases) v *= 3.5;
  const Prediction a = logreg_predict(m, prob.x), b = logreg_predict(scaled, prob.x);
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < prob.x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += a.probabilities(i, c);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(logreg_predict(m, Matrix(1, 2)), ConfigError);
}

TEST_CASE("logistic regression rejects bad input and persists") {
  Matrix x = Matrix::from_rows({{0.0}, {1.0}});
  CHECK_THROWS_AS(logreg_fit(x, std::vector<int>{0, 2}, 2), ConfigError);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(logreg_fit(x, std::vector<int>{0, 1}, 2), ConfigError);

  Rng rng(7);
  const Problem prob = blobs(rng, 30, 3, 3, 1.0);
  const LogRegModel m = logreg_fit(prob.x, prob.y, 3);
  ModelWriter w(ModelKind::logreg, m.d(), m.classes());
  save_logreg(m, w);
  const LogRegModel back = load_logreg(ModelReader::from_bytes(w.bytes()));
  CHECK(back.weights == m.weights);
  CHECK(back.biases == m.biases);
  CHECK(back.lambda == m.lambda);
}

TEST_CASE("Gini impurity closed forms") {
  CHECK(gini_impurity(std::vector<double>{5, 5}) == doctest::Approx(0.5));
  CHECK(gini_impurity(std::vector<double>{10, 0}) == 0.0);
  CHECK(gini_impurity(std::vector<double>{1, 1, 1, 1}) == doctest::Approx(0.75));
}

TEST_CASE("one unbootstrapped tree shatters distinct points") {
  Rng rng(8);
  Matrix x(8, 2);
  for (double& v : x.values()) v = rng.normal();
  std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 7};
  ForestConfig cfg;
  cfg.trees = 1;
  cfg.bootstrap = false;
  const ForestModel f = forest_fit(x, y, 8, cfg);
  CHECK(forest_predict(f, x) == y);
  check_tree_shape(f.trees[0]);
}

TEST_CASE("forest solves XOR where logistic regression cannot") {
  Rng rng(9);
  const Problem train = xor_clusters(rng, 100), test = xor_clusters(rng, 200);
  ForestConfig cfg;
  cfg.seed = 3;
  const ForestModel f = forest_fit(train.x, train.y, 2, cfg);
  CHECK(accuracy(forest_predict(f, test.x), test.y) > 0.9);
  CHECK(accuracy(forest_predict(f, train.x), train.y) >= 0.95);
  const LogRegModel lr = logreg_fit(train.x, train.y, 2);
  const double lr_acc = accuracy(logreg_predict(lr, test.x).labels, test.y);
  CHECK(lr_acc > 0.3);
  CHECK(lr_acc < 0.7);
  for (const auto& tree : f.trees) check_tree_shape(tree);
}

TEST_CASE("forest votes, determinism and persistence") {
  Rng rng(10);
  const Problem prob = blobs(rng, 120, 4, 3, 1.2);
  ForestConfig one;
  one.trees = 1;
  one.seed = 4;
  const ForestModel single = forest_fit(prob.x, prob.y, 3, one);
  std::vector<int> by_tree;
  for (std::size_t i = 0; i < prob.x.rows(); ++i) by_tree.push_back(single.trees[0].predict(prob.x.row(i)));
  CHECK(forest_predict(single, prob.x) == by_tree);

  ForestConfig same;
  same.trees = 7;
  same.bootstrap = false;
  same.max_features = MaxFeatures::all;
  const ForestModel identical = forest_fit(prob.x, prob.y, 3, same);
  for (const auto& tree : identical.trees) CHECK(tree == identical.trees[0]);
  std::vector<int> first;
  for (std::size_t i = 0; i < prob.x.rows(); ++i) first.push_back(identical.trees[0].predict(prob.x.row(i)));
  CHECK(forest_predict(identical, prob.x) == first);

  ForestConfig cfg;
  cfg.trees = 20;
  cfg.seed = 11;
  const ForestModel a = forest_fit(prob.x, prob.y, 3, cfg), b = forest_fit(prob.x, prob.y, 3, cfg);
  CHECK(a.trees == b.trees);
  cfg.seed = 12;
  CHECK(forest_fit(prob.x, prob.y, 3, cfg).trees != a.trees);

  ModelWriter w(ModelKind::forest, a.d, a.classes);
  save_forest(a, w);
  const ForestModel back = load_forest(ModelReader::from_bytes(w.bytes()));
  CHECK(back.trees == a.trees);
  CHECK(forest_predict(back, prob.x) == forest_predict(a, prob.x));
  CHECK(!dump_trees(a).empty());
  CHECK_THROWS_AS(forest_predict(a, Matrix(1, 3)), ConfigError);
}

TEST_CASE("training accuracy is at least out-of-bag accuracy on average") {
  double train_sum = 0.0, oob_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const Problem prob = blobs(rng, 80, 4, 3, 1.5);
    ForestConfig cfg;
    cfg.trees = 25;
    cfg.seed = seed;
    const ForestModel f = forest_fit(prob.x, prob.y, 3, cfg);
    REQUIRE(f.oob_accuracy.has_value());
    train_sum += accuracy(forest_predict(f, prob.x), prob.y);
    oob_sum += *f.oob_accuracy;
  }
  CHECK(train_sum >= oob_sum);
}

TEST_CASE("classifier dispatch") {
  Rng rng(12);
  const Problem prob = blobs(rng, 60, 3, 3, 0.5);
  ClassifierConfig cfg;
  cfg.forest.trees = 10;
  for (auto kind : {ClassifierKind::logreg, ClassifierKind::random_forest}) {
    const Classifier c = classifier_fit(kind, prob.x, prob.y, 3, cfg);
    CHECK(c.kind == kind);
    CHECK(accuracy(c.predict(prob.x), prob.y) > 0.9);
    CHECK(c.summary().is_object());
  }
  CHECK(to_json(cfg).contains("logreg"));
}
