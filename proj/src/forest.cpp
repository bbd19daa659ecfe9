#include "latentbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "latentbench/error.hpp"
#include "latentbench/rng.hpp"

namespace latentbench {

double gini_impurity(std::span<const double> counts) noexcept {
  double n = 0.0, sq = 0.0;
  for (double c : counts) {
    n += c;
    sq += c * c;
  }
  return n > 0.0 ? 1.0 - sq / (n * n) : 0.0;
}

int DecisionTree::predict(std::span<const double> row) const {
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const auto& nd = nodes[at];
    at = static_cast<std::size_t>(row[static_cast<std::size_t>(nd.feature)] <= nd.threshold
                                      ? nd.left
                                      : nd.right);
  }
  const auto& h = nodes[at].histogram;
  return static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [at, dep] = stack.back();
    stack.pop_back();
    best = std::max(best, dep);
    if (!nodes[at].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[at].left), dep + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[at].right), dep + 1);
    }
  }
  return best;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t classes,
              const ForestConfig& cfg, Rng& rng)
      : x_(x), y_(y), classes_(classes), cfg_(cfg), rng_(rng) {
    const std::size_t d = x.cols();
    mtry_ = cfg.max_features == MaxFeatures::all
                ? d
                : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    mtry_ = std::clamp<std::size_t>(mtry_, 1, d);
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    DecisionTree tree;
    struct Work {
      std::size_t node, begin, end;
    };
    tree.nodes.emplace_back();
    std::vector<Work> stack{{0, 0, samples_.size()}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      std::vector<double> hist(classes_, 0.0);
      for (std::size_t i = w.begin; i < w.end; ++i) hist[static_cast<std::size_t>(y_[samples_[i]])] += 1.0;
      const std::size_t n = w.end - w.begin;
      const bool pure = std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0; }) <= 1;
      SplitChoice split;
      if (!pure && n >= 2 * cfg_.min_leaf) split = best_split(w.begin, w.end, hist);
      if (split.feature < 0) {
        tree.nodes[w.node].histogram = std::move(hist);
        continue;
      }
      const auto mid = std::partition(
          samples_.begin() + static_cast<std::ptrdiff_t>(w.begin),
          samples_.begin() + static_cast<std::ptrdiff_t>(w.end), [&](std::size_t s) {
            return x_(s, static_cast<std::size_t>(split.feature)) <= split.threshold;
          });
      const std::size_t cut = static_cast<std::size_t>(mid - samples_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[w.node];
      nd.feature = split.feature;
      nd.threshold = split.threshold;
      nd.left = left;
      nd.right = left + 1;
      stack.push_back({static_cast<std::size_t>(left + 1), cut, w.end});
      stack.push_back({static_cast<std::size_t>(left), w.begin, cut});
    }
    return tree;
  }

 private:
  SplitChoice best_split(std::size_t begin, std::size_t end, const std::vector<double>& hist) {
    // Partial Fisher-Yates draws mtry distinct candidates, then ascending order.
    for (std::size_t i = 0; i < mtry_; ++i)
      std::swap(features_[i], features_[i + rng_.index(features_.size() - i)]);
    std::vector<std::size_t> candidates(features_.begin(),
                                        features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates.begin(), candidates.end());

    const std::size_t n = end - begin;
    const double nn = static_cast<double>(n);
    double parent_sq = 0.0;
    for (double c : hist) parent_sq += c * c;
    const double parent_impurity = 1.0 - parent_sq / (nn * nn);

    SplitChoice best;
    std::vector<std::pair<double, int>> column(n);
    std::vector<double> left(classes_), right(classes_);
    for (std::size_t f : candidates) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = samples_[begin + i];
        column[i] = {x_(s, f), y_[s]};
      }
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = hist;
      double lsq = 0.0, rsq = parent_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto k = static_cast<std::size_t>(column[i].second);
        lsq += 2.0 * left[k] + 1.0;
        rsq -= 2.0 * right[k] - 1.0;
        left[k] += 1.0;
        right[k] -= 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
        const double weighted = (dl - lsq / dl + dr - rsq / dr) / nn;
        const double decrease = parent_impurity - weighted;
        if (decrease > best.decrease + 1e-15) {
          const double lo = column[i].first, hi = column[i + 1].first;
          double t = lo + (hi - lo) * 0.5;
          if (!(t >= lo && t < hi)) t = lo;
          best = {static_cast<int>(f), t, decrease};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t classes_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
};

int vote(std::span<const std::size_t> votes) {
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

ForestModel forest_fit(const Matrix& x, std::span<const int> y, std::size_t classes,
                       const ForestConfig& cfg) {
  const std::size_t n = x.rows();
  if (n == 0) throw ConfigError("forest: no training rows");
  if (y.size() != n) throw ConfigError("forest: label count does not match rows");
  if (classes < 2) throw ConfigError("forest: need at least 2 classes");
  if (cfg.trees == 0 || cfg.min_leaf == 0) throw ConfigError("forest: trees and min_leaf must be positive");
  if (!all_finite(x.values())) throw ConfigError("forest: non-finite input");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw ConfigError("forest: label " + std::to_string(v) + " outside [0, " +
                        std::to_string(classes) + ")");

  ForestModel model;
  model.classes = classes;
  model.d = x.cols();
  model.config = cfg;
  std::vector<std::size_t> oob_votes(cfg.bootstrap ? n * classes : 0, 0);
  for (std::size_t t = 0; t < cfg.trees; ++t) {
    Rng rng(derive_seed(cfg.seed, "forest.tree", {t}));
    std::vector<std::size_t> samples(n);
    std::vector<char> in_bag(n, 0);
    if (cfg.bootstrap) {
      for (auto& s : samples) {
        s = rng.index(n);
        in_bag[s] = 1;
      }
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(x, y, classes, cfg, rng);
    model.trees.push_back(builder.build(std::move(samples)));
    if (cfg.bootstrap) {
      for (std::size_t i = 0; i < n; ++i)
        if (!in_bag[i])
          ++oob_votes[i * classes + static_cast<std::size_t>(model.trees.back().predict(x.row(i)))];
    }
  }
  if (cfg.bootstrap) {
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const std::size_t> v(oob_votes.data() + i * classes, classes);
      if (std::accumulate(v.begin(), v.end(), std::size_t{0}) == 0) continue;
      ++scored;
      correct += vote(v) == y[i] ? 1 : 0;
    }
    if (scored > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  }
  return model;
}

std::vector<int> forest_predict(const ForestModel& model, const Matrix& x) {
  if (x.cols() != model.d)
    throw ConfigError("forest_predict: rows have width " + std::to_string(x.cols()) +
                      ", model expects " + std::to_string(model.d));
  std::vector<int> out(x.rows());
  std::vector<std::size_t> votes(model.classes);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree.predict(x.row(i)))];
    out[i] = vote(votes);
  }
  return out;
}

std::string dump_trees(const ForestModel& model) {
  std::ostringstream os;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    os << "tree " << t << '\n';
    const auto& nodes = model.trees[t].nodes;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 1}};
    while (!stack.empty()) {
      const auto [at, indent] = stack.back();
      stack.pop_back();
      const auto& nd = nodes[at];
      os << std::string(2 * indent, ' ');
      if (nd.is_leaf()) {
        os << "leaf [";
        for (std::size_t k = 0; k < nd.histogram.size(); ++k)
          os << (k ? " " : "") << nd.histogram[k];
        os << "]\n";
      } else {
        os << "x" << nd.feature << " <= " << nd.threshold << '\n';
        stack.emplace_back(static_cast<std::size_t>(nd.right), indent + 1);
        stack.emplace_back(static_cast<std::size_t>(nd.left), indent + 1);
      }
    }
  }
  return os.str();
}

// Trees flatten into one matrix with a row per node:
// tree index, feature, threshold, left, right, histogram...
void save_forest(const ForestModel& model, ModelWriter& out) {
  std::size_t rows = 0;
  for (const auto& t : model.trees) rows += t.nodes.size();
  Matrix nodes(rows, 5 + model.classes);
  std::size_t r = 0;
  for (std::size_t t = 0; t < model.trees.size(); ++t)
    for (const auto& nd : model.trees[t].nodes) {
      nodes(r, 0) = static_cast<double>(t);
      nodes(r, 1) = nd.feature;
      nodes(r, 2) = nd.threshold;
      nodes(r, 3) = nd.left;
      nodes(r, 4) = nd.right;
      for (std::size_t k = 0; k < nd.histogram.size(); ++k) nodes(r, 5 + k) = nd.histogram[k];
      ++r;
    }
  out.matrix("NODE", nodes);
  const auto& c = model.config;
  out.vector("SCAL", std::vector<double>{
                         static_cast<double>(model.classes), static_cast<double>(model.d),
                         static_cast<double>(c.trees), c.max_features == MaxFeatures::all ? 1.0 : 0.0,
                         static_cast<double>(c.min_leaf), c.bootstrap ? 1.0 : 0.0,
                         model.oob_accuracy.value_or(-1.0)});
  out.text("SEED", std::to_string(c.seed));
}

ForestModel load_forest(const ModelReader& in) {
  in.expect(ModelKind::forest);
  ForestModel m;
  const auto s = in.vector("SCAL");
  if (s.size() != 7) throw DataError("forest model: bad scalar section");
  m.classes = static_cast<std::size_t>(s[0]);
  m.d = static_cast<std::size_t>(s[1]);
  m.config.trees = static_cast<std::size_t>(s[2]);
  m.config.max_features = s[3] != 0.0 ? MaxFeatures::all : MaxFeatures::sqrt;
  m.config.min_leaf = static_cast<std::size_t>(s[4]);
  m.config.bootstrap = s[5] != 0.0;
  if (s[6] >= 0.0) m.oob_accuracy = s[6];
  m.config.seed = std::stoull(in.text("SEED"));
  const Matrix nodes = in.matrix("NODE");
  if (nodes.cols() != 5 + m.classes) throw DataError("forest model: bad node table");
  m.trees.resize(m.config.trees);
  for (std::size_t r = 0; r < nodes.rows(); ++r) {
    const auto t = static_cast<std::size_t>(nodes(r, 0));
    if (t >= m.trees.size()) throw DataError("forest model: node references unknown tree");
    TreeNode nd;
    nd.feature = static_cast<int>(nodes(r, 1));
    nd.threshold = nodes(r, 2);
    nd.left = static_cast<int>(nodes(r, 3));
    nd.right = static_cast<int>(nodes(r, 4));
    if (nd.is_leaf())
      nd.histogram.assign(nodes.row(r).begin() + 5, nodes.row(r).end());
    m.trees[t].nodes.push_back(std::move(nd));
  }
  return m;
}

}  // namespace latentbench
