#include "latentbench/isomap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "latentbench/error.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/linalg.hpp"
#include "latentbench/log.hpp"

namespace latentbench {

namespace {

constexpr std::size_t kDenseEigenLimit = 800;

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

std::vector<std::size_t> component_labels(const NeighborGraph& g, std::size_t& count) {
  std::vector<std::size_t> label(g.size(), std::numeric_limits<std::size_t>::max());
  count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (label[s] != std::numeric_limits<std::size_t>::max()) continue;
    label[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& e : g.adjacency[u])
        if (label[e.to] == std::numeric_limits<std::size_t>::max()) {
          label[e.to] = count;
          stack.push_back(e.to);
        }
    }
    ++count;
  }
  return label;
}

}  // namespace

void NeighborGraph::add_edge(std::size_t a, std::size_t b, double weight) {
  auto insert = [&](std::size_t from, std::size_t to) {
    auto& list = adjacency[from];
    auto it = std::lower_bound(list.begin(), list.end(), to,
                               [](const GraphEdge& e, std::size_t v) { return e.to < v; });
    if (it != list.end() && it->to == to)
      it->weight = std::min(it->weight, weight);
    else
      list.insert(it, GraphEdge{to, weight});
  };
  insert(a, b);
  insert(b, a);
}

std::size_t NeighborGraph::component_count() const {
  std::size_t count = 0;
  component_labels(*this, count);
  return count;
}

NeighborGraph knn_graph(const Matrix& rows, std::size_t k) {
  const std::size_t m = rows.rows();
  if (k == 0 || m <= k)
    throw ConfigError("knn_graph: need more rows (" + std::to_string(m) + ") than neighbors (" +
                      std::to_string(k) + ")");

  Matrix sq(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) sq(i, j) = sq(j, i) = kernels::squared_distance(rows.row(i), rows.row(j));

  NeighborGraph g;
  g.k = k;
  g.adjacency.resize(m);
  std::vector<std::size_t> order(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t pos = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) order[pos++] = j;
    const auto row = sq.row(i);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return row[a] < row[b] || (row[a] == row[b] && a < b);
                      });
    for (std::size_t r = 0; r < k; ++r) g.add_edge(i, order[r], std::sqrt(row[order[r]]));
  }

  std::size_t count = 0;
  const auto label = component_labels(g, count);
  if (count > 1) {
    // Shortest edge between every pair of components, then Kruskal: this is
    // the same sequence as repeatedly adding the global shortest bridge.
    struct Bridge {
      double sq = std::numeric_limits<double>::infinity();
      std::size_t a = 0, b = 0;
    };
    std::vector<Bridge> best(count * count);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const auto ci = label[i], cj = label[j];
        if (ci == cj) continue;
        auto& br = best[std::min(ci, cj) * count + std::max(ci, cj)];
        if (sq(i, j) < br.sq) br = {sq(i, j), i, j};
      }
    std::vector<Bridge> bridges;
    for (const auto& br : best)
      if (std::isfinite(br.sq)) bridges.push_back(br);
    std::sort(bridges.begin(), bridges.end(), [](const Bridge& x, const Bridge& y) {
      return std::tie(x.sq, x.a, x.b) < std::tie(y.sq, y.a, y.b);
    });
    UnionFind uf(count);
    for (const auto& br : bridges) {
      if (!uf.unite(label[br.a], label[br.b])) continue;
      g.add_edge(br.a, br.b, std::sqrt(br.sq));
      ++g.augmented_edges;
      log().info("knn_graph: joined components with edge {}-{} (length {:.6g})", br.a, br.b,
                 std::sqrt(br.sq));
    }
  }
  return g;
}

Matrix geodesic_distances(const NeighborGraph& g) {
  const std::size_t m = g.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Matrix d(m, m, inf);
  using Item = std::pair<double, std::size_t>;
  std::vector<Item> heap_storage;
  for (std::size_t s = 0; s < m; ++s) {
    auto dist = d.row(s);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap(std::greater<>{},
                                                                       std::move(heap_storage));
    dist[s] = 0.0;
    heap.emplace(0.0, s);
    while (!heap.empty()) {
      const auto [du, u] = heap.top();
      heap.pop();
      if (du > dist[u]) continue;
      for (const auto& e : g.adjacency[u]) {
        const double nd = du + e.weight;
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          heap.emplace(nd, e.to);
        }
      }
    }
    for (double v : dist)
      if (v == inf) throw NumericError("geodesic_distances: graph is disconnected");
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) d(i, j) = d(j, i) = std::min(d(i, j), d(j, i));
  return d;
}

MdsResult classical_mds(const Matrix& dist, std::size_t d, EigenSolver solver) {
  const std::size_t m = dist.rows();
  if (dist.cols() != m || m == 0) throw ConfigError("classical_mds: distance matrix must be square");
  if (d == 0) throw ConfigError("classical_mds: d must be positive");
  const std::size_t want = std::min(d, m);

  // Squared-distance row means; column means are identical by symmetry.
  std::vector<double> row_mean(m, 0.0);
  std::vector<double> ones(m, 1.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    row_mean[i] = kernels::squared_weighted_sum(dist.row(i), ones) / static_cast<double>(m);
    grand += row_mean[i];
  }
  grand /= static_cast<double>(m);

  if (solver == EigenSolver::automatic)
    solver = m <= kDenseEigenLimit ? EigenSolver::dense : EigenSolver::lanczos;

  EigenPairs eig;
  if (grand == 0.0) {
    eig.values.assign(want, 0.0);
    eig.vectors = Matrix(m, want);
  } else if (solver == EigenSolver::dense) {
    Matrix b(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double s = dist(i, j) * dist(i, j);
        b(i, j) = -0.5 * (s - row_mean[i] - row_mean[j] + grand);
      }
    eig = top_eigenpairs_dense(b, want);
  } else {
    std::vector<double> centered(m);
    auto op = [&](std::span<const double> in, std::span<double> out) {
      double mean = 0.0;
      for (double x : in) mean += x;
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) centered[i] = in[i] - mean;
      double out_mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        out[i] = kernels::squared_weighted_sum(dist.row(i), centered);
        out_mean += out[i];
      }
      out_mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) out[i] = -0.5 * (out[i] - out_mean);
    };
    LanczosOptions opt;
    opt.deflate_constant = true;
    eig = top_eigenpairs_lanczos(op, m, std::min(want, m - 1), opt);
    eig.values.resize(want, 0.0);
  }

  MdsResult out;
  const double top = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  const double floor = 1e-9 * top;
  for (double v : eig.values) {
    if (v > floor && top > 0.0 && out.retained == out.eigenvalues.size()) ++out.retained;
    out.eigenvalues.push_back(std::max(v, 0.0));
  }
  out.deficit = want - out.retained + (d - want);
  out.eigenvectors = Matrix(m, out.retained);
  out.embedding = Matrix(m, out.retained);
  for (std::size_t i = 0; i < out.retained; ++i) {
    const double s = std::sqrt(out.eigenvalues[i]);
    for (std::size_t r = 0; r < m; ++r) {
      out.eigenvectors(r, i) = eig.vectors(r, i);
      out.embedding(r, i) = s * eig.vectors(r, i);
    }
  }
  if (out.deficit > 0)
    log().info("classical_mds: {} of {} requested dimensions have non-positive eigenvalues",
               out.deficit, d);
  return out;
}

IsomapModel isomap_fit(const Matrix& rows, std::size_t d, const IsomapOptions& options) {
  const std::size_t m = rows.rows();
  const std::uint64_t bytes = std::uint64_t{m} * m * sizeof(double);
  if (bytes > options.max_geodesic_bytes)
    throw ConfigError("isomap_fit: " + std::to_string(m) + " rows need " + std::to_string(bytes) +
                      " bytes of geodesics, budget is " +
                      std::to_string(options.max_geodesic_bytes));
  if (!all_finite(rows.values())) throw ConfigError("isomap_fit: non-finite input");

  IsomapModel model;
  model.training_rows = rows;
  model.k = options.k;
  NeighborGraph graph = knn_graph(rows, options.k);
  model.augmented_edges = graph.augmented_edges;
  model.geodesics = geodesic_distances(graph);
  graph = {};

  auto mds = classical_mds(model.geodesics, d, options.solver);
  model.eigenvalues.assign(mds.eigenvalues.begin(),
                           mds.eigenvalues.begin() + static_cast<std::ptrdiff_t>(mds.retained));
  model.eigenvectors = std::move(mds.eigenvectors);
  model.embedding = std::move(mds.embedding);
  model.deficit = mds.deficit;

  std::vector<double> ones(m, 1.0);
  model.column_mean_sq.resize(m);
  double grand = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    model.column_mean_sq[j] =
        kernels::squared_weighted_sum(model.geodesics.row(j), ones) / static_cast<double>(m);
    grand += model.column_mean_sq[j];
  }
  model.grand_mean_sq = grand / static_cast<double>(m);
  return model;
}

Matrix isomap_transform(const IsomapModel& model, const Matrix& rows) {
  if (rows.cols() != model.p())
    throw ConfigError("isomap_transform: rows have width " + std::to_string(rows.cols()) +
                      ", model expects " + std::to_string(model.p()));
  const std::size_t m = model.training_rows.rows();
  const std::size_t q = rows.rows();
  const std::size_t dim = model.d();
  const std::size_t k = std::min(model.k, m);

  Matrix h(q, m);
  std::vector<double> sq(m);
  std::vector<std::size_t> order(m);
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t j = 0; j < m; ++j)
      sq[j] = kernels::squared_distance(rows.row(r), model.training_rows.row(j));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return sq[a] < sq[b] || (sq[a] == sq[b] && a < b);
                      });
    auto hr = h.row(r);
    std::fill(hr.begin(), hr.end(), std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t c = order[a];
      const double dc = std::sqrt(sq[c]);
      const auto geo = model.geodesics.row(c);
      for (std::size_t j = 0; j < m; ++j) hr[j] = std::min(hr[j], dc + geo[j]);
    }
    for (std::size_t j = 0; j < m; ++j) hr[j] = model.column_mean_sq[j] - hr[j] * hr[j];
  }
  Matrix y = multiply(h, model.eigenvectors);
  for (std::size_t i = 0; i < dim; ++i) {
    const double scale = 0.5 / std::sqrt(model.eigenvalues[i]);
    for (std::size_t r = 0; r < q; ++r) y(r, i) *= scale;
  }
  return y;
}

void save_isomap(const IsomapModel& model, ModelWriter& out) {
  out.matrix("ROWS", model.training_rows);
  out.matrix("GEOD", model.geodesics);
  out.vector("LAMB", model.eigenvalues);
  out.matrix("VECS", model.eigenvectors);
  out.vector("CMSQ", model.column_mean_sq);
  out.matrix("EMBD", model.embedding);
  out.vector("SCAL", std::vector<double>{static_cast<double>(model.k), model.grand_mean_sq,
                                         static_cast<double>(model.augmented_edges),
                                         static_cast<double>(model.deficit)});
}

IsomapModel load_isomap(const ModelReader& in) {
  in.expect(ModelKind::isomap);
  IsomapModel m;
  m.training_rows = in.matrix("ROWS");
  m.geodesics = in.matrix("GEOD");
  m.eigenvalues = in.vector("LAMB");
  m.eigenvectors = in.matrix("VECS");
  m.column_mean_sq = in.vector("CMSQ");
  m.embedding = in.matrix("EMBD");
  const auto s = in.vector("SCAL");
  if (s.size() != 4) throw DataError("isomap model: bad scalar section");
  m.k = static_cast<std::size_t>(s[0]);
  m.grand_mean_sq = s[1];
  m.augmented_edges = static_cast<std::size_t>(s[2]);
  m.deficit = static_cast<std::size_t>(s[3]);
  const std::size_t rows = m.training_rows.rows();
  if (m.geodesics.rows() != rows || m.eigenvectors.rows() != rows ||
      m.eigenvectors.cols() != m.eigenvalues.size() || m.column_mean_sq.size() != rows)
    throw DataError("isomap model: inconsistent section shapes");
  return m;
}

}  // namespace latentbench
