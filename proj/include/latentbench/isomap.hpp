#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "latentbench/matrix.hpp"
#include "latentbench/model_io.hpp"

namespace latentbench {

struct GraphEdge {
  std::size_t to = 0;
  double weight = 0.0;

  bool operator==(const GraphEdge&) const = default;
};

/// Weighted undirected graph; adjacency lists are sorted by neighbor index
/// and every edge appears in both endpoint lists.
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::vector<GraphEdge>> adjacency;
  /// Inter-component edges added to make the graph connected.
  std::size_t augmented_edges = 0;

  std::size_t size() const noexcept { return adjacency.size(); }
  /// Adds (or keeps the lighter of) the undirected edge a-b.
  void add_edge(std::size_t a, std::size_t b, double weight);
  std::size_t component_count() const;
};

/// Symmetrized (union) k-nearest-neighbor graph under Euclidean distance,
/// distance ties to the lower row index. Disconnected components are joined
/// by repeatedly adding the shortest inter-component edge.
NeighborGraph knn_graph(const Matrix& rows, std::size_t k);

/// All-pairs shortest paths by Dijkstra from every source. Symmetric with a
/// zero diagonal. Throws NumericError on a disconnected graph.
Matrix geodesic_distances(const NeighborGraph& graph);

struct MdsResult {
  std::vector<double> eigenvalues;  // requested d, clamped at 0, non-increasing
  Matrix eigenvectors;              // m x retained
  Matrix embedding;                 // m x retained, column i = sqrt(lambda_i) * v_i
  std::size_t retained = 0;         // strictly positive eigenvalues kept
  std::size_t deficit = 0;          // d - retained
};

enum class EigenSolver { automatic, dense, lanczos };

/// Classical MDS: top eigenpairs of B = -1/2 J (D o D) J. Non-positive
/// eigenvalues are dropped and counted in `deficit`.
MdsResult classical_mds(const Matrix& distances, std::size_t d,
                        EigenSolver solver = EigenSolver::automatic);

struct IsomapOptions {
  std::size_t k = 5;
  /// Refuse fits whose m x m geodesic matrix would exceed this many bytes.
  std::uint64_t max_geodesic_bytes = std::uint64_t{2} << 30;
  EigenSolver solver = EigenSolver::automatic;
};

struct IsomapModel {
  Matrix training_rows;          // m x p
  std::size_t k = 5;
  Matrix geodesics;              // m x m
  std::vector<double> eigenvalues;  // retained, > 0
  Matrix eigenvectors;           // m x retained
  std::vector<double> column_mean_sq;  // mean_k D^2[k][j]
  double grand_mean_sq = 0.0;
  Matrix embedding;              // m x retained
  std::size_t augmented_edges = 0;
  std::size_t deficit = 0;

  std::size_t p() const noexcept { return training_rows.cols(); }
  std::size_t d() const noexcept { return eigenvalues.size(); }
};

IsomapModel isomap_fit(const Matrix& rows, std::size_t d, const IsomapOptions& options = {});

/// Out-of-sample extension: approximate squared geodesics through the query's
/// k nearest training rows, then y_i = (1 / 2 sqrt(lambda_i)) * sum_j v_i[j] *
/// (mean_k D^2[k][j] - g^2_j).
Matrix isomap_transform(const IsomapModel& model, const Matrix& rows);

void save_isomap(const IsomapModel& model, ModelWriter& out);
IsomapModel load_isomap(const ModelReader& in);

}  // namespace latentbench
