#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vsensor/dataset.hpp"
#include "vsensor/nn.hpp"

namespace vsensor {

inline constexpr double kEarthRadiusM = 6371000.0;

// Great-circle distance in meters.
double haversine(LatLon a, LatLon b);

// Undirected sensor graph. Neighbour lists are sorted ascending and
// edge_lengths[v][i] is the length of the edge (v, adjacency[v][i]).
struct SpatialGraph {
  std::size_t n_nodes = 0;
  std::vector<std::vector<std::size_t>> adjacency;
  std::vector<std::vector<double>> edge_lengths;

  std::size_t degree(std::size_t v) const { return adjacency[v].size(); }
  std::size_t max_degree() const;
  std::size_t edge_count() const;
  // Longest shortest-path hop count; nullopt when the graph is disconnected.
  std::optional<std::size_t> diameter() const;
  // One `u v length_m` line per undirected edge with u < v.
  std::string edge_list() const;

  static SpatialGraph empty(std::size_t n);
};

// Symmetrised k-nearest-neighbour graph over haversine distance. Distance
// ties are broken by ascending sensor id. Sensors sharing coordinates are
// reported through `warnings` when provided.
SpatialGraph build_knn_graph(const std::vector<SensorLocation>& locations, std::size_t k,
                             std::vector<std::string>* warnings = nullptr);

// Per-hop maximum neighbour counts, outermost hop first.
struct SampleBudget {
  std::array<std::size_t, 2> per_hop{3, 5};

  std::size_t hop1() const { return per_hop[0]; }
  std::size_t hop2() const { return per_hop[1]; }
};

struct NeighborhoodSample {
  std::vector<std::size_t> hop1;
  // hop2[i] holds the sampled neighbours of hop1[i].
  std::vector<std::vector<std::size_t>> hop2;
};

// Uniform sample without replacement of min(budget, degree) neighbours,
// returned in ascending order. When the budget covers the whole
// neighbourhood, the full list is returned and the generator is not used.
std::vector<std::size_t> sample_neighbors(const SpatialGraph& g, std::size_t node, std::size_t budget, Rng& rng);

NeighborhoodSample sample_neighborhood(const SpatialGraph& g, std::size_t node, const SampleBudget& budget,
                                       Rng& rng);

}  // namespace vsensor
