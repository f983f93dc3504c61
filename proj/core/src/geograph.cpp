#include "vsensor/geograph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace vsensor {

double haversine(LatLon a, LatLon b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double p1 = a.lat * deg;
  const double p2 = b.lat * deg;
  const double dphi = (b.lat - a.lat) * deg;
  const double dlam = (b.lon - a.lon) * deg;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(p1) * std::cos(p2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

std::size_t SpatialGraph::max_degree() const {
  std::size_t d = 0;
  for (const auto& a : adjacency) d = std::max(d, a.size());
  return d;
}

std::size_t SpatialGraph::edge_count() const {
  std::size_t e = 0;
  for (const auto& a : adjacency) e += a.size();
  return e / 2;
}

std::optional<std::size_t> SpatialGraph::diameter() const {
  std::size_t diam = 0;
  for (std::size_t src = 0; src < n_nodes; ++src) {
    std::vector<std::size_t> dist(n_nodes, SIZE_MAX);
    std::deque<std::size_t> q{src};
    dist[src] = 0;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop_front();
      for (std::size_t u : adjacency[v]) {
        if (dist[u] == SIZE_MAX) {
          dist[u] = dist[v] + 1;
          q.push_back(u);
        }
      }
    }
    for (std::size_t d : dist) {
      if (d == SIZE_MAX) return std::nullopt;
      diam = std::max(diam, d);
    }
  }
  return diam;
}

std::string SpatialGraph::edge_list() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    for (std::size_t i = 0; i < adjacency[v].size(); ++i) {
      const std::size_t u = adjacency[v][i];
      if (v < u) os << v << ' ' << u << ' ' << edge_lengths[v][i] << '\n';
    }
  }
  return os.str();
}

SpatialGraph SpatialGraph::empty(std::size_t n) {
  return {n, std::vector<std::vector<std::size_t>>(n), std::vector<std::vector<double>>(n)};
}

SpatialGraph build_knn_graph(const std::vector<SensorLocation>& locations, std::size_t k,
                             std::vector<std::string>* warnings) {
  const std::size_t n = locations.size();
  if (k < 1) throw std::invalid_argument("build_knn_graph: k must be >= 1");
  if (n < 2) throw std::invalid_argument("build_knn_graph: need at least 2 locations");

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = haversine(locations[i].position(), locations[j].position());
      if (warnings && dist[i][j] == 0.0) {
        warnings->push_back("sensors " + locations[i].id + " and " + locations[j].id +
                            " share coordinates; ties broken by sensor id");
      }
    }
  }

  std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (dist[i][a] != dist[i][b]) return dist[i][a] < dist[i][b];
      return locations[a].id < locations[b].id;
    });
    const std::size_t take = std::min(k, order.size());
    for (std::size_t r = 0; r < take; ++r) edge[i][order[r]] = edge[order[r]][i] = true;
  }

  SpatialGraph g = SpatialGraph::empty(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (edge[i][j]) {
        g.adjacency[i].push_back(j);
        g.edge_lengths[i].push_back(dist[i][j]);
      }
    }
  }
  return g;
}

std::vector<std::size_t> sample_neighbors(const SpatialGraph& g, std::size_t node, std::size_t budget, Rng& rng) {
  if (node >= g.n_nodes) throw std::out_of_range("sample_neighbors: node index out of range");
  const auto& adj = g.adjacency[node];
  if (budget >= adj.size()) return adj;
  std::vector<std::size_t> pool = adj;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < budget; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(budget);
  std::sort(pool.begin(), pool.end());
  return pool;
}

NeighborhoodSample sample_neighborhood(const SpatialGraph& g, std::size_t node, const SampleBudget& budget,
                                       Rng& rng) {
  NeighborhoodSample s;
  s.hop1 = sample_neighbors(g, node, budget.hop1(), rng);
  s.hop2.reserve(s.hop1.size());
  for (std::size_t u : s.hop1) s.hop2.push_back(sample_neighbors(g, u, budget.hop2(), rng));
  return s;
}

}  // namespace vsensor
