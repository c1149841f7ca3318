#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "extra_lab/error.hpp"

namespace extra_lab {

/// Undirected simple graph over agents 0..m-1 (1..m at the I/O boundary).
/// Edges are stored once as (i, j) with i < j, sorted. Immutable after
/// construction.
class NetworkGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  NetworkGraph(std::size_t agents, std::vector<Edge> edges) : m_(agents) {
    require(m_ >= 1, ErrorKind::invalid_size, "graph needs at least one agent");
    for (auto& [a, b] : edges) {
      require(a < m_ && b < m_, ErrorKind::invalid_size,
              "edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ") has an endpoint outside 1.." +
                  std::to_string(m_));
      require(a != b, ErrorKind::parameter, "self-loop at agent " + std::to_string(a + 1));
      if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(), ErrorKind::parameter,
            "duplicate edge");
    edges_ = std::move(edges);
    neighbors_.resize(m_);
    for (const auto& [a, b] : edges_) {
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
    }
    for (auto& list : neighbors_) std::sort(list.begin(), list.end());
  }

  std::size_t agents() const { return m_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }
  /// Sorted neighbor list of agent i (excludes i).
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i == j) return false;
    const auto& list = neighbors_.at(i);
    return std::binary_search(list.begin(), list.end(), j);
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> out(m_);
    for (std::size_t i = 0; i < m_; ++i) out[i] = neighbors_[i].size();
    return out;
  }

 private:
  std::size_t m_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

inline NetworkGraph complete_graph(std::size_t m) {
  require(m >= 1, ErrorKind::invalid_size, "complete graph needs m >= 1");
  std::vector<NetworkGraph::Edge> edges;
  edges.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) edges.emplace_back(i, j);
  return NetworkGraph(m, std::move(edges));
}

inline NetworkGraph ring_graph(std::size_t m) {
  require(m >= 3, ErrorKind::invalid_size, "ring graph needs m >= 3, got " + std::to_string(m));
  std::vector<NetworkGraph::Edge> edges;
  for (std::size_t i = 0; i < m; ++i) edges.emplace_back(i, (i + 1) % m);
  return NetworkGraph(m, std::move(edges));
}

/// d-regular circulant graph: offsets +-1..+-floor(d/2), plus the antipodal
/// offset m/2 when d is odd (which forces m even).
inline NetworkGraph circulant_regular_graph(std::size_t m, std::size_t d) {
  require(m >= 1, ErrorKind::invalid_size, "circulant graph needs m >= 1");
  require(d >= 1 && d < m, ErrorKind::invalid_degree,
          "degree must satisfy 1 <= d <= m-1, got d=" + std::to_string(d) + " m=" + std::to_string(m));
  require(d >= 2 || m == 2, ErrorKind::invalid_degree,
          "a 1-regular graph on " + std::to_string(m) + " nodes is disconnected");
  require((m * d) % 2 == 0, ErrorKind::handshake_parity,
          "m*d must be even, got m=" + std::to_string(m) + " d=" + std::to_string(d));
  std::vector<NetworkGraph::Edge> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t off = 1; off <= d / 2; ++off) edges.emplace_back(i, (i + off) % m);
  if (d % 2 == 1)
    for (std::size_t i = 0; i < m / 2; ++i) edges.emplace_back(i, i + m / 2);
  return NetworkGraph(m, std::move(edges));
}

inline bool is_connected(const NetworkGraph& g) {
  const std::size_t m = g.agents();
  std::vector<bool> seen(m, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t at = frontier.front();
    frontier.pop();
    for (std::size_t next : g.neighbors(at)) {
      if (seen[next]) continue;
      seen[next] = true;
      ++reached;
      frontier.push(next);
    }
  }
  return reached == m;
}

}  // namespace extra_lab
