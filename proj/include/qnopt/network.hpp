#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qnopt {

using AgentId = std::size_t;
using Edge = std::pair<AgentId, AgentId>;

// Undirected, connected communication graph without self-loops.
class Graph {
 public:
  // Validates the edge list: ids in range, no self-loops, no duplicates,
  // connected. Edges are normalized to (min, max) and sorted.
  Graph(std::size_t num_agents, std::vector<Edge> edges);

  std::size_t num_agents() const noexcept { return neighbors_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const AgentId> neighbors(AgentId i) const { return neighbors_[i]; }
  std::size_t degree(AgentId i) const { return neighbors_[i].size(); }
  std::size_t degree_sum() const noexcept { return 2 * edges_.size(); }
  std::size_t max_degree() const noexcept;
  bool has_edge(AgentId i, AgentId j) const;

  // Directed edges (i -> j) enumerated agent by agent, neighbors in
  // ascending order. directed_offset(i) + slot indexes the edge to the
  // slot-th neighbor of i; reverse_edge maps (i -> j) to (j -> i).
  std::size_t num_directed_edges() const noexcept { return reverse_.size(); }
  std::size_t directed_offset(AgentId i) const { return offsets_[i]; }
  std::size_t reverse_edge(std::size_t e) const { return reverse_[e]; }

  bool operator==(const Graph& other) const { return edges_ == other.edges_ && num_agents() == other.num_agents(); }

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<AgentId>> neighbors_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> reverse_;
};

enum class GraphKind { Ring, Complete, ErdosRenyi };

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

// Resampling budget for Erdős–Rényi graphs before giving up.
inline constexpr int kMaxGraphResamples = 100;

Graph generate_graph(GraphKind kind, std::size_t num_agents, double edge_prob, std::uint64_t seed);

bool is_connected(std::size_t num_agents, std::span<const Edge> edges);

// Dense symmetric doubly stochastic matrix, row-major.
class MixingMatrix {
 public:
  explicit MixingMatrix(std::size_t n) : n_(n), w_(n * n, 0.0) {}
  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> w_;
};

MixingMatrix metropolis_weights(const Graph& g);

// Spectral radius of W - (1/N) 11^T, by power iteration on its square.
double mixing_rate(const MixingMatrix& w, int iters = 2000);

}  // namespace qnopt
