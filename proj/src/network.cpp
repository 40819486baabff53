#include "qnopt/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qnopt/error.hpp"
#include "qnopt/rng.hpp"

namespace qnopt {

Graph::Graph(std::size_t num_agents, std::vector<Edge> edges) {
  require(num_agents >= 1, ErrorCode::InvalidArgument, "graph needs at least one agent");
  for (auto& [a, b] : edges) {
    require(a < num_agents && b < num_agents, ErrorCode::InvalidArgument, "edge endpoint out of range");
    require(a != b, ErrorCode::InvalidArgument, "self-loops are not allowed");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(), ErrorCode::InvalidArgument,
          "duplicate edge");
  require(is_connected(num_agents, edges), ErrorCode::InvalidArgument, "graph is not connected");

  edges_ = std::move(edges);
  neighbors_.assign(num_agents, {});
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  offsets_.resize(num_agents + 1, 0);
  for (std::size_t i = 0; i < num_agents; ++i) offsets_[i + 1] = offsets_[i] + neighbors_[i].size();
  reverse_.resize(offsets_.back());
  for (std::size_t i = 0; i < num_agents; ++i) {
    for (std::size_t s = 0; s < neighbors_[i].size(); ++s) {
      const AgentId j = neighbors_[i][s];
      const auto& nj = neighbors_[j];
      const auto slot = static_cast<std::size_t>(std::lower_bound(nj.begin(), nj.end(), i) - nj.begin());
      reverse_[offsets_[i] + s] = offsets_[j] + slot;
    }
  }
}

std::size_t Graph::max_degree() const noexcept {
  std::size_t m = 0;
  for (const auto& nb : neighbors_) m = std::max(m, nb.size());
  return m;
}

bool Graph::has_edge(AgentId i, AgentId j) const {
  if (i >= num_agents() || j >= num_agents()) return false;
  const auto& nb = neighbors_[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool is_connected(std::size_t num_agents, std::span<const Edge> edges) {
  if (num_agents == 0) return false;
  std::vector<std::size_t> parent(num_agents);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = num_agents;
  for (const auto& [a, b] : edges) {
    const auto ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "ring") return GraphKind::Ring;
  if (name == "complete") return GraphKind::Complete;
  if (name == "erdos_renyi" || name == "er") return GraphKind::ErdosRenyi;
  fail(ErrorCode::InvalidArgument, "unknown graph kind: " + name);
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Ring: return "ring";
    case GraphKind::Complete: return "complete";
    case GraphKind::ErdosRenyi: return "erdos_renyi";
  }
  return "?";
}

Graph generate_graph(GraphKind kind, std::size_t n, double edge_prob, std::uint64_t seed) {
  require(n >= 2, ErrorCode::InvalidArgument, "graph needs at least two agents");
  std::vector<Edge> edges;
  switch (kind) {
    case GraphKind::Ring:
      if (n == 2) return Graph(2, {{0, 1}});
      for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      return Graph(n, std::move(edges));
    case GraphKind::Complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      return Graph(n, std::move(edges));
    case GraphKind::ErdosRenyi:
      require(edge_prob > 0.0 && edge_prob <= 1.0, ErrorCode::InvalidArgument,
              "edge probability must lie in (0, 1]");
      for (int attempt = 0; attempt < kMaxGraphResamples; ++attempt) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
        edges.clear();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            if (bernoulli(rng, edge_prob)) edges.emplace_back(i, j);
        if (is_connected(n, edges)) return Graph(n, std::move(edges));
      }
      fail(ErrorCode::GenerationFailure, "could not sample a connected Erdos-Renyi graph");
  }
  fail(ErrorCode::InvalidArgument, "unknown graph kind");
}

MixingMatrix metropolis_weights(const Graph& g) {
  const std::size_t n = g.num_agents();
  MixingMatrix w(n);
  for (const auto& [a, b] : g.edges()) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(a), g.degree(b))));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (AgentId j : g.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return w;
}

double mixing_rate(const MixingMatrix& w, int iters) {
  const std::size_t n = w.size();
  // Deterministic start vector with zero mean.
  std::vector<double> v(n), u(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(1.0 + 3.0 * static_cast<double>(i));
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    for (auto& x : v) x -= mean;
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm == 0.0) return 0.0;
    for (auto& x : v) x /= norm;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w(i, j) * v[j];
      u[i] = s;
    }
    est = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    v.swap(u);
  }
  return est;
}

}  // namespace qnopt
