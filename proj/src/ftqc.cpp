#include "qnopt/ftqc.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "qnopt/error.hpp"
#include "qnopt/kernels.hpp"

namespace qnopt {

void FtqcConfig::validate() const {
  require(std::isfinite(rho) && rho > 0.0, ErrorCode::InvalidArgument, "penalty rho must be positive");
  require(termination_factor >= 1.0, ErrorCode::InvalidArgument, "termination factor must be >= 1");
  require(max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be >= 1");
  require(activation_prob > 0.0 && activation_prob <= 1.0, ErrorCode::InvalidArgument,
          "activation probability must lie in (0, 1]");
  if (threshold) require(*threshold >= 0.0, ErrorCode::InvalidArgument, "threshold must be nonnegative");
}

FtqcEngine::FtqcEngine(const Graph& g, std::vector<Quantizer> quantizers, FtqcConfig cfg)
    : graph_(&g), quantizers_(std::move(quantizers)), cfg_(std::move(cfg)) {
  cfg_.validate();
  require(quantizers_.size() == 1 || quantizers_.size() == g.num_agents(), ErrorCode::InvalidArgument,
          "need one shared quantizer or one per agent");
  if (!cfg_.threshold) {
    for (const auto& q : quantizers_)
      require(q.has_level(), ErrorCode::Configuration,
              "termination threshold must be given explicitly for " + to_string(q.kind()) + " quantizer");
  }
}

double FtqcEngine::threshold(AgentId i) const {
  if (cfg_.threshold) return *cfg_.threshold;
  return cfg_.termination_factor * quantizer(i).delta();
}

double FtqcEngine::max_delta() const {
  double d = 0.0;
  for (const auto& q : quantizers_) d = std::max(d, q.delta());
  return d;
}

FtqcState FtqcEngine::initial_state(std::size_t dim) const {
  FtqcState s;
  s.dim = dim;
  s.z.assign(graph_->num_directed_edges() * dim, 0.0);
  s.w = AgentVectors(graph_->num_agents(), dim);
  s.terminated.assign(graph_->num_agents(), false);
  return s;
}

void FtqcEngine::local_average(const AgentVectors& y, const FtqcState& s, AgentId i,
                               std::span<double> out) const {
  const auto yi = y.row(i);
  std::copy(yi.begin(), yi.end(), out.begin());
  const std::size_t off = graph_->directed_offset(i);
  const auto& k = kernels::active();
  for (std::size_t slot = 0; slot < graph_->degree(i); ++slot) {
    // out += z_ij
    k.axpy(1.0, s.edge(off + slot), out.data(), s.dim);
  }
  const double scale = 1.0 / (1.0 + cfg_.rho * static_cast<double>(graph_->degree(i)));
  for (auto& v : out) v *= scale;
}

FtqcEngine::RoundStats FtqcEngine::round(const AgentVectors& y, FtqcState& s, std::span<const bool> active,
                                         bool ignore_termination) const {
  const Graph& g = *graph_;
  const std::size_t n = s.dim;
  const std::size_t agents = g.num_agents();
  const auto& k = kernels::active();

  std::vector<char> participates(agents);
  for (AgentId i = 0; i < agents; ++i)
    participates[i] = active[i] && (ignore_termination || !s.terminated[i]);

  // Local update and transmission, all from the pre-round z.
  std::vector<double> msg(g.num_directed_edges() * n);
  std::vector<char> sent(g.num_directed_edges(), 0);
  std::vector<double> raw(n);
  RoundStats stats;
  for (AgentId i = 0; i < agents; ++i) {
    if (!participates[i]) continue;
    auto wi = s.w.row(i);
    local_average(y, s, i, wi);
    const Quantizer& q = quantizer(i);
    const std::size_t off = g.directed_offset(i);
    for (std::size_t slot = 0; slot < g.degree(i); ++slot) {
      const std::size_t e = off + slot;
      // -z_ij + 2 rho w_i
      k.linear_combination(-1.0, s.edge(e), 2.0 * cfg_.rho, wi.data(), raw.data(), n);
      std::span<double> out(msg.data() + e * n, n);
      q.apply(raw, out);
      stats.noise_sq += k.squared_distance(out.data(), raw.data(), n);
      sent[e] = 1;
      ++stats.transmitted;
    }
  }

  // Auxiliary update and termination test. The test only counts in rounds
  // where every neighbour that is still running actually transmitted.
  const std::vector<bool> frozen = s.terminated;
  std::vector<double> old(n);
  for (AgentId i = 0; i < agents; ++i) {
    if (!participates[i]) continue;
    const std::size_t off = g.directed_offset(i);
    double worst = 0.0;
    bool heard_all = true;
    for (std::size_t slot = 0; slot < g.degree(i); ++slot) {
      const std::size_t e = off + slot;
      const std::size_t from = g.reverse_edge(e);  // j -> i carries t_{j->i}
      if (!sent[from]) {
        heard_all = heard_all && frozen[g.neighbors(i)[slot]];
        continue;
      }
      double* z = s.edge(e);
      std::copy(z, z + n, old.begin());
      k.half_average(z, msg.data() + from * n, n);
      worst = std::max(worst, std::sqrt(k.squared_distance(z, old.data(), n)));
    }
    if (!ignore_termination && heard_all && worst <= threshold(i)) s.terminated[i] = true;
  }
  ++s.iter;
  return stats;
}

FtqcResult FtqcEngine::run(const AgentVectors& y, Rng& rng, const FtqcState* warm) const {
  const Graph& g = *graph_;
  require(y.agents() == g.num_agents(), ErrorCode::InvalidArgument, "one input vector per agent required");
  for (double v : y.flat()) require(std::isfinite(v), ErrorCode::NumericInput, "FTQC input is not finite");

  FtqcState s;
  if (warm) {
    require(warm->dim == y.dim() && warm->z.size() == g.num_directed_edges() * y.dim(),
            ErrorCode::InvalidArgument, "warm-start state does not match the graph");
    s = *warm;
    s.terminated.assign(g.num_agents(), false);
    s.iter = 0;
  } else {
    s = initial_state(y.dim());
  }
  for (AgentId i = 0; i < g.num_agents(); ++i) local_average(y, s, i, s.w.row(i));

  const auto mean = network_mean(y);
  FtqcResult res;
  std::unique_ptr<bool[]> active(new bool[g.num_agents()]);
  auto all_done = [&] { return std::all_of(s.terminated.begin(), s.terminated.end(), [](bool b) { return b; }); };

  while (s.iter < cfg_.max_iters && !all_done()) {
    for (AgentId i = 0; i < g.num_agents(); ++i) active[i] = bernoulli(rng, cfg_.activation_prob);
    const auto stats = round(y, s, std::span<const bool>(active.get(), g.num_agents()));
    res.noise_norms.push_back(std::sqrt(stats.noise_sq));
    if (cfg_.record_trace) {
      const auto done = static_cast<std::size_t>(std::count(s.terminated.begin(), s.terminated.end(), true));
      res.trace.push_back({s.iter, max_deviation(s.w, mean), res.noise_norms.back(), done});
    }
  }

  res.iterations_used = s.iter;
  res.terminated_naturally = all_done();
  res.w = s.w;
  res.consensus_error = max_deviation(res.w, mean);
  res.stacked_error = stacked_deviation(res.w, mean);
  res.final_state = std::move(s);
  return res;
}

FtqcResult ftqc_run(const AgentVectors& y, const Graph& g, std::vector<Quantizer> q, const FtqcConfig& cfg,
                    Rng& rng, const FtqcState* z0) {
  FtqcEngine engine(g, std::move(q), cfg);
  return engine.run(y, rng, z0);
}

std::vector<double> network_mean(const AgentVectors& y) {
  std::vector<double> m(y.dim(), 0.0);
  for (std::size_t i = 0; i < y.agents(); ++i) kernels::axpy(1.0, y.row(i), m);
  const double inv = 1.0 / static_cast<double>(y.agents());
  for (auto& v : m) v *= inv;
  return m;
}

double max_deviation(const AgentVectors& w, std::span<const double> target) {
  double worst = 0.0;
  for (std::size_t i = 0; i < w.agents(); ++i)
    worst = std::max(worst, kernels::squared_distance(w.row(i), target));
  return std::sqrt(worst);
}

double stacked_deviation(const AgentVectors& w, std::span<const double> target) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.agents(); ++i) total += kernels::squared_distance(w.row(i), target);
  return std::sqrt(total);
}

double noise_bound(const Graph& g, std::size_t dim, double delta) {
  return 0.5 * delta * std::sqrt(static_cast<double>(dim) * static_cast<double>(g.degree_sum()));
}

double consensus_error_bound(double c, double mu, double d0, double delta, const Graph& g, std::size_t dim,
                             int rounds) {
  require(mu > 0.0 && mu < 1.0, ErrorCode::InvalidArgument, "contraction factor must lie in (0, 1)");
  const double mul = std::pow(mu, rounds);
  return c * (mul * d0 + noise_bound(g, dim, delta) * (1.0 - mul) / (1.0 - mu));
}

}  // namespace qnopt
