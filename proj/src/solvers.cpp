#include "qnopt/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "qnopt/error.hpp"
#include "qnopt/kernels.hpp"

namespace qnopt {

Method parse_method(const std::string& name) {
  if (name == "alg2" || name == "algorithm2") return Method::Algorithm2;
  if (name == "alg3" || name == "algorithm3") return Method::Algorithm3;
  if (name == "near-dgd" || name == "near_dgd") return Method::NearDgd;
  if (name == "dgt") return Method::Dgt;
  fail(ErrorCode::InvalidArgument, "unknown method: " + name);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Algorithm2: return "alg2";
    case Method::Algorithm3: return "alg3";
    case Method::NearDgd: return "near-dgd";
    case Method::Dgt: return "dgt";
  }
  return "?";
}

double SolverConfig::min_activation_prob() const {
  return *std::min_element(activation_probs.begin(), activation_probs.end());
}

double SolverConfig::max_activation_prob() const {
  return *std::max_element(activation_probs.begin(), activation_probs.end());
}

void validate(const SolverConfig& cfg, const Problem& p, const Graph& g, Method m) {
  const std::size_t agents = p.num_agents();
  require(g.num_agents() == agents, ErrorCode::Configuration, "graph and problem disagree on the agent count");
  require(std::isfinite(cfg.step_size) && cfg.step_size > 0.0, ErrorCode::Configuration,
          "step size must be positive");
  require(cfg.step_size < 2.0 / p.upper_curvature(), ErrorCode::Configuration,
          "step size must satisfy alpha < 2 / upper curvature");
  require(cfg.iterations >= 1, ErrorCode::Configuration, "need at least one outer iteration");
  require(!cfg.activation_probs.empty() &&
              (cfg.activation_probs.size() == 1 || cfg.activation_probs.size() == agents),
          ErrorCode::Configuration, "activation probabilities: one shared value or one per agent");
  for (double pr : cfg.activation_probs)
    require(pr > 0.0 && pr <= 1.0, ErrorCode::Configuration, "activation probability must lie in (0, 1]");
  require(!cfg.quantizers.empty() && (cfg.quantizers.size() == 1 || cfg.quantizers.size() == agents),
          ErrorCode::Configuration, "quantizers: one shared or one per agent");
  if (cfg.batch_size) {
    for (std::size_t i = 0; i < agents; ++i)
      require(*cfg.batch_size >= 1 && *cfg.batch_size <= p.local_size(i), ErrorCode::Configuration,
              "batch size must lie in [1, m_i]");
  }
  if (cfg.x0) {
    require(cfg.x0->agents() == agents && cfg.x0->dim() == p.dim(), ErrorCode::Configuration,
            "initial point has the wrong shape");
  }
  if (m == Method::NearDgd || m == Method::Dgt)
    require(cfg.comm_rounds >= 1, ErrorCode::Configuration, "baselines need at least one mixing round");
  if (m == Method::Algorithm3) {
    require(cfg.zoom.ratio > 0.0 && cfg.zoom.ratio < 1.0, ErrorCode::Configuration, "zoom ratio must lie in (0, 1)");
    require(cfg.zoom.activations >= 1, ErrorCode::Configuration, "zoom period T must be >= 1");
    for (const auto& q : cfg.quantizers)
      require(q.has_level(), ErrorCode::Configuration, "zooming needs quantizers with a lattice level");
  }
  if (m == Method::Algorithm2 || m == Method::Algorithm3) {
    cfg.ftqc.validate();
    if (!cfg.ftqc.threshold)
      for (const auto& q : cfg.quantizers)
        require(q.has_level(), ErrorCode::Configuration, "FTQC threshold must be explicit for this quantizer");
  }
}

double RunRecord::plateau(double fraction) const {
  if (rows.empty()) return 0.0;
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size()))));
  double s = 0.0;
  for (std::size_t r = rows.size() - count; r < rows.size(); ++r) s += rows[r].err;
  return s / static_cast<double>(count);
}

double RunRecord::mean_rounds_per_iteration() const {
  if (rows.size() < 2) return 0.0;
  return static_cast<double>(rows.back().cum_comm_rounds) / static_cast<double>(rows.size() - 1);
}

TheoreticalConstants theoretical_constants(double lower, double upper, double step, double min_prob) {
  const double zeta = std::max(std::fabs(1.0 - step * lower), std::fabs(1.0 - step * upper));
  require(zeta < 1.0, ErrorCode::Configuration, "step size too large: contraction factor >= 1");
  require(min_prob > 0.0 && min_prob <= 1.0, ErrorCode::Configuration, "activation probability must lie in (0, 1]");
  return {zeta, std::sqrt(1.0 - (1.0 - zeta * zeta) * min_prob)};
}

TheoreticalConstants theoretical_constants(const Problem& p, const SolverConfig& cfg) {
  return theoretical_constants(p.lower_curvature(), p.upper_curvature(), cfg.step_size, cfg.min_activation_prob());
}

void quantized_mixing_round(const MixingMatrix& w, const Graph& g, std::span<const Quantizer> q, AgentVectors& v) {
  const std::size_t agents = v.agents();
  AgentVectors sent(agents, v.dim());
  for (std::size_t j = 0; j < agents; ++j) (q.size() == 1 ? q[0] : q[j]).apply(v.row(j), sent.row(j));
  AgentVectors next(agents, v.dim());
  for (std::size_t i = 0; i < agents; ++i) {
    auto out = next.row(i);
    kernels::axpy(w(i, i), v.row(i), out);
    for (AgentId j : g.neighbors(i)) kernels::axpy(w(i, j), sent.row(j), out);
  }
  v = std::move(next);
}

namespace {

enum Stream : std::uint64_t { kActivation = 1, kBatch = 2, kCoordination = 3 };

std::uint64_t stream_id(Stream s, std::size_t agent = 0) { return (static_cast<std::uint64_t>(s) << 32) | agent; }

double stacked_error(const AgentVectors& x, std::span<const double> x_star) { return stacked_deviation(x, x_star); }

double spread(const AgentVectors& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.agents(); ++i)
    for (std::size_t j = i + 1; j < x.agents(); ++j) worst = std::max(worst, kernels::squared_distance(x.row(i), x.row(j)));
  return std::sqrt(worst);
}

double max_level(std::span<const Quantizer> q) {
  double d = 0.0;
  for (const auto& qi : q) d = std::max(d, qi.delta());
  return d;
}

// Local gradient steps shared by every method: activation draws, optional
// mini-batches and the hold rule for inactive agents.
class LocalSteps {
 public:
  LocalSteps(const Problem& p, const SolverConfig& cfg, const AgentVectors& x0)
      : p_(&p), cfg_(&cfg), y_prev_(x0), active_(p.num_agents(), true) {
    for (std::size_t i = 0; i < p.num_agents(); ++i) {
      act_rng_.push_back(make_rng(cfg.seed, stream_id(kActivation, i)));
      batch_rng_.push_back(make_rng(cfg.seed, stream_id(kBatch, i)));
    }
  }

  // Fills y and returns ||e_g|| for this step.
  double step(const AgentVectors& x, AgentVectors& y) {
    const std::size_t agents = p_->num_agents();
    const std::size_t n = p_->dim();
    std::vector<double> g(n), exact(n), bias(n, 0.0);
    for (std::size_t i = 0; i < agents; ++i) {
      active_[i] = bernoulli(act_rng_[i], cfg_->activation_prob(i));
      auto yi = y.row(i);
      if (!active_[i]) {
        std::copy(y_prev_.row(i).begin(), y_prev_.row(i).end(), yi.begin());
        continue;
      }
      gradient(i, x.row(i), g);
      if (cfg_->batch_size) {
        p_->local_gradient(i, x.row(i), exact);
        for (std::size_t c = 0; c < n; ++c) bias[c] += g[c] - exact[c];
      }
      kernels::active().linear_combination(1.0, x.row(i).data(), -cfg_->step_size, g.data(), yi.data(), n);
    }
    y_prev_ = y;
    // proj_C difference: 1 (x) (-alpha/N) sum_i (g_hat_i - g_i)
    const double scale = cfg_->step_size / static_cast<double>(agents);
    return std::sqrt(static_cast<double>(agents)) * scale * std::sqrt(kernels::squared_norm(bias));
  }

  void gradient(std::size_t i, std::span<const double> x, std::span<double> out) {
    if (cfg_->batch_size)
      p_->stochastic_gradient(i, x, *cfg_->batch_size, batch_rng_[i], out);
    else
      p_->local_gradient(i, x, out);
  }

  bool active(std::size_t i) const { return active_[i]; }

 private:
  const Problem* p_;
  const SolverConfig* cfg_;
  AgentVectors y_prev_;
  std::vector<bool> active_;
  std::vector<Rng> act_rng_;
  std::vector<Rng> batch_rng_;
};

AgentVectors initial_point(const Problem& p, const SolverConfig& cfg) {
  return cfg.x0 ? *cfg.x0 : AgentVectors(p.num_agents(), p.dim());
}

std::vector<Quantizer> expand(const std::vector<Quantizer>& q, std::size_t agents) {
  if (q.size() == agents) return q;
  return std::vector<Quantizer>(agents, q.front());
}

bool blown_up(double err, double threshold) { return !std::isfinite(err) || err > threshold; }

RunRow make_row(int k, const AgentVectors& x, std::span<const double> x_star, long long rounds, double delta,
                double ep, double eg, double ce) {
  return {k, stacked_error(x, x_star), spread(x), rounds, delta, ep, eg, ce};
}

RunRecord run_ftqc_method(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg,
                          bool zoom) {
  const Method method = zoom ? Method::Algorithm3 : Method::Algorithm2;
  validate(cfg, p, g, method);
  require(x_star.size() == p.dim(), ErrorCode::InvalidArgument, "reference solution has the wrong dimension");
  const std::size_t agents = p.num_agents();

  AgentVectors x = initial_point(p, cfg);
  AgentVectors y(agents, p.dim());
  LocalSteps local(p, cfg, x);
  auto coord_rng = make_rng(cfg.seed, stream_id(kCoordination));
  std::vector<Quantizer> quantizers = expand(cfg.quantizers, agents);
  std::vector<int> since_zoom(agents, 0);

  RunRecord rec;
  rec.method = method;
  rec.rows.push_back(make_row(0, x, x_star, 0, max_level(quantizers), 0.0, 0.0, 0.0));
  if (zoom) {
    std::vector<double> lv;
    for (const auto& q : quantizers) lv.push_back(q.delta());
    rec.deltas.push_back(lv);
  }

  std::optional<FtqcState> warm;
  long long rounds = 0;
  for (int k = 0; k < cfg.iterations; ++k) {
    const double eg = local.step(x, y);
    const double level = max_level(quantizers);
    FtqcEngine engine(g, quantizers, cfg.ftqc);
    FtqcResult res = engine.run(y, coord_rng, warm ? &*warm : nullptr);
    if (!res.terminated_naturally) ++rec.coordination_cap_hits;
    rounds += res.iterations_used;
    const double ep = stacked_deviation(res.w, network_mean(y));
    const double ce = res.consensus_error;

    if (zoom) {
      std::vector<double> lv;
      for (std::size_t i = 0; i < agents; ++i) {
        lv.push_back(quantizers[i].delta());
        if (local.active(i)) ++since_zoom[i];
        const double moved = std::sqrt(kernels::squared_distance(res.w.row(i), x.row(i)));
        if (since_zoom[i] >= cfg.zoom.activations && moved <= quantizers[i].delta()) {
          quantizers[i] = quantizers[i].with_delta(cfg.zoom.ratio * quantizers[i].delta());
          since_zoom[i] = 0;
        }
      }
      rec.deltas.push_back(std::move(lv));
    }

    if (cfg.warm_start) warm = std::move(res.final_state);
    x = std::move(res.w);
    rec.rows.push_back(make_row(k + 1, x, x_star, rounds, level, ep, eg, ce));
    if (blown_up(rec.rows.back().err, cfg.divergence_threshold)) {
      rec.diverged = true;
      break;
    }
  }
  rec.final_x = std::move(x);
  return rec;
}

}  // namespace

RunRecord run_algorithm2(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg) {
  return run_ftqc_method(p, g, x_star, cfg, false);
}

RunRecord run_algorithm3(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg) {
  return run_ftqc_method(p, g, x_star, cfg, true);
}

RunRecord run_near_dgd(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg) {
  validate(cfg, p, g, Method::NearDgd);
  const std::size_t agents = p.num_agents();
  const MixingMatrix w = metropolis_weights(g);
  const auto quantizers = expand(cfg.quantizers, agents);

  AgentVectors x = initial_point(p, cfg);
  AgentVectors y(agents, p.dim());
  LocalSteps local(p, cfg, x);

  RunRecord rec;
  rec.method = Method::NearDgd;
  const double level = max_level(quantizers);
  rec.rows.push_back(make_row(0, x, x_star, 0, level, 0.0, 0.0, 0.0));
  long long rounds = 0;
  for (int k = 0; k < cfg.iterations; ++k) {
    const double eg = local.step(x, y);
    AgentVectors v = y;
    for (int r = 0; r < cfg.comm_rounds; ++r) quantized_mixing_round(w, g, quantizers, v);
    rounds += cfg.comm_rounds;
    const auto mean = network_mean(y);
    const double ep = stacked_deviation(v, mean);
    const double ce = max_deviation(v, mean);
    x = std::move(v);
    rec.rows.push_back(make_row(k + 1, x, x_star, rounds, level, ep, eg, ce));
    if (blown_up(rec.rows.back().err, cfg.divergence_threshold)) {
      rec.diverged = true;
      break;
    }
  }
  rec.final_x = std::move(x);
  return rec;
}

// Gradient tracking: x <- W^t x - alpha s,  s <- W^t s + g(x_new) - g(x_old),
// s_0 = g(x_0). Each mixing round carries the pair (x_i, s_i), both
// quantized. Agents are always active.
RunRecord run_dgt(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg) {
  validate(cfg, p, g, Method::Dgt);
  const std::size_t agents = p.num_agents();
  const std::size_t n = p.dim();
  const MixingMatrix w = metropolis_weights(g);
  const auto quantizers = expand(cfg.quantizers, agents);

  AgentVectors x = initial_point(p, cfg);
  LocalSteps local(p, cfg, x);
  AgentVectors grad_old(agents, n);
  for (std::size_t i = 0; i < agents; ++i) local.gradient(i, x.row(i), grad_old.row(i));
  AgentVectors s = grad_old;

  RunRecord rec;
  rec.method = Method::Dgt;
  const double level = max_level(quantizers);
  rec.rows.push_back(make_row(0, x, x_star, 0, level, 0.0, 0.0, 0.0));
  long long rounds = 0;
  AgentVectors grad_new(agents, n);
  for (int k = 0; k < cfg.iterations; ++k) {
    AgentVectors xm = x;
    AgentVectors sm = s;
    for (int r = 0; r < cfg.comm_rounds; ++r) {
      quantized_mixing_round(w, g, quantizers, xm);
      quantized_mixing_round(w, g, quantizers, sm);
    }
    rounds += cfg.comm_rounds;
    const auto mean = network_mean(x);
    const double ep = stacked_deviation(xm, mean);
    const double ce = max_deviation(xm, mean);
    for (std::size_t i = 0; i < agents; ++i) kernels::axpy(-cfg.step_size, s.row(i), xm.row(i));
    bool finite = true;
    for (double v : xm.flat()) finite = finite && std::isfinite(v);
    if (!finite) {
      rec.diverged = true;
      break;
    }
    for (std::size_t i = 0; i < agents; ++i) {
      local.gradient(i, xm.row(i), grad_new.row(i));
      auto si = sm.row(i);
      kernels::axpy(1.0, grad_new.row(i), si);
      kernels::axpy(-1.0, grad_old.row(i), si);
    }
    x = std::move(xm);
    s = std::move(sm);
    std::swap(grad_old, grad_new);
    rec.rows.push_back(make_row(k + 1, x, x_star, rounds, level, ep, 0.0, ce));
    if (blown_up(rec.rows.back().err, cfg.divergence_threshold)) {
      rec.diverged = true;
      break;
    }
  }
  rec.final_x = std::move(x);
  return rec;
}

RunRecord run_method(Method m, const Problem& p, const Graph& g, std::span<const double> x_star,
                     const SolverConfig& cfg) {
  switch (m) {
    case Method::Algorithm2: return run_algorithm2(p, g, x_star, cfg);
    case Method::Algorithm3: return run_algorithm3(p, g, x_star, cfg);
    case Method::NearDgd: return run_near_dgd(p, g, x_star, cfg);
    case Method::Dgt: return run_dgt(p, g, x_star, cfg);
  }
  fail(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace qnopt
