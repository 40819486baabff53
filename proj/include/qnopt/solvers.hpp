#pragma once

// Outer optimization loops. All methods share the local-step semantics:
// each agent activates with probability p_i; an active agent takes a
// (possibly mini-batch) gradient step from its current iterate, an
// inactive one re-sends its previous y. They differ in how the y's are
// coordinated:
//   Algorithm2 / Algorithm3   finite-time quantized coordination (FTQC)
//   NearDgd                   t rounds of quantized Metropolis mixing
//   Dgt                       gradient tracking with quantized mixing of
//                             both the iterate and the tracker

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnopt/agent_vectors.hpp"
#include "qnopt/ftqc.hpp"
#include "qnopt/network.hpp"
#include "qnopt/problem.hpp"
#include "qnopt/quantize.hpp"

namespace qnopt {

enum class Method { Algorithm2, Algorithm3, NearDgd, Dgt };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct ZoomParams {
  int activations = 25;  // T: activations required between two zooms
  double ratio = 0.1;    // r: Delta_i <- r * Delta_i
};

struct SolverConfig {
  double step_size = 0.0;
  int iterations = 100;
  std::vector<double> activation_probs{1.0};   // one shared value or one per agent
  std::optional<std::size_t> batch_size;       // nullopt: full local gradients
  std::vector<Quantizer> quantizers{Quantizer::symmetric(1e-4)};  // shared or per agent
  FtqcConfig ftqc;
  bool warm_start = false;                     // reuse the previous FTQC auxiliary state
  ZoomParams zoom;
  int comm_rounds = 1;                         // t, baselines only
  std::uint64_t seed = 0;
  std::optional<AgentVectors> x0;              // default: zeros
  double divergence_threshold = 1e6;

  double activation_prob(std::size_t i) const {
    return activation_probs.size() == 1 ? activation_probs[0] : activation_probs[i];
  }
  double min_activation_prob() const;
  double max_activation_prob() const;
};

// Throws Configuration if the step size violates alpha < 2 / upper curvature
// or any nested parameter is out of range.
void validate(const SolverConfig& cfg, const Problem& p, const Graph& g, Method m);

struct RunRow {
  int k = 0;
  double err = 0.0;            // ||x_k - 1 (x) x*||
  double spread = 0.0;         // max_{i,j} ||x_i - x_j||
  long long cum_comm_rounds = 0;
  double delta_max = 0.0;      // largest lattice spacing in use for step k
  double e_p_norm = 0.0;       // coordination error of the step producing x_k
  double e_g_norm = 0.0;       // inexact-gradient error of that step
  double consensus_error = 0.0;  // max_i ||x_i - mean|| of that coordination step
};

struct RunRecord {
  Method method = Method::Algorithm2;
  std::vector<RunRow> rows;    // rows[0] is the initial point
  std::vector<std::vector<double>> deltas;  // per-row per-agent levels (Algorithm 3)
  bool diverged = false;
  int coordination_cap_hits = 0;  // FTQC runs that stopped at max_iters
  AgentVectors final_x;

  // Mean error over the last `fraction` of the rows (at least one row).
  double plateau(double fraction = 0.1) const;
  double final_error() const { return rows.empty() ? 0.0 : rows.back().err; }
  // Average communication rounds per outer iteration.
  double mean_rounds_per_iteration() const;
};

RunRecord run_algorithm2(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg);
RunRecord run_algorithm3(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg);
RunRecord run_near_dgd(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg);
RunRecord run_dgt(const Problem& p, const Graph& g, std::span<const double> x_star, const SolverConfig& cfg);
RunRecord run_method(Method m, const Problem& p, const Graph& g, std::span<const double> x_star,
                     const SolverConfig& cfg);

struct TheoreticalConstants {
  double zeta;  // contraction of the exact projected gradient step
  double chi;   // asynchrony-adjusted contraction
};

TheoreticalConstants theoretical_constants(double lower, double upper, double step, double min_prob);
TheoreticalConstants theoretical_constants(const Problem& p, const SolverConfig& cfg);

// One round of quantized Metropolis mixing, v_i <- W_ii v_i + sum_j W_ij q_j(v_j).
void quantized_mixing_round(const MixingMatrix& w, const Graph& g, std::span<const Quantizer> q, AgentVectors& v);

}  // namespace qnopt
