#pragma once

// Finite-time quantized coordination: consensus ADMM applied to the
// averaging problem min sum_i 0.5 ||x_i - y_i||^2 s.t. consensus, with every
// exchanged message quantized. Quantized messages make the iteration reach
// a fixpoint in finitely many rounds; each agent stops once its auxiliary
// variables have stopped moving by more than a threshold.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qnopt/agent_vectors.hpp"
#include "qnopt/network.hpp"
#include "qnopt/quantize.hpp"
#include "qnopt/rng.hpp"

namespace qnopt {

struct FtqcConfig {
  double rho = 0.3;                  // ADMM penalty
  double termination_factor = 1.0;   // threshold theta_i = factor * delta_i
  std::optional<double> threshold;   // explicit theta; required for identity / sparsifier
  int max_iters = 10000;
  double activation_prob = 1.0;      // per-agent, per-round Bernoulli activation
  bool record_trace = false;         // keep per-round diagnostics

  void validate() const;
};

// Auxiliary state: one vector z_ij per directed edge, indexed by
// Graph::directed_offset(i) + slot; w holds the latest local averages.
struct FtqcState {
  std::size_t dim = 0;
  std::vector<double> z;
  AgentVectors w;
  std::vector<bool> terminated;
  int iter = 0;

  double* edge(std::size_t e) { return z.data() + e * dim; }
  const double* edge(std::size_t e) const { return z.data() + e * dim; }
};

struct FtqcTraceRow {
  int round;
  double max_consensus_error;
  double noise_norm;
  std::size_t num_terminated;
};

struct FtqcResult {
  AgentVectors w;                    // last local average of each agent
  int iterations_used = 0;
  bool terminated_naturally = false;
  double consensus_error = 0.0;      // max_i ||w_i - mean(y)||
  double stacked_error = 0.0;        // ||w - 1 (x) mean(y)|| over all agents
  std::vector<double> noise_norms;   // ||e^l|| per round
  std::vector<FtqcTraceRow> trace;   // only with record_trace
  FtqcState final_state;             // for warm starts and fixpoint checks
};

// One engine per averaging task. Quantizers: either one shared or one per
// agent (each agent quantizes its own outgoing messages).
class FtqcEngine {
 public:
  FtqcEngine(const Graph& g, std::vector<Quantizer> quantizers, FtqcConfig cfg);

  const Graph& graph() const noexcept { return *graph_; }
  const FtqcConfig& config() const noexcept { return cfg_; }
  const Quantizer& quantizer(AgentId i) const { return quantizers_.size() == 1 ? quantizers_[0] : quantizers_[i]; }
  double threshold(AgentId i) const;
  // Largest lattice spacing in use (0 if no agent has a level).
  double max_delta() const;

  FtqcState initial_state(std::size_t dim) const;

  struct RoundStats {
    double noise_sq = 0.0;
    std::size_t transmitted = 0;
  };

  // One synchronous round: every participating agent computes w_i from the
  // pre-round z and transmits; then receivers average in what they got and
  // evaluate the termination test. With `ignore_termination` every agent
  // participates regardless of its flag and flags are left untouched.
  RoundStats round(const AgentVectors& y, FtqcState& s, std::span<const bool> active,
                   bool ignore_termination = false) const;

  // Runs rounds until every agent has terminated or max_iters is reached.
  FtqcResult run(const AgentVectors& y, Rng& rng, const FtqcState* warm = nullptr) const;

 private:
  void local_average(const AgentVectors& y, const FtqcState& s, AgentId i, std::span<double> out) const;

  const Graph* graph_;
  std::vector<Quantizer> quantizers_;
  FtqcConfig cfg_;
};

// Convenience wrapper.
FtqcResult ftqc_run(const AgentVectors& y, const Graph& g, std::vector<Quantizer> q, const FtqcConfig& cfg,
                    Rng& rng, const FtqcState* z0 = nullptr);

std::vector<double> network_mean(const AgentVectors& y);
// max_i ||w_i - target||
double max_deviation(const AgentVectors& w, std::span<const double> target);
// ||w - 1 (x) target||
double stacked_deviation(const AgentVectors& w, std::span<const double> target);

// Worst-case norm of one round's quantization noise over all directed
// edges: (delta/2) sqrt(n * sum_i |N_i|).
double noise_bound(const Graph& g, std::size_t dim, double delta);

// Right-hand side of the consensus-error bound
//   C (mu^l d0 + (delta/2) sqrt(n sum|N_i|) (1 - mu^l) / (1 - mu))
// for empirically fitted C, mu, d0.
double consensus_error_bound(double c, double mu, double d0, double delta, const Graph& g, std::size_t dim,
                             int rounds);

}  // namespace qnopt
