#pragma once

// Experiment orchestration: coordination tables, parameter sweeps and
// solver comparisons. Replicates run on a thread pool; every result is a
// pure function of (spec, seed) and rows are sorted by key.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <iosfwd>
#include <optional>
#include <thread>
#include <string>
#include <variant>
#include <vector>

#include "qnopt/config.hpp"

namespace qnopt {

using KeyValue = std::variant<double, std::string>;

struct SummaryRow {
  std::vector<KeyValue> key;
  std::vector<double> mean;
  std::vector<double> stddev;  // sample standard deviation; 0 for one replicate
  std::size_t replicates = 0;
};

class SummaryTable {
 public:
  SummaryTable(std::vector<std::string> key_columns, std::vector<std::string> metrics);

  const std::vector<std::string>& key_columns() const noexcept { return key_columns_; }
  const std::vector<std::string>& metrics() const noexcept { return metrics_; }
  const std::vector<SummaryRow>& rows() const noexcept { return rows_; }

  // samples[r][m]: replicate r, metric m.
  void add(std::vector<KeyValue> key, const std::vector<std::vector<double>>& samples);
  void sort();

  std::size_t metric_index(const std::string& metric) const;
  const SummaryRow& row(const std::vector<KeyValue>& key) const;
  double mean(const std::vector<KeyValue>& key, const std::string& metric) const;

  // Columns: keys, then <metric>_mean and <metric>_std per metric, then replicates.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> key_columns_;
  std::vector<std::string> metrics_;
  std::vector<SummaryRow> rows_;
};

struct Stats {
  double mean;
  double stddev;
};
Stats summarize(const std::vector<double>& xs);

// Runs fn(0..n-1) on up to `threads` workers (0: hardware concurrency) and
// returns the results in index order. The first exception by index is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t i) {
    try {
      slots[i].emplace(fn(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

// y_i ~ N(0, scale^2 I), one stream per replicate.
AgentVectors random_vectors(std::size_t agents, std::size_t dim, double scale, std::uint64_t seed,
                            std::uint64_t replicate);

struct CoordinationSample {
  double consensus_error;
  double stacked_error;
  double iterations;
  double terminated;
};
CoordinationSample coordinate_once(const Graph& g, const Quantizer& q, const FtqcConfig& cfg,
                                   const ExperimentSpec& spec, std::uint64_t replicate);

// Keys: delta. Metrics: consensus_error (max_i), stacked_error, iterations, terminated.
SummaryTable run_ftqc_table(const ExperimentSpec& spec);
// Keys: rho, delta. Same metrics.
SummaryTable run_rho_sweep(const ExperimentSpec& spec);
// rho with the smallest mean `metric` at a given delta.
double argmin_rho(const SummaryTable& sweep, double delta, const std::string& metric);
// Keys: quantizer. Same metrics.
SummaryTable run_quantizer_table(const ExperimentSpec& spec);

struct NamedRun {
  std::string label;
  RunRecord record;
};

struct MethodComparison {
  std::vector<NamedRun> runs;  // trajectories at the first delta
  SummaryTable table;          // keys: delta, method. metrics: plateau, final_error, rounds_per_iteration, diverged
};
// Algorithm 2 and the baselines in `spec.methods` (default near-dgd, dgt)
// over `spec.deltas`; baselines get t = round(Algorithm 2 rounds per iteration).
MethodComparison run_method_comparison(const ExperimentSpec& spec);

struct SweepResult {
  SummaryTable table;
  SummaryTable curves;  // keys: swept value, k. metric: err
};
// Keys: batch. Metrics: plateau, final_error.
SweepResult run_batch_sweep(const ExperimentSpec& spec);
// Keys: p. Metrics: error_at_eval (error at spec.eval_iteration), plateau.
SweepResult run_async_sweep(const ExperimentSpec& spec);

struct BatchAsyncSweeps {
  SweepResult batch;
  SweepResult async;
};
BatchAsyncSweeps run_batch_and_async_sweeps(const ExperimentSpec& spec);

// Algorithm 3 from the solver quantizer level, plus Algorithm 2 at every
// level in spec.zoom_fixed_deltas.
std::vector<NamedRun> run_zoom_comparison(const ExperimentSpec& spec);
void write_zoom_csv(const std::vector<NamedRun>& runs, std::ostream& out);

// Empirical constants for the consensus-error bound, fitted on one traced
// coordination run: log-linear decay of the transient gives mu and C*d0,
// the terminal error gives C.
struct Lemma1Fit {
  double c;
  double mu;
  double d0;
  std::size_t fitted_rounds;
};
Lemma1Fit fit_lemma1_constants(const FtqcResult& traced, const Graph& g, std::size_t dim, double delta);

// Default problem/solver used when an experiment needs x*.
struct SolverSetup {
  Problem problem;
  Graph graph;
  std::vector<double> x_star;
  SolverConfig config;
};
SolverSetup prepare_solver(const ExperimentSpec& spec);

// Executes the spec and writes its CSVs to spec.output; returns the written paths.
std::vector<std::string> run_experiment(const ExperimentSpec& spec);

}  // namespace qnopt
