#pragma once

// JSON specs for graphs, quantizers, solver runs and experiments, plus the
// CSV writers shared by the harness and the CLI. Schema: docs/experiment_spec.md.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnopt/ftqc.hpp"
#include "qnopt/network.hpp"
#include "qnopt/problem.hpp"
#include "qnopt/quantize.hpp"
#include "qnopt/solvers.hpp"

namespace qnopt {

using Json = nlohmann::json;

struct GraphSpec {
  GraphKind kind = GraphKind::ErdosRenyi;
  std::size_t agents = 10;
  double edge_prob = 0.4;
  std::uint64_t seed = 7;
  std::vector<Edge> edges;  // non-empty: explicit topology, kind/edge_prob ignored

  Graph build() const;
};

struct ProblemSpec {
  ClassificationParams data{.seed = 1};
  double regularization = 0.075;
  Normalization normalization = Normalization::Sum;
  std::string dataset_csv;  // non-empty: load instead of generating

  Problem build() const;
};

// Solver settings with the step size either absolute or relative to the
// upper curvature constant (alpha = step_factor / upper).
struct SolverSpec {
  SolverConfig config;
  std::optional<double> step_factor = 1.0;

  SolverConfig resolve(const Problem& p) const;
};

enum class ExperimentId {
  FtqcTable,
  RhoDeltaSweep,
  QuantizerTable,
  MethodComparison,
  DeltaTable,
  BatchSweep,
  AsyncSweep,
  ZoomComparison,
};

ExperimentId parse_experiment_id(const std::string& name);
std::string to_string(ExperimentId id);

struct ExperimentSpec {
  ExperimentId experiment = ExperimentId::FtqcTable;
  ProblemSpec problem;
  GraphSpec graph;
  SolverSpec solver;
  FtqcConfig ftqc;           // coordination-only experiments
  int replicates = 20;
  std::uint64_t seed = 1;
  std::string output = ".";
  unsigned threads = 0;      // 0: hardware concurrency

  // Grids; empty means the experiment's default.
  std::vector<double> deltas;
  std::vector<double> rhos;
  std::vector<std::string> quantizer_kinds;
  std::vector<std::size_t> batch_sizes;
  std::vector<double> activation_probs;
  std::vector<std::string> methods;
  std::vector<double> zoom_fixed_deltas;

  std::size_t vector_dim = 10;     // coordination experiments: y_i in R^dim
  double vector_scale = 100.0;     // y_i ~ N(0, scale^2 I)
  double sparsifier_theta = 0.1;
  int eval_iteration = 100;        // async sweep: k at which errors are compared

  void validate() const;
};

Json to_json(const Graph& g);
Graph graph_from_json(const Json& j);

Json to_json(const Quantizer& q);
Quantizer quantizer_from_json(const Json& j);

Json to_json(const FtqcConfig& c);
FtqcConfig ftqc_config_from_json(const Json& j, FtqcConfig base = {});

GraphSpec graph_spec_from_json(const Json& j);
ProblemSpec problem_spec_from_json(const Json& j);
SolverSpec solver_spec_from_json(const Json& j);
ExperimentSpec experiment_spec_from_json(const Json& j);

Json parse_json_file(const std::string& path);

// CSV writers, each with a header row.
void write_run_csv(const RunRecord& r, std::ostream& out);
void write_ftqc_trace_csv(const FtqcResult& r, std::ostream& out);

// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace qnopt
