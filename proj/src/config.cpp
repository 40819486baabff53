#include "qnopt/config.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

#include "qnopt/error.hpp"

namespace qnopt {

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* context) {
  require(j.is_object(), ErrorCode::Configuration, std::string(context) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, ErrorCode::Configuration, std::string(context) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Wraps the json library's type errors as configuration errors.
template <class F>
auto guarded(const char* context, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Configuration, std::string(context) + ": " + e.what());
  }
}

std::vector<Quantizer> quantizer_list(const Json& j) {
  std::vector<Quantizer> out;
  if (j.is_array()) {
    for (const auto& q : j) out.push_back(quantizer_from_json(q));
  } else {
    out.push_back(quantizer_from_json(j));
  }
  require(!out.empty(), ErrorCode::Configuration, "quantizers: empty list");
  return out;
}

}  // namespace

Graph GraphSpec::build() const {
  if (!edges.empty()) return Graph(agents, edges);
  return generate_graph(kind, agents, edge_prob, seed);
}

Problem ProblemSpec::build() const {
  if (dataset_csv.empty()) return Problem::logistic(generate_classification(data), regularization, normalization);
  std::ifstream in(dataset_csv);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open dataset " + dataset_csv);
  return Problem::logistic(read_dataset_csv(in), regularization, normalization);
}

SolverConfig SolverSpec::resolve(const Problem& p) const {
  SolverConfig c = config;
  if (step_factor) c.step_size = *step_factor / p.upper_curvature();
  return c;
}

ExperimentId parse_experiment_id(const std::string& name) {
  static const std::pair<const char*, ExperimentId> names[] = {
      {"ftqc_table", ExperimentId::FtqcTable},         {"rho_delta_sweep", ExperimentId::RhoDeltaSweep},
      {"quantizer_table", ExperimentId::QuantizerTable}, {"method_comparison", ExperimentId::MethodComparison},
      {"delta_table", ExperimentId::DeltaTable},       {"batch_sweep", ExperimentId::BatchSweep},
      {"async_sweep", ExperimentId::AsyncSweep},       {"zoom_comparison", ExperimentId::ZoomComparison},
  };
  for (const auto& [n, id] : names)
    if (name == n) return id;
  fail(ErrorCode::Configuration, "unknown experiment '" + name + "'");
}

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::FtqcTable: return "ftqc_table";
    case ExperimentId::RhoDeltaSweep: return "rho_delta_sweep";
    case ExperimentId::QuantizerTable: return "quantizer_table";
    case ExperimentId::MethodComparison: return "method_comparison";
    case ExperimentId::DeltaTable: return "delta_table";
    case ExperimentId::BatchSweep: return "batch_sweep";
    case ExperimentId::AsyncSweep: return "async_sweep";
    case ExperimentId::ZoomComparison: return "zoom_comparison";
  }
  return "unknown";
}

void ExperimentSpec::validate() const {
  require(replicates >= 1, ErrorCode::Configuration, "replicates must be at least 1");
  require(vector_dim >= 1, ErrorCode::Configuration, "vector_dim must be at least 1");
  require(vector_scale > 0.0, ErrorCode::Configuration, "vector_scale must be positive");
  require(sparsifier_theta >= 0.0, ErrorCode::Configuration, "sparsifier_theta must be nonnegative");
  require(eval_iteration >= 0, ErrorCode::Configuration, "eval_iteration must be nonnegative");
  ftqc.validate();
  for (double d : deltas) require(d > 0.0, ErrorCode::Configuration, "deltas must be positive");
  for (double r : rhos) require(r > 0.0, ErrorCode::Configuration, "rhos must be positive");
  for (double p : activation_probs)
    require(p > 0.0 && p <= 1.0, ErrorCode::Configuration, "activation_probs must lie in (0, 1]");
  for (double d : zoom_fixed_deltas) require(d > 0.0, ErrorCode::Configuration, "zoom_fixed_deltas must be positive");
  for (auto b : batch_sizes) require(b >= 1, ErrorCode::Configuration, "batch_sizes must be at least 1");
  for (const auto& k : quantizer_kinds) parse_quantizer_kind(k);
  for (const auto& m : methods) parse_method(m);
}

Json to_json(const Graph& g) {
  Json edges = Json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  return {{"agents", g.num_agents()}, {"edges", edges}};
}

Graph graph_from_json(const Json& j) {
  return guarded("graph", [&] {
    check_keys(j, {"agents", "edges"}, "graph");
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      require(e.is_array() && e.size() == 2, ErrorCode::Configuration, "graph: each edge is a pair of ids");
      edges.emplace_back(e[0].get<AgentId>(), e[1].get<AgentId>());
    }
    return Graph(j.at("agents").get<std::size_t>(), std::move(edges));
  });
}

Json to_json(const Quantizer& q) {
  Json j = {{"kind", to_string(q.kind())}};
  if (q.has_level()) j["delta"] = q.delta();
  if (q.kind() == QuantizerKind::Sparsifier) j["theta"] = q.theta();
  return j;
}

Quantizer quantizer_from_json(const Json& j) {
  return guarded("quantizer", [&] {
    check_keys(j, {"kind", "delta", "theta"}, "quantizer");
    const auto kind = parse_quantizer_kind(j.at("kind").get<std::string>());
    return Quantizer(kind, j.value("delta", 0.0), j.value("theta", 0.0));
  });
}

Json to_json(const FtqcConfig& c) {
  Json j = {{"rho", c.rho},
            {"termination_factor", c.termination_factor},
            {"max_iters", c.max_iters},
            {"activation_prob", c.activation_prob}};
  if (c.threshold) j["threshold"] = *c.threshold;
  return j;
}

FtqcConfig ftqc_config_from_json(const Json& j, FtqcConfig base) {
  return guarded("ftqc", [&] {
    check_keys(j, {"rho", "termination_factor", "threshold", "max_iters", "activation_prob"}, "ftqc");
    read(j, "rho", base.rho);
    read(j, "termination_factor", base.termination_factor);
    read(j, "max_iters", base.max_iters);
    read(j, "activation_prob", base.activation_prob);
    if (j.contains("threshold")) base.threshold = j.at("threshold").get<double>();
    base.validate();
    return base;
  });
}

GraphSpec graph_spec_from_json(const Json& j) {
  return guarded("graph", [&] {
    check_keys(j, {"kind", "agents", "edge_prob", "seed", "edges"}, "graph");
    GraphSpec s;
    if (j.contains("kind")) s.kind = parse_graph_kind(j.at("kind").get<std::string>());
    read(j, "agents", s.agents);
    read(j, "edge_prob", s.edge_prob);
    read(j, "seed", s.seed);
    if (j.contains("edges")) {
      s.edges = graph_from_json({{"agents", s.agents}, {"edges", j.at("edges")}}).edges();
    }
    return s;
  });
}

ProblemSpec problem_spec_from_json(const Json& j) {
  return guarded("problem", [&] {
    check_keys(j,
               {"agents", "points_per_agent", "dim", "class_sep", "label_noise", "seed", "regularization",
                "normalization", "dataset_csv"},
               "problem");
    ProblemSpec s;
    read(j, "agents", s.data.agents);
    read(j, "points_per_agent", s.data.points_per_agent);
    read(j, "dim", s.data.dim);
    read(j, "class_sep", s.data.class_sep);
    read(j, "label_noise", s.data.label_noise);
    read(j, "seed", s.data.seed);
    read(j, "regularization", s.regularization);
    read(j, "dataset_csv", s.dataset_csv);
    if (j.contains("normalization")) {
      const auto n = j.at("normalization").get<std::string>();
      require(n == "sum" || n == "mean", ErrorCode::Configuration, "problem: normalization is 'sum' or 'mean'");
      s.normalization = n == "sum" ? Normalization::Sum : Normalization::Mean;
    }
    require(s.regularization > 0.0, ErrorCode::Configuration, "problem: regularization must be positive");
    return s;
  });
}

SolverSpec solver_spec_from_json(const Json& j) {
  return guarded("solver", [&] {
    check_keys(j,
               {"step_size", "step_factor", "iterations", "activation_probs", "batch_size", "quantizers", "ftqc",
                "warm_start", "zoom", "comm_rounds", "seed", "divergence_threshold"},
               "solver");
    SolverSpec s;
    auto& c = s.config;
    require(!(j.contains("step_size") && j.contains("step_factor")), ErrorCode::Configuration,
            "solver: give either step_size or step_factor");
    if (j.contains("step_size")) {
      c.step_size = j.at("step_size").get<double>();
      s.step_factor.reset();
    }
    if (j.contains("step_factor")) s.step_factor = j.at("step_factor").get<double>();
    read(j, "iterations", c.iterations);
    if (j.contains("activation_probs")) {
      const auto& p = j.at("activation_probs");
      c.activation_probs = p.is_array() ? p.get<std::vector<double>>() : std::vector<double>{p.get<double>()};
    }
    if (j.contains("batch_size")) {
      const auto& b = j.at("batch_size");
      if (b.is_string()) {
        require(b.get<std::string>() == "full", ErrorCode::Configuration, "solver: batch_size is a count or 'full'");
        c.batch_size.reset();
      } else {
        c.batch_size = b.get<std::size_t>();
      }
    }
    if (j.contains("quantizers")) c.quantizers = quantizer_list(j.at("quantizers"));
    if (j.contains("ftqc")) c.ftqc = ftqc_config_from_json(j.at("ftqc"));
    read(j, "warm_start", c.warm_start);
    if (j.contains("zoom")) {
      const auto& z = j.at("zoom");
      check_keys(z, {"activations", "ratio"}, "solver.zoom");
      read(z, "activations", c.zoom.activations);
      read(z, "ratio", c.zoom.ratio);
    }
    read(j, "comm_rounds", c.comm_rounds);
    read(j, "seed", c.seed);
    read(j, "divergence_threshold", c.divergence_threshold);
    if (s.step_factor)
      require(*s.step_factor > 0.0, ErrorCode::Configuration, "solver: step_factor must be positive");
    return s;
  });
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  return guarded("experiment", [&] {
    check_keys(j,
               {"experiment", "problem", "graph", "solver", "ftqc", "replicates", "seed", "output", "threads",
                "deltas", "rhos", "quantizer_kinds", "batch_sizes", "activation_probs", "methods",
                "zoom_fixed_deltas", "vector_dim", "vector_scale", "sparsifier_theta", "eval_iteration"},
               "experiment");
    ExperimentSpec s;
    s.experiment = parse_experiment_id(j.at("experiment").get<std::string>());
    if (j.contains("problem")) s.problem = problem_spec_from_json(j.at("problem"));
    if (j.contains("graph")) s.graph = graph_spec_from_json(j.at("graph"));
    if (j.contains("solver")) s.solver = solver_spec_from_json(j.at("solver"));
    if (j.contains("ftqc")) s.ftqc = ftqc_config_from_json(j.at("ftqc"));
    read(j, "replicates", s.replicates);
    read(j, "seed", s.seed);
    read(j, "output", s.output);
    read(j, "threads", s.threads);
    read(j, "deltas", s.deltas);
    read(j, "rhos", s.rhos);
    read(j, "quantizer_kinds", s.quantizer_kinds);
    read(j, "batch_sizes", s.batch_sizes);
    read(j, "activation_probs", s.activation_probs);
    read(j, "methods", s.methods);
    read(j, "zoom_fixed_deltas", s.zoom_fixed_deltas);
    read(j, "vector_dim", s.vector_dim);
    read(j, "vector_scale", s.vector_scale);
    read(j, "sparsifier_theta", s.sparsifier_theta);
    read(j, "eval_iteration", s.eval_iteration);
    s.validate();
    return s;
  });
}

Json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Configuration, path + ": " + e.what());
  }
}

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

void write_run_csv(const RunRecord& r, std::ostream& out) {
  out << "k,err,spread,cum_comm_rounds,delta_max,e_p_norm,e_g_norm\n";
  for (const auto& row : r.rows) {
    out << row.k << ',' << format_number(row.err) << ',' << format_number(row.spread) << ',' << row.cum_comm_rounds
        << ',' << format_number(row.delta_max) << ',' << format_number(row.e_p_norm) << ','
        << format_number(row.e_g_norm) << '\n';
  }
}

void write_ftqc_trace_csv(const FtqcResult& r, std::ostream& out) {
  out << "round,max_consensus_error,noise_norm,num_terminated\n";
  for (const auto& t : r.trace) {
    out << t.round << ',' << format_number(t.max_consensus_error) << ',' << format_number(t.noise_norm) << ','
        << t.num_terminated << '\n';
  }
}

}  // namespace qnopt
