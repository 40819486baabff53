// qnopt: command-line front end for the simulator.
//   qnopt run <spec.json>
//   qnopt ftqc --delta D --rho R --graph <file|kind>
//   qnopt solve --method {alg2|alg3|near-dgd|dgt} --config <file>
//   qnopt sweep --param <name> --values <list>
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "qnopt/config.hpp"
#include "qnopt/error.hpp"
#include "qnopt/harness.hpp"
#include "qnopt/kernels.hpp"

using namespace qnopt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::NumericInput:
    case ErrorCode::ConvergenceFailure:
    case ErrorCode::GenerationFailure:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> replicates;
  unsigned threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory (default: CSV on stdout)");
  app->add_option("--replicates", c.replicates, "Monte-Carlo replicates")->check(CLI::PositiveNumber);
  app->add_option("--threads", c.threads, "Worker threads (0: all cores)");
}

void apply_common(ExperimentSpec& s, const Common& c) {
  if (c.seed) s.seed = *c.seed;
  if (c.replicates) s.replicates = *c.replicates;
  if (!c.out.empty()) s.output = c.out;
  s.threads = c.threads;
}

// Writes through `fn` to <out>/<name>, or to stdout when no directory is given.
template <class F>
void emit(const std::string& out, const std::string& name, F&& fn) {
  if (out.empty()) {
    fn(std::cout);
    return;
  }
  std::filesystem::create_directories(out);
  const auto path = std::filesystem::path(out) / name;
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path.string());
  fn(f);
  std::cerr << "wrote " << path.string() << '\n';
}

// A solve/sweep config file holds the problem, graph, solver and ftqc
// sections of an experiment spec; the experiment id is optional.
ExperimentSpec load_partial_spec(const std::string& path, ExperimentId fallback) {
  Json j = path.empty() ? Json::object() : parse_json_file(path);
  if (!j.contains("experiment")) j["experiment"] = to_string(fallback);
  return experiment_spec_from_json(j);
}

Graph graph_argument(const std::string& arg, std::size_t agents, double edge_prob, std::uint64_t seed) {
  if (std::filesystem::exists(arg)) return graph_from_json(parse_json_file(arg));
  return generate_graph(parse_graph_kind(arg), agents, edge_prob, seed);
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const auto& v : raw) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == v.size() && !v.empty(), ErrorCode::Configuration, "not a number: '" + v + "'");
    out.push_back(x);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed learning simulator with quantized communication"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qnopt 1.0");
  std::string kernels;
  app.add_option("--kernels", kernels, "Force a kernel backend")->check(CLI::IsMember({"scalar", "avx2"}));

  Common common;

  auto* run = app.add_subcommand("run", "Execute an experiment spec");
  std::string spec_path;
  run->add_option("spec", spec_path, "Experiment spec JSON")->required();
  add_common(run, common);

  auto* ftqc = app.add_subcommand("ftqc", "Single finite-time quantized coordination run");
  double delta = 1e-3, rho = 0.3, scale = 100.0, theta = 0.1, edge_prob = 0.4;
  std::optional<double> threshold;
  std::string graph_arg = "erdos_renyi", qkind = "symmetric";
  std::size_t agents = 10, dim = 10;
  std::uint64_t graph_seed = 7;
  ftqc->add_option("--delta", delta, "Quantization level")->check(CLI::PositiveNumber);
  ftqc->add_option("--rho", rho, "ADMM penalty")->check(CLI::PositiveNumber);
  ftqc->add_option("--graph", graph_arg, "Graph JSON file or kind (ring|complete|erdos_renyi)");
  ftqc->add_option("--agents", agents, "Number of agents for generated graphs");
  ftqc->add_option("--edge-prob", edge_prob, "Erdos-Renyi edge probability");
  ftqc->add_option("--graph-seed", graph_seed, "Graph generator seed");
  ftqc->add_option("--dim", dim, "Vector dimension");
  ftqc->add_option("--scale", scale, "Standard deviation of the random vectors");
  ftqc->add_option("--quantizer", qkind, "identity|symmetric|floor|ceil|sparsifier");
  ftqc->add_option("--theta", theta, "Sparsifier threshold");
  ftqc->add_option("--threshold", threshold, "Explicit termination threshold");
  add_common(ftqc, common);

  auto* solve = app.add_subcommand("solve", "Run one optimization method");
  std::string method_name, config_path;
  std::optional<int> iterations;
  solve->add_option("--method", method_name, "alg2|alg3|near-dgd|dgt")->required();
  solve->add_option("--config", config_path, "Config JSON (problem, graph, solver sections)");
  solve->add_option("--iterations", iterations, "Override the outer iteration count");
  add_common(solve, common);

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter");
  std::string param;
  std::vector<std::string> raw_values;
  std::string sweep_config;
  sweep->add_option("--param", param, "delta|rho|quantizer|batch|p|method_delta")->required();
  sweep->add_option("--values", raw_values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--config", sweep_config, "Config JSON (problem, graph, solver, ftqc sections)");
  add_common(sweep, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (!kernels.empty()) kernels::set_backend(kernels == "avx2" ? kernels::Backend::Avx2 : kernels::Backend::Scalar);

    if (*run) {
      ExperimentSpec s = experiment_spec_from_json(parse_json_file(spec_path));
      apply_common(s, common);
      for (const auto& path : run_experiment(s)) std::cout << path << '\n';
      return 0;
    }

    if (*ftqc) {
      const Graph g = graph_argument(graph_arg, agents, edge_prob, graph_seed);
      const QuantizerKind kind = parse_quantizer_kind(qkind);
      Quantizer q = kind == QuantizerKind::Sparsifier ? Quantizer::sparsifier(theta)
                    : kind == QuantizerKind::Identity  ? Quantizer::identity()
                                                       : Quantizer(kind, delta, 0.0);
      FtqcConfig cfg;
      cfg.rho = rho;
      cfg.threshold = threshold;
      if (!q.has_level() && !cfg.threshold) cfg.threshold = kind == QuantizerKind::Identity ? 1e-12 : delta;
      const std::uint64_t seed = common.seed.value_or(1);
      if (common.replicates) {
        ExperimentSpec s;
        s.seed = seed;
        s.vector_dim = dim;
        s.vector_scale = scale;
        const auto n = static_cast<std::size_t>(*common.replicates);
        const auto samples = parallel_map<CoordinationSample>(
            n, common.threads, [&](std::size_t r) { return coordinate_once(g, q, cfg, s, r); });
        std::vector<std::vector<double>> rows;
        for (const auto& c : samples) rows.push_back({c.consensus_error, c.stacked_error, c.iterations, c.terminated});
        SummaryTable t({"delta"}, {"consensus_error", "stacked_error", "iterations", "terminated"});
        t.add({q.has_level() ? q.delta() : 0.0}, rows);
        emit(common.out, "ftqc_summary.csv", [&](std::ostream& o) { t.write_csv(o); });
        return 0;
      }
      cfg.record_trace = true;
      const AgentVectors y = random_vectors(g.num_agents(), dim, scale, seed, 0);
      Rng rng = make_rng(seed, 0x1000000ULL);
      const FtqcResult r = FtqcEngine(g, {q}, cfg).run(y, rng);
      emit(common.out, "ftqc_trace.csv", [&](std::ostream& o) { write_ftqc_trace_csv(r, o); });
      auto summary = [&](std::ostream& o) {
        o << "iterations_used,terminated_naturally,consensus_error,stacked_error,noise_bound\n"
          << r.iterations_used << ',' << (r.terminated_naturally ? 1 : 0) << ',' << format_number(r.consensus_error)
          << ',' << format_number(r.stacked_error) << ','
          << format_number(q.kind() == QuantizerKind::Symmetric ? noise_bound(g, dim, q.delta()) : NAN) << '\n';
      };
      // Without --out the trace owns stdout and the summary goes to stderr.
      if (common.out.empty())
        summary(std::cerr);
      else
        emit(common.out, "ftqc_summary.csv", summary);
      return 0;
    }

    if (*solve) {
      const Method m = parse_method(method_name);
      ExperimentSpec s = load_partial_spec(config_path, ExperimentId::MethodComparison);
      apply_common(s, common);
      SolverSetup setup = prepare_solver(s);
      if (iterations) setup.config.iterations = *iterations;
      if (common.seed) setup.config.seed = *common.seed;
      const RunRecord r = run_method(m, setup.problem, setup.graph, setup.x_star, setup.config);
      emit(common.out, "run_" + to_string(m) + ".csv", [&](std::ostream& o) { write_run_csv(r, o); });
      if (r.diverged) std::cerr << "run diverged at k=" << r.rows.back().k << '\n';
      return 0;
    }

    if (*sweep) {
      ExperimentSpec s = load_partial_spec(sweep_config, ExperimentId::FtqcTable);
      apply_common(s, common);
      SummaryTable table({"none"}, {});
      if (param == "quantizer") {
        s.quantizer_kinds = raw_values;
        table = run_quantizer_table(s);
      } else {
        const auto values = parse_values(raw_values);
        if (param == "delta") {
          s.deltas = values;
          table = run_ftqc_table(s);
        } else if (param == "rho") {
          s.rhos = values;
          table = run_rho_sweep(s);
        } else if (param == "batch") {
          s.batch_sizes.clear();
          for (double v : values) {
            require(v >= 1.0 && v == std::floor(v), ErrorCode::Configuration, "batch sizes are positive integers");
            s.batch_sizes.push_back(static_cast<std::size_t>(v));
          }
          table = run_batch_sweep(s).table;
        } else if (param == "p") {
          s.activation_probs = values;
          table = run_async_sweep(s).table;
        } else if (param == "method_delta") {
          s.deltas = values;
          table = run_method_comparison(s).table;
        } else {
          fail(ErrorCode::Configuration, "unknown sweep parameter '" + param + "'");
        }
      }
      emit(common.out, "sweep_" + param + ".csv", [&](std::ostream& o) { table.write_csv(o); });
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
