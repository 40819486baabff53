#include "qnopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "qnopt/error.hpp"

namespace qnopt {

namespace {

const std::vector<std::string> kCoordinationMetrics = {"consensus_error", "stacked_error", "iterations", "terminated"};

std::vector<double> to_row(const CoordinationSample& s) {
  return {s.consensus_error, s.stacked_error, s.iterations, s.terminated};
}

std::vector<double> or_default(const std::vector<double>& v, std::vector<double> fallback) {
  return v.empty() ? fallback : v;
}

bool is_stochastic(const SolverConfig& c) { return c.batch_size.has_value() || c.min_activation_prob() < 1.0; }

SolverConfig with_level(SolverConfig c, double delta) {
  for (auto& q : c.quantizers) q = q.with_delta(delta);
  return c;
}

std::string key_text(const KeyValue& k) {
  if (const auto* d = std::get_if<double>(&k)) return format_number(*d);
  return std::get<std::string>(k);
}

std::filesystem::path open_output(const ExperimentSpec& spec) {
  std::filesystem::path dir(spec.output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create output directory " + dir.string());
  return dir;
}

template <class Writer>
std::string write_file(const std::filesystem::path& path, Writer&& w) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  w(out);
  return path.string();
}

std::vector<std::vector<double>> curve_samples(const std::vector<RunRecord>& runs, std::size_t k) {
  std::vector<std::vector<double>> s;
  for (const auto& r : runs) s.push_back({k < r.rows.size() ? r.rows[k].err : r.final_error()});
  return s;
}

}  // namespace

SummaryTable::SummaryTable(std::vector<std::string> key_columns, std::vector<std::string> metrics)
    : key_columns_(std::move(key_columns)), metrics_(std::move(metrics)) {}

void SummaryTable::add(std::vector<KeyValue> key, const std::vector<std::vector<double>>& samples) {
  require(key.size() == key_columns_.size(), ErrorCode::InvalidArgument, "summary key has the wrong arity");
  require(!samples.empty(), ErrorCode::InvalidArgument, "summary row needs at least one replicate");
  SummaryRow row;
  row.key = std::move(key);
  row.replicates = samples.size();
  for (std::size_t m = 0; m < metrics_.size(); ++m) {
    std::vector<double> xs;
    for (const auto& s : samples) {
      require(s.size() == metrics_.size(), ErrorCode::InvalidArgument, "summary sample has the wrong arity");
      xs.push_back(s[m]);
    }
    const Stats st = summarize(xs);
    row.mean.push_back(st.mean);
    row.stddev.push_back(st.stddev);
  }
  rows_.push_back(std::move(row));
}

void SummaryTable::sort() {
  std::stable_sort(rows_.begin(), rows_.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.key < b.key; });
}

std::size_t SummaryTable::metric_index(const std::string& metric) const {
  auto it = std::find(metrics_.begin(), metrics_.end(), metric);
  require(it != metrics_.end(), ErrorCode::InvalidArgument, "unknown metric " + metric);
  return static_cast<std::size_t>(it - metrics_.begin());
}

const SummaryRow& SummaryTable::row(const std::vector<KeyValue>& key) const {
  for (const auto& r : rows_)
    if (r.key == key) return r;
  fail(ErrorCode::InvalidArgument, "no summary row with the requested key");
}

double SummaryTable::mean(const std::vector<KeyValue>& key, const std::string& metric) const {
  return row(key).mean[metric_index(metric)];
}

void SummaryTable::write_csv(std::ostream& out) const {
  for (const auto& k : key_columns_) out << k << ',';
  for (const auto& m : metrics_) out << m << "_mean," << m << "_std,";
  out << "replicates\n";
  for (const auto& r : rows_) {
    for (const auto& k : r.key) out << key_text(k) << ',';
    for (std::size_t m = 0; m < metrics_.size(); ++m)
      out << format_number(r.mean[m]) << ',' << format_number(r.stddev[m]) << ',';
    out << r.replicates << '\n';
  }
}

Stats summarize(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

AgentVectors random_vectors(std::size_t agents, std::size_t dim, double scale, std::uint64_t seed,
                            std::uint64_t replicate) {
  Rng rng = make_rng(seed, replicate);
  std::normal_distribution<double> normal(0.0, scale);
  AgentVectors y(agents, dim);
  for (auto& v : y.flat()) v = normal(rng);
  return y;
}

CoordinationSample coordinate_once(const Graph& g, const Quantizer& q, const FtqcConfig& cfg,
                                   const ExperimentSpec& spec, std::uint64_t replicate) {
  const AgentVectors y = random_vectors(g.num_agents(), spec.vector_dim, spec.vector_scale, spec.seed, replicate);
  // Inner activations draw from their own stream so the data stay fixed across configurations.
  Rng rng = make_rng(spec.seed, 0x1000000ULL + replicate);
  const FtqcResult r = FtqcEngine(g, {q}, cfg).run(y, rng);
  return {r.consensus_error, r.stacked_error, static_cast<double>(r.iterations_used),
          r.terminated_naturally ? 1.0 : 0.0};
}

namespace {

SummaryTable coordination_grid(const ExperimentSpec& spec, std::vector<std::string> key_columns,
                               const std::vector<std::vector<KeyValue>>& keys,
                               const std::vector<std::pair<Quantizer, FtqcConfig>>& cells) {
  const Graph g = spec.graph.build();
  const std::size_t reps = static_cast<std::size_t>(spec.replicates);
  const auto samples = parallel_map<CoordinationSample>(cells.size() * reps, spec.threads, [&](std::size_t idx) {
    const auto& [q, cfg] = cells[idx / reps];
    return coordinate_once(g, q, cfg, spec, idx % reps);
  });
  SummaryTable t(std::move(key_columns), kCoordinationMetrics);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < reps; ++r) rows.push_back(to_row(samples[c * reps + r]));
    t.add(keys[c], rows);
  }
  t.sort();
  return t;
}

}  // namespace

SummaryTable run_ftqc_table(const ExperimentSpec& spec) {
  const auto deltas = or_default(spec.deltas, {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0});
  std::vector<std::vector<KeyValue>> keys;
  std::vector<std::pair<Quantizer, FtqcConfig>> cells;
  for (double d : deltas) {
    keys.push_back({d});
    cells.emplace_back(Quantizer::symmetric(d), spec.ftqc);
  }
  return coordination_grid(spec, {"delta"}, keys, cells);
}

SummaryTable run_rho_sweep(const ExperimentSpec& spec) {
  const auto rhos = or_default(spec.rhos, {0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0});
  const auto deltas = or_default(spec.deltas, {1e-6, 1e-4, 1e-2, 1.0});
  std::vector<std::vector<KeyValue>> keys;
  std::vector<std::pair<Quantizer, FtqcConfig>> cells;
  for (double rho : rhos) {
    for (double d : deltas) {
      FtqcConfig cfg = spec.ftqc;
      cfg.rho = rho;
      keys.push_back({rho, d});
      cells.emplace_back(Quantizer::symmetric(d), cfg);
    }
  }
  return coordination_grid(spec, {"rho", "delta"}, keys, cells);
}

double argmin_rho(const SummaryTable& sweep, double delta, const std::string& metric) {
  const std::size_t m = sweep.metric_index(metric);
  double best = NAN, best_value = INFINITY;
  for (const auto& r : sweep.rows()) {
    if (std::get<double>(r.key[1]) != delta) continue;
    if (r.mean[m] < best_value) {
      best_value = r.mean[m];
      best = std::get<double>(r.key[0]);
    }
  }
  require(!std::isnan(best), ErrorCode::InvalidArgument, "delta not present in the sweep");
  return best;
}

SummaryTable run_quantizer_table(const ExperimentSpec& spec) {
  const double delta = spec.deltas.empty() ? 1e-2 : spec.deltas.front();
  std::vector<std::string> kinds = spec.quantizer_kinds;
  if (kinds.empty()) kinds = {"symmetric", "floor", "ceil", "sparsifier", "identity"};
  std::vector<std::vector<KeyValue>> keys;
  std::vector<std::pair<Quantizer, FtqcConfig>> cells;
  for (const auto& name : kinds) {
    const QuantizerKind kind = parse_quantizer_kind(name);
    FtqcConfig cfg = spec.ftqc;
    Quantizer q = Quantizer::identity();
    switch (kind) {
      case QuantizerKind::Identity:
        cfg.threshold = 1e-12;
        break;
      case QuantizerKind::Sparsifier:
        q = Quantizer::sparsifier(spec.sparsifier_theta);
        if (!cfg.threshold) cfg.threshold = cfg.termination_factor * delta;
        break;
      default:
        q = Quantizer(kind, delta, 0.0);
    }
    keys.push_back({to_string(kind)});
    cells.emplace_back(q, cfg);
  }
  return coordination_grid(spec, {"quantizer"}, keys, cells);
}

SolverSetup prepare_solver(const ExperimentSpec& spec) {
  Problem p = spec.problem.build();
  Graph g = spec.graph.build();
  require(g.num_agents() == p.num_agents(), ErrorCode::Configuration, "graph and problem disagree on the agent count");
  OracleSolution sol = solve_centralized(p);
  SolverConfig c = spec.solver.resolve(p);
  return {std::move(p), std::move(g), std::move(sol.x), std::move(c)};
}

MethodComparison run_method_comparison(const ExperimentSpec& spec) {
  const SolverSetup s = prepare_solver(spec);
  const auto deltas = or_default(spec.deltas, {1e-6, 1e-4, 1e-2, 1.0});
  std::vector<Method> baselines;
  if (spec.methods.empty()) {
    baselines = {Method::NearDgd, Method::Dgt};
  } else {
    for (const auto& m : spec.methods)
      if (parse_method(m) != Method::Algorithm2) baselines.push_back(parse_method(m));
  }
  const std::size_t reps = is_stochastic(s.config) ? static_cast<std::size_t>(spec.replicates) : 1;

  // Algorithm 2 first: its coordination cost sets the baselines' budget.
  const auto alg2 = parallel_map<RunRecord>(deltas.size() * reps, spec.threads, [&](std::size_t idx) {
    SolverConfig c = with_level(s.config, deltas[idx / reps]);
    c.seed = mix_seed(spec.seed, idx % reps);
    return run_algorithm2(s.problem, s.graph, s.x_star, c);
  });
  std::vector<int> budget(deltas.size());
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    double rounds = 0.0;
    for (std::size_t r = 0; r < reps; ++r) rounds += alg2[d * reps + r].mean_rounds_per_iteration();
    budget[d] = std::max(1, static_cast<int>(std::lround(rounds / static_cast<double>(reps))));
  }
  const std::size_t cells = deltas.size() * baselines.size();
  const auto base = parallel_map<RunRecord>(cells * reps, spec.threads, [&](std::size_t idx) {
    const std::size_t cell = idx / reps;
    const std::size_t d = cell / baselines.size();
    SolverConfig c = with_level(s.config, deltas[d]);
    c.comm_rounds = budget[d];
    c.seed = mix_seed(spec.seed, idx % reps);
    return run_method(baselines[cell % baselines.size()], s.problem, s.graph, s.x_star, c);
  });

  MethodComparison out{{}, SummaryTable({"delta", "method"}, {"plateau", "final_error", "rounds_per_iteration",
                                                               "diverged"})};
  auto summarize_runs = [&](double delta, Method m, auto first) {
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < reps; ++r) {
      const RunRecord& rec = first[r];
      rows.push_back({rec.plateau(), rec.final_error(), rec.mean_rounds_per_iteration(), rec.diverged ? 1.0 : 0.0});
    }
    out.table.add({delta, to_string(m)}, rows);
  };
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    summarize_runs(deltas[d], Method::Algorithm2, alg2.begin() + static_cast<std::ptrdiff_t>(d * reps));
    for (std::size_t b = 0; b < baselines.size(); ++b)
      summarize_runs(deltas[d], baselines[b],
                     base.begin() + static_cast<std::ptrdiff_t>((d * baselines.size() + b) * reps));
  }
  out.table.sort();
  out.runs.push_back({to_string(Method::Algorithm2), alg2[0]});
  for (std::size_t b = 0; b < baselines.size(); ++b) out.runs.push_back({to_string(baselines[b]), base[b * reps]});
  return out;
}

namespace {

SweepResult sweep_solver(const ExperimentSpec& spec, const std::string& key, const std::vector<double>& values,
                         const std::function<void(SolverConfig&, double)>& apply) {
  const SolverSetup s = prepare_solver(spec);
  SolverConfig base = s.config;
  if (!spec.deltas.empty()) base = with_level(base, spec.deltas.front());
  const std::size_t reps = static_cast<std::size_t>(spec.replicates);
  const auto runs = parallel_map<RunRecord>(values.size() * reps, spec.threads, [&](std::size_t idx) {
    SolverConfig c = base;
    apply(c, values[idx / reps]);
    c.seed = mix_seed(spec.seed, idx % reps);
    return run_algorithm2(s.problem, s.graph, s.x_star, c);
  });
  const std::size_t eval = static_cast<std::size_t>(std::min(spec.eval_iteration, base.iterations));
  SweepResult out{SummaryTable({key}, {"plateau", "final_error", "error_at_eval"}), SummaryTable({key, "k"}, {"err"})};
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<RunRecord> group(runs.begin() + static_cast<std::ptrdiff_t>(v * reps),
                                 runs.begin() + static_cast<std::ptrdiff_t>((v + 1) * reps));
    std::vector<std::vector<double>> rows;
    for (const auto& r : group)
      rows.push_back({r.plateau(), r.final_error(), eval < r.rows.size() ? r.rows[eval].err : r.final_error()});
    out.table.add({values[v]}, rows);
    for (std::size_t k = 0; k <= static_cast<std::size_t>(base.iterations); ++k)
      out.curves.add({values[v], static_cast<double>(k)}, curve_samples(group, k));
  }
  out.table.sort();
  out.curves.sort();
  return out;
}

}  // namespace

SweepResult run_batch_sweep(const ExperimentSpec& spec) {
  std::vector<double> values;
  for (auto b : spec.batch_sizes) values.push_back(static_cast<double>(b));
  if (values.empty()) values = {1, 15, 75, 150};
  return sweep_solver(spec, "batch", values,
                      [](SolverConfig& c, double b) { c.batch_size = static_cast<std::size_t>(b); });
}

SweepResult run_async_sweep(const ExperimentSpec& spec) {
  const auto probs = or_default(spec.activation_probs, {0.25, 0.5, 1.0});
  return sweep_solver(spec, "p", probs, [](SolverConfig& c, double p) { c.activation_probs = {p}; });
}

BatchAsyncSweeps run_batch_and_async_sweeps(const ExperimentSpec& spec) {
  return {run_batch_sweep(spec), run_async_sweep(spec)};
}

std::vector<NamedRun> run_zoom_comparison(const ExperimentSpec& spec) {
  const SolverSetup s = prepare_solver(spec);
  SolverConfig zoom = s.config;
  if (!spec.deltas.empty()) zoom = with_level(zoom, spec.deltas.front());
  const auto fixed = or_default(spec.zoom_fixed_deltas, {1e-2, 1e-3, 1e-4});
  zoom.seed = mix_seed(spec.seed, 0);
  auto runs = parallel_map<NamedRun>(fixed.size() + 1, spec.threads, [&](std::size_t idx) {
    if (idx == 0) return NamedRun{to_string(Method::Algorithm3), run_algorithm3(s.problem, s.graph, s.x_star, zoom)};
    SolverConfig c = with_level(zoom, fixed[idx - 1]);
    return NamedRun{to_string(Method::Algorithm2) + "@" + format_number(fixed[idx - 1]),
                    run_algorithm2(s.problem, s.graph, s.x_star, c)};
  });
  return runs;
}

void write_zoom_csv(const std::vector<NamedRun>& runs, std::ostream& out) {
  out << "label,k,err,cum_comm_rounds,delta_max\n";
  for (const auto& [label, rec] : runs)
    for (const auto& row : rec.rows)
      out << label << ',' << row.k << ',' << format_number(row.err) << ',' << row.cum_comm_rounds << ','
          << format_number(row.delta_max) << '\n';
}

Lemma1Fit fit_lemma1_constants(const FtqcResult& traced, const Graph& g, std::size_t dim, double delta) {
  require(!traced.trace.empty(), ErrorCode::InvalidArgument, "fit needs a traced coordination run");
  const double floor_err = std::max(traced.trace.back().max_consensus_error, 1e-300);
  // Transient: rounds well above the terminal error.
  std::vector<double> ls, logs;
  for (const auto& t : traced.trace) {
    if (t.max_consensus_error > 10.0 * floor_err) {
      ls.push_back(static_cast<double>(t.round));
      logs.push_back(std::log(t.max_consensus_error));
    }
  }
  double mu = 0.5, amplitude = traced.trace.front().max_consensus_error;
  if (ls.size() >= 2) {
    double ml = 0, my = 0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      ml += ls[i];
      my += logs[i];
    }
    ml /= static_cast<double>(ls.size());
    my /= static_cast<double>(ls.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      sxy += (ls[i] - ml) * (logs[i] - my);
      sxx += (ls[i] - ml) * (ls[i] - ml);
    }
    if (sxx > 0.0) {
      mu = std::clamp(std::exp(sxy / sxx), 1e-6, 1.0 - 1e-6);
      amplitude = std::exp(my - std::log(mu) * ml);
    }
  }
  const double bound = noise_bound(g, dim, delta);
  const double c = bound > 0.0 ? floor_err * (1.0 - mu) / bound : 1.0;
  return {c, mu, amplitude / c, ls.size()};
}

std::vector<std::string> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = open_output(spec);
  std::vector<std::string> written;
  auto table = [&](const char* name, const SummaryTable& t) {
    written.push_back(write_file(dir / name, [&](std::ostream& o) { t.write_csv(o); }));
  };
  switch (spec.experiment) {
    case ExperimentId::FtqcTable: table("ftqc_table.csv", run_ftqc_table(spec)); break;
    case ExperimentId::RhoDeltaSweep: {
      const SummaryTable t = run_rho_sweep(spec);
      table("rho_delta_sweep.csv", t);
      written.push_back(write_file(dir / "rho_argmin.csv", [&](std::ostream& o) {
        o << "delta,argmin_rho_consensus_error,argmin_rho_iterations\n";
        std::vector<double> deltas;
        for (const auto& r : t.rows()) deltas.push_back(std::get<double>(r.key[1]));
        std::sort(deltas.begin(), deltas.end());
        deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
        for (double d : deltas)
          o << format_number(d) << ',' << format_number(argmin_rho(t, d, "consensus_error")) << ','
            << format_number(argmin_rho(t, d, "iterations")) << '\n';
      }));
      break;
    }
    case ExperimentId::QuantizerTable: table("quantizer_table.csv", run_quantizer_table(spec)); break;
    case ExperimentId::MethodComparison:
    case ExperimentId::DeltaTable: {
      ExperimentSpec s = spec;
      if (s.experiment == ExperimentId::DeltaTable && s.methods.empty()) s.methods = {"near-dgd"};
      const MethodComparison mc = run_method_comparison(s);
      table(s.experiment == ExperimentId::DeltaTable ? "delta_table.csv" : "method_comparison.csv", mc.table);
      if (s.experiment == ExperimentId::MethodComparison)
        for (const auto& [label, rec] : mc.runs)
          written.push_back(
              write_file(dir / ("run_" + label + ".csv"), [&](std::ostream& o) { write_run_csv(rec, o); }));
      break;
    }
    case ExperimentId::BatchSweep: {
      const SweepResult r = run_batch_sweep(spec);
      table("batch_sweep.csv", r.table);
      table("batch_curves.csv", r.curves);
      break;
    }
    case ExperimentId::AsyncSweep: {
      const SweepResult r = run_async_sweep(spec);
      table("async_sweep.csv", r.table);
      table("async_curves.csv", r.curves);
      break;
    }
    case ExperimentId::ZoomComparison: {
      const auto runs = run_zoom_comparison(spec);
      written.push_back(write_file(dir / "zoom_comparison.csv", [&](std::ostream& o) { write_zoom_csv(runs, o); }));
      break;
    }
  }
  return written;
}

}  // namespace qnopt
