#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qnopt/config.hpp"
#include "qnopt/error.hpp"

using namespace qnopt;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("graph JSON round trip") {
    const Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
    const Graph back = graph_from_json(to_json(g));
    CHECK(back.num_agents() == 5);
    CHECK(back.edges() == g.edges());
    CHECK(code_of([] { graph_from_json(Json::parse(R"({"agents": 3, "edges": [[0, 1]]})")); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([] { graph_from_json(Json::parse(R"({"agents": 2, "edges": [[0, 1, 2]]})")); }) ==
          ErrorCode::Configuration);
    CHECK(code_of([] { graph_from_json(Json::parse(R"({"agents": 2, "edges": [[0, 1]], "x": 1})")); }) ==
          ErrorCode::Configuration);
  }

  TEST_CASE("quantizer JSON round trip") {
    for (const Quantizer& q : {Quantizer::symmetric(1e-3), Quantizer::floor(0.5), Quantizer::ceil(2.0),
                               Quantizer::sparsifier(0.1), Quantizer::identity()}) {
      const Quantizer back = quantizer_from_json(to_json(q));
      CHECK(back.kind() == q.kind());
      CHECK(back.has_level() == q.has_level());
      if (q.has_level()) CHECK(back.delta() == q.delta());
    }
    CHECK(code_of([] { quantizer_from_json(Json::parse(R"({"kind": "symmetric", "delta": -1})")); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([] { quantizer_from_json(Json::parse(R"({"kind": "dither", "delta": 1})")); }) !=
          ErrorCode::Io);
  }

  TEST_CASE("ftqc config JSON overrides the base") {
    FtqcConfig c;
    c.rho = 2.0;
    c.threshold = 1e-5;
    c.max_iters = 77;
    const FtqcConfig back = ftqc_config_from_json(to_json(c));
    CHECK(back.rho == 2.0);
    CHECK(back.threshold == std::optional<double>(1e-5));
    CHECK(back.max_iters == 77);
    const FtqcConfig partial = ftqc_config_from_json(Json::parse(R"({"rho": 0.5})"), c);
    CHECK(partial.rho == 0.5);
    CHECK(partial.max_iters == 77);
  }

  TEST_CASE("solver spec parsing") {
    const SolverSpec s = solver_spec_from_json(Json::parse(R"({
      "step_factor": 0.5, "iterations": 40, "activation_probs": 0.25, "batch_size": 15,
      "quantizers": {"kind": "floor", "delta": 0.01}, "zoom": {"activations": 10, "ratio": 0.5},
      "comm_rounds": 3, "seed": 9, "warm_start": true, "ftqc": {"rho": 1.0}})"));
    CHECK(s.step_factor == std::optional<double>(0.5));
    CHECK(s.config.iterations == 40);
    CHECK(s.config.activation_probs == std::vector<double>{0.25});
    CHECK(s.config.batch_size == std::optional<std::size_t>(15));
    REQUIRE(s.config.quantizers.size() == 1);
    CHECK(s.config.quantizers[0].kind() == QuantizerKind::Floor);
    CHECK(s.config.zoom.activations == 10);
    CHECK(s.config.zoom.ratio == 0.5);
    CHECK(s.config.comm_rounds == 3);
    CHECK(s.config.seed == 9);
    CHECK(s.config.warm_start);
    CHECK(s.config.ftqc.rho == 1.0);

    const SolverSpec absolute = solver_spec_from_json(Json::parse(R"({"step_size": 0.01, "batch_size": "full"})"));
    CHECK_FALSE(absolute.step_factor.has_value());
    CHECK(absolute.config.step_size == 0.01);
    CHECK_FALSE(absolute.config.batch_size.has_value());

    CHECK(code_of([] { solver_spec_from_json(Json::parse(R"({"step_size": 0.1, "step_factor": 1})")); }) ==
          ErrorCode::Configuration);
    CHECK(code_of([] { solver_spec_from_json(Json::parse(R"({"batch_size": "most"})")); }) ==
          ErrorCode::Configuration);
    CHECK(code_of([] { solver_spec_from_json(Json::parse(R"({"iterations": "ten"})")); }) ==
          ErrorCode::Configuration);
    CHECK(code_of([] { solver_spec_from_json(Json::parse(R"({"stepsize": 0.1})")); }) == ErrorCode::Configuration);
  }

  TEST_CASE("step factor resolves against the upper curvature") {
    ProblemSpec ps;
    ps.data = {.agents = 3, .points_per_agent = 10, .dim = 2, .seed = 3};
    const Problem p = ps.build();
    SolverSpec s;
    s.step_factor = 0.5;
    CHECK(s.resolve(p).step_size == doctest::Approx(0.5 / p.upper_curvature()));
  }

  TEST_CASE("experiment spec parsing and validation") {
    const ExperimentSpec s = experiment_spec_from_json(Json::parse(R"({
      "experiment": "rho_delta_sweep", "replicates": 3, "seed": 4, "rhos": [0.5, 1],
      "deltas": [0.01], "graph": {"kind": "ring", "agents": 6},
      "problem": {"agents": 6, "normalization": "mean"}, "vector_scale": 10})"));
    CHECK(s.experiment == ExperimentId::RhoDeltaSweep);
    CHECK(s.replicates == 3);
    CHECK(s.rhos == std::vector<double>{0.5, 1.0});
    CHECK(s.graph.kind == GraphKind::Ring);
    CHECK(s.problem.normalization == Normalization::Mean);
    CHECK(s.vector_scale == 10.0);

    for (const char* bad : {R"({"experiment": "table_9"})", R"({"experiment": "ftqc_table", "replicates": 0})",
                            R"({"experiment": "ftqc_table", "deltas": [-1]})",
                            R"({"experiment": "ftqc_table", "activation_probs": [1.5]})",
                            R"({"experiment": "ftqc_table", "colour": "red"})",
                            R"({"experiment": "ftqc_table", "problem": {"normalization": "max"}})"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(experiment_spec_from_json(Json::parse(bad)), Error);
    }
    for (ExperimentId id : {ExperimentId::FtqcTable, ExperimentId::RhoDeltaSweep, ExperimentId::QuantizerTable,
                            ExperimentId::MethodComparison, ExperimentId::DeltaTable, ExperimentId::BatchSweep,
                            ExperimentId::AsyncSweep, ExperimentId::ZoomComparison})
      CHECK(parse_experiment_id(to_string(id)) == id);
  }

  TEST_CASE("graph spec with explicit edges") {
    const GraphSpec s = graph_spec_from_json(Json::parse(R"({"agents": 3, "edges": [[0, 1], [1, 2]]})"));
    const Graph g = s.build();
    CHECK(g.num_agents() == 3);
    CHECK(g.num_edges() == 2);
  }

  TEST_CASE("parse_json_file reports missing files and bad syntax") {
    const auto dir = std::filesystem::temp_directory_path() / "qnopt_config_test";
    std::filesystem::create_directories(dir);
    CHECK(code_of([&] { parse_json_file((dir / "missing.json").string()); }) == ErrorCode::Io);
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "{ \"experiment\": ";
    CHECK(code_of([&] { parse_json_file(bad.string()); }) == ErrorCode::Configuration);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, 1e-300, 123456.789, -2.5e-8, 1.0 / 3.0}) CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(3.0) == "3");
  }

  TEST_CASE("CSV headers") {
    RunRecord r;
    r.rows.push_back({0, 1.5, 0.0, 0, 1e-3, 0.0, 0.0});
    std::ostringstream run;
    write_run_csv(r, run);
    CHECK(first_line(run.str()) == "k,err,spread,cum_comm_rounds,delta_max,e_p_norm,e_g_norm");
    CHECK(run.str().find("0,1.5,0,0,0.001,0,0\n") != std::string::npos);

    FtqcResult f;
    f.trace.push_back({1, 0.5, 0.25, 2});
    std::ostringstream trace;
    write_ftqc_trace_csv(f, trace);
    CHECK(trace.str() == "round,max_consensus_error,noise_norm,num_terminated\n1,0.5,0.25,2\n");
  }
}
