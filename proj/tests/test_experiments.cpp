// Benchmark-scale checks of the experiment drivers: N=10, n=10, ER(10, 0.4, 7).

#include <doctest.h>

#include <cmath>

#include "qnopt/harness.hpp"

using namespace qnopt;

namespace {

// Coordination tables use rho = 0.3; the quantizer table uses rho = 1.
ExperimentSpec coordination(double rho = 0.3) {
  ExperimentSpec s;
  s.replicates = 20;
  s.ftqc.rho = rho;
  return s;
}

ExperimentSpec logistic(double delta) {
  ExperimentSpec s;
  s.solver.config.iterations = 300;
  s.solver.config.ftqc.rho = 0.3;
  s.solver.config.quantizers = {Quantizer::symmetric(delta)};
  return s;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("coordination table: the 1e-3 row sits near the reference value") {
    ExperimentSpec s = coordination();
    s.deltas = {1e-3};
    const double err = run_ftqc_table(s).mean({1e-3}, "consensus_error");
    CHECK(err >= 0.5 * 2.87e-3);
    CHECK(err <= 5.0 * 2.87e-3);
  }

  TEST_CASE("default coordination grid spans nine decades with monotone columns") {
    const SummaryTable t = run_ftqc_table(coordination());
    REQUIRE(t.rows().size() == 9);
    for (std::size_t r = 1; r < t.rows().size(); ++r) {
      CHECK(t.rows()[r].mean[0] >= t.rows()[r - 1].mean[0]);
      CHECK(t.rows()[r].mean[2] <= t.rows()[r - 1].mean[2]);
    }
  }

  TEST_CASE("rho sweep: interior minimum of the iteration count") {
    ExperimentSpec s = coordination();
    s.deltas = {1e-3};
    s.rhos = {0.01, 0.3, 10.0};
    const SummaryTable t = run_rho_sweep(s);
    CHECK(t.rows().size() == 3);
    const double mid = t.mean({0.3, 1e-3}, "iterations");
    CHECK(mid < t.mean({0.01, 1e-3}, "iterations"));
    CHECK(mid < t.mean({10.0, 1e-3}, "iterations"));
  }

  TEST_CASE("rho sweep: one row per cell, error grows with delta at fixed rho") {
    ExperimentSpec s = coordination();
    s.replicates = 5;
    const SummaryTable t = run_rho_sweep(s);
    CHECK(t.rows().size() == 11 * 4);
    for (double rho : {0.1, 0.3, 1.0, 5.0}) {
      double prev = 0.0;
      for (double d : {1e-6, 1e-4, 1e-2, 1.0}) {
        const double e = t.mean({rho, d}, "consensus_error");
        CHECK(e > prev);
        prev = e;
      }
    }
  }

  TEST_CASE("quantizer table: directed quantizers cost about twice the symmetric error") {
    ExperimentSpec s = coordination(1.0);
    s.deltas = {1e-2};
    const SummaryTable t = run_quantizer_table(s);
    auto err = [&](const char* k) { return t.mean({std::string(k)}, "consensus_error"); };
    const double ratio = err("floor") / err("symmetric");
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 4.0);
    CHECK(std::fabs(err("ceil") / err("floor") - 1.0) <= 0.2);
    CHECK(err("identity") <= 1e-8);
  }

  TEST_CASE("method comparison: exact messages bring every method to the minimizer") {
    ExperimentSpec s = logistic(1e-2);
    s.solver.config.quantizers = {Quantizer::identity()};
    s.solver.config.ftqc.threshold = 1e-13;
    s.solver.config.comm_rounds = 10;
    const SolverSetup setup = prepare_solver(s);
    for (Method m : {Method::Algorithm2, Method::NearDgd, Method::Dgt}) {
      SolverConfig cfg = setup.config;
      // Near-DGD keeps a bias that decays with t; give it enough mixing to sit below 1e-6.
      if (m == Method::NearDgd) cfg.comm_rounds = 200;
      const RunRecord r = run_method(m, setup.problem, setup.graph, setup.x_star, cfg);
      CAPTURE(to_string(m));
      CHECK(r.final_error() <= 1e-6);
    }
  }

  TEST_CASE("method comparison: Algorithm 2 below Near-DGD at matched budget") {
    ExperimentSpec s = logistic(1e-2);
    s.deltas = {1e-6, 1e-4, 1e-2};
    s.methods = {"near-dgd"};
    const MethodComparison mc = run_method_comparison(s);
    for (double d : s.deltas) {
      CAPTURE(d);
      CHECK(mc.table.mean({d, std::string("alg2")}, "plateau") < mc.table.mean({d, std::string("near-dgd")}, "plateau"));
    }
    REQUIRE(mc.runs.size() == 2);
    for (const auto& run : mc.runs)
      for (std::size_t k = 1; k < run.record.rows.size(); ++k)
        CHECK(run.record.rows[k].cum_comm_rounds > run.record.rows[k - 1].cum_comm_rounds);
  }

  TEST_CASE("full batches still plateau at the quantization floor") {
    ExperimentSpec s = logistic(1e-2);
    s.replicates = 2;
    s.batch_sizes = {150};
    const SweepResult r = run_batch_sweep(s);
    CHECK(r.table.mean({150.0}, "plateau") > 1e-3);
    CHECK(r.curves.rows().size() == 301);
  }

  TEST_CASE("zoom comparison: accounting and dominance over fixed levels") {
    ExperimentSpec s = logistic(1e-2);
    s.zoom_fixed_deltas = {1e-2, 1e-3, 1e-4};
    const auto runs = run_zoom_comparison(s);
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].label == "alg3");
    const RunRecord& z = runs[0].record;
    for (const auto& run : runs)
      for (std::size_t k = 1; k < run.record.rows.size(); ++k)
        CHECK(run.record.rows[k].cum_comm_rounds > run.record.rows[k - 1].cum_comm_rounds);
    // Eventually below every fixed run whose level is at least the initial one.
    CHECK(z.final_error() < runs[1].record.plateau());

    // Reaches the 1e-4 run's plateau after fewer cumulative rounds than that run needs.
    const RunRecord& fine = runs[3].record;
    const double target = fine.plateau();
    auto rounds_to = [&](const RunRecord& r) {
      for (const auto& row : r.rows)
        if (row.err <= target) return row.cum_comm_rounds;
      return r.rows.back().cum_comm_rounds + 1;
    };
    CHECK(rounds_to(z) < rounds_to(fine));
  }
}
