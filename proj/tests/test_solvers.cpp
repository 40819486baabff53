#include <doctest.h>

#include <cmath>

#include "qnopt/error.hpp"
#include "qnopt/ftqc.hpp"
#include "qnopt/kernels.hpp"
#include "qnopt/solvers.hpp"

using namespace qnopt;

namespace {

Problem small_logistic(std::size_t agents = 4) {
  ClassificationParams cp{.agents = agents, .points_per_agent = 20, .dim = 3, .seed = 5};
  return Problem::logistic(generate_classification(cp), 0.075);
}

Problem small_quadratic() {
  AgentVectors c(3, 2);
  const double centers[3][2] = {{1.0, -2.0}, {0.5, 4.0}, {-3.0, 1.0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t d = 0; d < 2; ++d) c.row(i)[d] = centers[i][d];
  return quadratic_fixture(c, {1.0, 2.0, 4.0});
}

SolverConfig exact_config(const Problem& p, double factor = 1.0) {
  SolverConfig c;
  c.step_size = factor / p.upper_curvature();
  c.quantizers = {Quantizer::identity()};
  c.ftqc.threshold = 1e-13;
  c.ftqc.max_iters = 200000;
  return c;
}

// x+ = mean_i (x - alpha grad f_i(x)), the projected gradient step on the consensus set.
std::vector<double> projected_step(const Problem& p, std::span<const double> x, double alpha) {
  std::vector<double> out(p.dim(), 0.0), g(p.dim());
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    p.local_gradient(i, x, g);
    for (std::size_t d = 0; d < p.dim(); ++d) out[d] += (x[d] - alpha * g[d]) / static_cast<double>(p.num_agents());
  }
  return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(kernels::squared_distance(a, b));
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("contraction constants: worked examples") {
    const auto c = theoretical_constants(1.0, 10.0, 0.1, 1.0);
    CHECK(c.zeta == doctest::Approx(0.9));
    CHECK(c.chi == doctest::Approx(0.9));
    const auto h = theoretical_constants(1.0, 10.0, 0.1, 0.5);
    CHECK(h.chi == doctest::Approx(std::sqrt(1.0 - 0.19 * 0.5)));
    CHECK(h.chi == doctest::Approx(0.9513).epsilon(1e-4));
    CHECK_THROWS_AS(theoretical_constants(1.0, 10.0, 0.2, 1.0), Error);
    CHECK_THROWS_AS(theoretical_constants(1.0, 10.0, 0.1, 0.0), Error);
  }

  TEST_CASE("validation rejects out-of-range settings") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    auto expect_config_error = [&](const SolverConfig& c, Method m) {
      try {
        validate(c, p, g, m);
        FAIL("accepted an invalid config");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Configuration);
      }
    };
    SolverConfig ok = exact_config(p);
    CHECK_NOTHROW(validate(ok, p, g, Method::Algorithm2));

    SolverConfig c = ok;
    c.step_size = 2.0 / p.upper_curvature();
    expect_config_error(c, Method::Algorithm2);
    c = ok;
    c.activation_probs = {0.0};
    expect_config_error(c, Method::Algorithm2);
    c = ok;
    c.activation_probs = {0.5, 0.5};
    expect_config_error(c, Method::Algorithm2);
    c = ok;
    c.batch_size = 21;
    expect_config_error(c, Method::Algorithm2);
    c = ok;
    c.ftqc.threshold.reset();
    expect_config_error(c, Method::Algorithm2);
    c = ok;
    c.comm_rounds = 0;
    expect_config_error(c, Method::NearDgd);
    c = ok;
    c.quantizers = {Quantizer::symmetric(1e-2)};
    c.zoom.ratio = 1.0;
    expect_config_error(c, Method::Algorithm3);
    c = ok;
    expect_config_error(c, Method::Algorithm3);  // identity has no level to zoom
    c = ok;
    c.iterations = 0;
    expect_config_error(c, Method::Dgt);
  }

  TEST_CASE("method names round-trip") {
    for (Method m : {Method::Algorithm2, Method::Algorithm3, Method::NearDgd, Method::Dgt})
      CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("sgd"), Error);
  }

  TEST_CASE("exact coordination reduces Algorithm 2 to projected gradient descent") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 30;
    const RunRecord r = run_algorithm2(p, g, x_star, cfg);
    REQUIRE(r.rows.size() == 31);
    CHECK(r.coordination_cap_hits == 0);

    std::vector<double> x(p.dim(), 0.0);
    for (int k = 0; k < 30; ++k) x = projected_step(p, x, cfg.step_size);
    for (std::size_t i = 0; i < p.num_agents(); ++i) CHECK(distance(r.final_x.row(i), x) <= 1e-9);
  }

  TEST_CASE("property: one exact step contracts by at most zeta") {
    const Problem p = small_quadratic();
    const Graph g = generate_graph(GraphKind::Complete, 3, 0.0, 1);
    const auto x_star = *p.analytic_solution();
    for (double factor : {0.2, 0.7, 1.0, 1.6}) {
      SolverConfig cfg = exact_config(p, factor);
      cfg.iterations = 25;
      const double zeta = theoretical_constants(p, cfg).zeta;
      const RunRecord r = run_algorithm2(p, g, x_star, cfg);
      for (std::size_t k = 1; k < r.rows.size(); ++k) {
        if (r.rows[k - 1].err < 1e-9) break;
        CHECK(r.rows[k].err <= (zeta + 1e-8) * r.rows[k - 1].err);
      }
    }
  }

  TEST_CASE("quadratic fixture: exact Algorithm 2 converges to the closed-form minimizer") {
    const Problem p = small_quadratic();
    const Graph g = generate_graph(GraphKind::Ring, 3, 0.0, 1);
    const auto x_star = *p.analytic_solution();
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 200;
    const RunRecord r = run_algorithm2(p, g, x_star, cfg);
    CHECK(r.final_error() <= 1e-9);
  }

  TEST_CASE("property: coordination error obeys the stacked/max norm relation") {
    const Problem p = small_logistic(6);
    const Graph g = generate_graph(GraphKind::ErdosRenyi, 6, 0.6, 3);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.quantizers = {Quantizer::symmetric(1e-2)};
    cfg.ftqc.threshold.reset();
    cfg.iterations = 40;
    cfg.activation_probs = {0.7};
    cfg.seed = 11;
    const RunRecord r = run_algorithm2(p, g, x_star, cfg);
    const double root_n = std::sqrt(6.0);
    for (const auto& row : r.rows) {
      CHECK(row.e_p_norm <= root_n * row.consensus_error * (1.0 + 1e-12) + 1e-15);
      CHECK(row.e_p_norm >= row.consensus_error * (1.0 - 1e-12));
    }
  }

  TEST_CASE("Near-DGD on a complete graph with one exact round is the projected step") {
    const Problem p = small_logistic(5);
    const Graph g = generate_graph(GraphKind::Complete, 5, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 15;
    cfg.comm_rounds = 1;
    const RunRecord r = run_near_dgd(p, g, x_star, cfg);
    std::vector<double> x(p.dim(), 0.0);
    for (int k = 0; k < 15; ++k) x = projected_step(p, x, cfg.step_size);
    for (std::size_t i = 0; i < 5; ++i) CHECK(distance(r.final_x.row(i), x) <= 1e-12);
    CHECK(r.rows.back().cum_comm_rounds == 15);
  }

  TEST_CASE("Near-DGD: more mixing rounds give a lower plateau") {
    const Problem p = small_logistic(6);
    const Graph g = generate_graph(GraphKind::Ring, 6, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    double previous = INFINITY;
    for (int t : {1, 5, 20}) {
      SolverConfig cfg = exact_config(p);
      cfg.iterations = 400;
      cfg.comm_rounds = t;
      const double plateau = run_near_dgd(p, g, x_star, cfg).plateau();
      CHECK(plateau < previous);
      previous = plateau;
    }
  }

  TEST_CASE("identity quantized mixing round multiplies by the Metropolis matrix") {
    const Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {1, 3}});
    const MixingMatrix w = metropolis_weights(g);
    AgentVectors v(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      v.row(i)[0] = static_cast<double>(i);
      v.row(i)[1] = 1.0 - 0.5 * static_cast<double>(i * i);
    }
    const AgentVectors before = v;
    const Quantizer q[1] = {Quantizer::identity()};
    quantized_mixing_round(w, g, q, v);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t d = 0; d < 2; ++d) {
        double expect = 0.0;
        for (std::size_t j = 0; j < 4; ++j) expect += w(i, j) * before.row(j)[d];
        CHECK(v.row(i)[d] == doctest::Approx(expect).epsilon(1e-14));
      }
  }

  TEST_CASE("gradient tracking with exact messages converges to the minimizer") {
    const Problem p = small_logistic(6);
    const Graph g = generate_graph(GraphKind::Ring, 6, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p, 0.5);
    cfg.iterations = 3000;
    cfg.comm_rounds = 1;
    const RunRecord r = run_dgt(p, g, x_star, cfg);
    CHECK_FALSE(r.diverged);
    CHECK(r.final_error() <= 1e-6);
  }

  TEST_CASE("gradient tracking keeps the average of s equal to the average gradient") {
    // With exact doubly-stochastic mixing, sum_i s_i == sum_i grad f_i(x_i) at
    // every step; after one step x_1 = W x_0 - alpha s_0 so the network mean
    // moves by -alpha * mean gradient at x_0.
    const Problem p = small_logistic(4);
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 1;
    const RunRecord r = run_dgt(p, g, x_star, cfg);
    const auto mean = network_mean(r.final_x);
    std::vector<double> expect(p.dim(), 0.0);
    std::vector<double> zero(p.dim(), 0.0);
    expect = projected_step(p, zero, cfg.step_size);
    CHECK(distance(mean, expect) <= 1e-13);
  }

  TEST_CASE("inactive agents hold their previous estimate") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.activation_probs = {1e-12};
    cfg.iterations = 10;
    const RunRecord r = run_algorithm2(p, g, x_star, cfg);
    for (const auto& row : r.rows) CHECK(row.err == doctest::Approx(r.rows.front().err).epsilon(1e-12));
  }

  TEST_CASE("runs are deterministic in the seed") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.quantizers = {Quantizer::symmetric(1e-3)};
    cfg.ftqc.threshold.reset();
    cfg.activation_probs = {0.6};
    cfg.batch_size = 5;
    cfg.iterations = 30;
    cfg.seed = 4;
    const RunRecord a = run_algorithm2(p, g, x_star, cfg);
    const RunRecord b = run_algorithm2(p, g, x_star, cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(a.rows[k].err == b.rows[k].err);
      CHECK(a.rows[k].cum_comm_rounds == b.rows[k].cum_comm_rounds);
    }
    cfg.seed = 5;
    const RunRecord c = run_algorithm2(p, g, x_star, cfg);
    CHECK(c.final_error() != a.final_error());
  }

  TEST_CASE("mini-batch error is zero for full gradients and positive otherwise") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 10;
    const RunRecord full = run_algorithm2(p, g, x_star, cfg);
    for (const auto& row : full.rows) CHECK(row.e_g_norm == 0.0);
    cfg.batch_size = 3;
    const RunRecord sampled = run_algorithm2(p, g, x_star, cfg);
    for (std::size_t k = 1; k < sampled.rows.size(); ++k) CHECK(sampled.rows[k].e_g_norm > 0.0);
    cfg.batch_size = 20;
    const RunRecord whole = run_algorithm2(p, g, x_star, cfg);
    CHECK(whole.final_error() == doctest::Approx(full.final_error()).epsilon(1e-9));
  }

  TEST_CASE("property: the Algorithm 2 plateau grows with the quantization level") {
    const Problem p = small_logistic(6);
    const Graph g = generate_graph(GraphKind::ErdosRenyi, 6, 0.6, 3);
    const auto x_star = solve_centralized(p).x;
    double previous = 0.0;
    for (double delta : {1e-6, 1e-4, 1e-2}) {
      SolverConfig cfg = exact_config(p);
      cfg.quantizers = {Quantizer::symmetric(delta)};
      cfg.ftqc.threshold.reset();
      cfg.iterations = 150;
      const double plateau = run_algorithm2(p, g, x_star, cfg).plateau();
      CHECK(plateau > previous);
      previous = plateau;
    }
  }

  TEST_CASE("zooming: levels shrink by r, at most once per T activations") {
    const Problem p = small_quadratic();
    const Graph g = generate_graph(GraphKind::Complete, 3, 0.0, 1);
    const auto x_star = *p.analytic_solution();
    SolverConfig cfg = exact_config(p);
    cfg.quantizers = {Quantizer::symmetric(1e-1)};
    cfg.ftqc.threshold.reset();
    cfg.ftqc.rho = 1.0;
    cfg.zoom = {5, 0.1};
    cfg.iterations = 120;
    const RunRecord z = run_algorithm3(p, g, x_star, cfg);
    REQUIRE(z.deltas.size() == z.rows.size());
    int zooms = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      std::size_t last = 0;
      for (std::size_t k = 1; k < z.deltas.size(); ++k) {
        const double before = z.deltas[k - 1][i];
        const double now = z.deltas[k][i];
        CHECK(now <= before);
        if (now < before) {
          CHECK(now == doctest::Approx(0.1 * before));
          CHECK(k - last >= 5);
          last = k;
          ++zooms;
        }
      }
    }
    CHECK(zooms > 0);
    for (std::size_t k = 1; k < z.rows.size(); ++k) CHECK(z.rows[k].delta_max <= z.rows[k - 1].delta_max);

    const RunRecord fixed = run_algorithm2(p, g, x_star, cfg);
    CHECK(z.final_error() < fixed.plateau());
  }

  TEST_CASE("divergence guard stops the run") {
    const Problem p = small_logistic();
    const Graph g = generate_graph(GraphKind::Ring, 4, 0.0, 1);
    const auto x_star = solve_centralized(p).x;
    SolverConfig cfg = exact_config(p);
    cfg.iterations = 50;
    cfg.divergence_threshold = 1e-12;
    for (Method m : {Method::Algorithm2, Method::NearDgd, Method::Dgt}) {
      const RunRecord r = run_method(m, p, g, x_star, cfg);
      CHECK(r.diverged);
      CHECK(r.rows.size() == 2);
      CHECK(r.method == m);
    }
  }

  TEST_CASE("record helpers") {
    RunRecord r;
    CHECK(r.plateau() == 0.0);
    CHECK(r.mean_rounds_per_iteration() == 0.0);
    for (int k = 0; k <= 10; ++k) r.rows.push_back({k, static_cast<double>(k), 0.0, 3LL * k});
    CHECK(r.plateau(0.1) == doctest::Approx((9.0 + 10.0) / 2.0));
    CHECK(r.final_error() == 10.0);
    CHECK(r.mean_rounds_per_iteration() == doctest::Approx(3.0));
  }
}
