#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnopt/agent_vectors.hpp"
#include "qnopt/rng.hpp"

namespace qnopt {

// Local data of one agent: m feature rows of length n and +-1 labels.
struct AgentData {
  std::vector<double> features;  // row-major, size() * dim
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<AgentData> agents;

  std::size_t num_agents() const noexcept { return agents.size(); }
  std::span<const double> feature(std::size_t agent, std::size_t h) const {
    return {agents[agent].features.data() + h * dim, dim};
  }
};

struct ClassificationParams {
  std::size_t agents = 10;
  std::size_t points_per_agent = 150;
  std::size_t dim = 10;
  double class_sep = 1.0;
  double label_noise = 0.01;
  std::uint64_t seed = 0;
};

// Two Gaussian clusters (identity covariance) centred at +-class_sep * u for a
// random unit vector u; each label is flipped with probability label_noise.
Dataset generate_classification(const ClassificationParams& p);

// CSV with header `agent_id,label,f0,...,f{n-1}`, one row per sample.
void write_dataset_csv(const Dataset& d, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

// Uniform subset of {0..m-1} of size `batch`, drawn without replacement.
std::vector<std::size_t> sample_batch(std::size_t m, std::size_t batch, Rng& rng);

enum class Normalization { Sum, Mean };

// Per-agent finite-sum costs. Two families:
//  logistic:  f_i(x) = s_i sum_h log(1 + exp(-b_h a_h x)) + (eps/2)||x||^2,
//             s_i = 1 (sum) or 1/m_i (mean)
//  quadratic: f_i(x) = (w_i/2)||x - c_i||^2
class Problem {
 public:
  static Problem logistic(Dataset data, double eps, Normalization norm = Normalization::Sum);
  static Problem quadratic(AgentVectors centers, std::vector<double> weights);

  bool is_quadratic() const noexcept { return quadratic_; }
  std::size_t num_agents() const noexcept { return num_agents_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t local_size(std::size_t i) const { return quadratic_ ? 0 : data_.agents[i].size(); }
  const Dataset& data() const noexcept { return data_; }
  double regularization() const noexcept { return eps_; }
  Normalization normalization() const noexcept { return norm_; }

  double local_cost(std::size_t i, std::span<const double> x) const;
  void local_gradient(std::size_t i, std::span<const double> x, std::span<double> out) const;
  // Mini-batch estimate: B samples without replacement, data term scaled by
  // m_i / B so that it is unbiased; the regularizer is never sampled.
  void stochastic_gradient(std::size_t i, std::span<const double> x, std::size_t batch, Rng& rng,
                           std::span<double> out) const;
  // The same estimator on a given index set (distinct indices).
  void batch_gradient(std::size_t i, std::span<const double> x, std::span<const std::size_t> batch,
                      std::span<double> out) const;

  double total_cost(std::span<const double> x) const;
  void total_gradient(std::span<const double> x, std::span<double> out) const;

  // Strong convexity / smoothness constants shared by all local costs.
  double lower_curvature() const noexcept { return lower_; }
  double upper_curvature() const noexcept { return upper_; }

  // Closed-form minimizer (quadratic family only).
  std::optional<std::vector<double>> analytic_solution() const;

 private:
  Problem() = default;
  void compute_constants();
  double data_scale(std::size_t i) const;
  void add_sample_gradient(std::size_t i, std::size_t h, std::span<const double> x, double scale,
                           std::span<double> out) const;

  bool quadratic_ = false;
  std::size_t num_agents_ = 0;
  std::size_t dim_ = 0;
  Dataset data_;
  double eps_ = 0.0;
  Normalization norm_ = Normalization::Sum;
  AgentVectors centers_;
  std::vector<double> weights_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

// Largest eigenvalue of A^T A for the rows of agent i, by power iteration.
double gram_max_eigenvalue(const Dataset& d, std::size_t agent, double rel_tol = 1e-8);

struct CurvatureConstants {
  double lower;
  double upper;
};
CurvatureConstants curvature_constants(const Problem& p);

struct OracleSolution {
  std::vector<double> x;
  double objective = 0.0;
  double gradient_norm = 0.0;  // ||sum_i grad f_i(x)||
  int iterations = 0;
};

inline constexpr int kCentralizedMaxIters = 1'000'000;

// Accelerated gradient descent (step 1/upper curvature, adaptive restart) on
// the network cost until ||sum_i grad f_i(x)|| <= tol * max(1, ||x||).
OracleSolution solve_centralized(const Problem& p, double tol = 1e-10);

Problem quadratic_fixture(const AgentVectors& centers, const std::vector<double>& weights);

// Numerically stable log(1 + exp(t)) and logistic sigmoid.
double softplus(double t);
double sigmoid(double t);

}  // namespace qnopt
