#include "qnopt/problem.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "qnopt/error.hpp"
#include "qnopt/kernels.hpp"

namespace qnopt {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t))); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

void require_finite(std::span<const double> x) {
  for (double v : x) require(std::isfinite(v), ErrorCode::NumericInput, "non-finite point");
}

double norm2(std::span<const double> x) { return std::sqrt(kernels::squared_norm(x)); }

}  // namespace

Dataset generate_classification(const ClassificationParams& p) {
  require(p.agents >= 1 && p.points_per_agent >= 1 && p.dim >= 1, ErrorCode::InvalidArgument,
          "dataset sizes must be positive");
  require(p.label_noise >= 0.0 && p.label_noise <= 1.0, ErrorCode::InvalidArgument,
          "label noise must be a probability");
  std::normal_distribution<double> normal(0.0, 1.0);

  auto rng = make_rng(p.seed, 0);
  std::vector<double> u(p.dim);
  double un = 0.0;
  while (un == 0.0) {
    for (auto& v : u) v = normal(rng);
    un = norm2(u);
  }
  for (auto& v : u) v /= un;

  Dataset d;
  d.dim = p.dim;
  d.agents.resize(p.agents);
  for (std::size_t i = 0; i < p.agents; ++i) {
    auto arng = make_rng(p.seed, i + 1);
    auto& ad = d.agents[i];
    ad.features.resize(p.points_per_agent * p.dim);
    ad.labels.resize(p.points_per_agent);
    for (std::size_t h = 0; h < p.points_per_agent; ++h) {
      const int cls = uniform01(arng) < 0.5 ? -1 : 1;
      double* row = ad.features.data() + h * p.dim;
      for (std::size_t c = 0; c < p.dim; ++c) row[c] = cls * p.class_sep * u[c] + normal(arng);
      ad.labels[h] = bernoulli(arng, p.label_noise) && p.label_noise > 0.0 ? -cls : cls;
    }
  }
  return d;
}

void write_dataset_csv(const Dataset& d, std::ostream& out) {
  out << "agent_id,label";
  for (std::size_t c = 0; c < d.dim; ++c) out << ",f" << c;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < d.num_agents(); ++i) {
    for (std::size_t h = 0; h < d.agents[i].size(); ++h) {
      out << i << ',' << d.agents[i].labels[h];
      for (double v : d.feature(i, h)) out << ',' << v;
      out << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io, "dataset CSV is empty");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  require(columns >= 3, ErrorCode::Io, "dataset CSV needs agent_id, label and at least one feature");
  Dataset d;
  d.dim = columns - 2;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::Io, "bad number on line " + std::to_string(lineno));
      }
    }
    require(vals.size() == columns, ErrorCode::Io, "wrong column count on line " + std::to_string(lineno));
    require(vals[0] >= 0.0 && vals[0] == std::floor(vals[0]), ErrorCode::Io, "bad agent id");
    const auto agent = static_cast<std::size_t>(vals[0]);
    const int label = static_cast<int>(vals[1]);
    require(label == 1 || label == -1, ErrorCode::Io, "labels must be -1 or +1");
    if (agent >= d.agents.size()) d.agents.resize(agent + 1);
    d.agents[agent].labels.push_back(label);
    d.agents[agent].features.insert(d.agents[agent].features.end(), vals.begin() + 2, vals.end());
  }
  return d;
}

Problem Problem::logistic(Dataset data, double eps, Normalization norm) {
  require(data.num_agents() >= 1 && data.dim >= 1, ErrorCode::InvalidArgument, "dataset has no agents");
  require(std::isfinite(eps) && eps >= 0.0, ErrorCode::InvalidArgument, "regularization must be >= 0");
  for (const auto& a : data.agents) {
    require(a.features.size() == a.size() * data.dim, ErrorCode::InvalidArgument, "ragged feature matrix");
    for (int b : a.labels) require(b == 1 || b == -1, ErrorCode::InvalidArgument, "labels must be -1 or +1");
  }
  Problem p;
  p.num_agents_ = data.num_agents();
  p.dim_ = data.dim;
  p.data_ = std::move(data);
  p.eps_ = eps;
  p.norm_ = norm;
  p.compute_constants();
  require(p.lower_ > 0.0, ErrorCode::InvalidArgument, "regularization must be positive for strong convexity");
  return p;
}

Problem Problem::quadratic(AgentVectors centers, std::vector<double> weights) {
  require(centers.agents() >= 1 && centers.dim() >= 1, ErrorCode::InvalidArgument, "need at least one agent");
  require(weights.size() == centers.agents(), ErrorCode::InvalidArgument, "one weight per agent required");
  for (double w : weights)
    require(std::isfinite(w) && w > 0.0, ErrorCode::InvalidArgument, "quadratic weights must be positive");
  Problem p;
  p.quadratic_ = true;
  p.num_agents_ = centers.agents();
  p.dim_ = centers.dim();
  p.centers_ = std::move(centers);
  p.weights_ = std::move(weights);
  p.compute_constants();
  return p;
}

Problem quadratic_fixture(const AgentVectors& centers, const std::vector<double>& weights) {
  return Problem::quadratic(centers, weights);
}

double Problem::data_scale(std::size_t i) const {
  if (norm_ == Normalization::Sum || data_.agents[i].size() == 0) return 1.0;
  return 1.0 / static_cast<double>(data_.agents[i].size());
}

double Problem::local_cost(std::size_t i, std::span<const double> x) const {
  require_finite(x);
  if (quadratic_) return 0.5 * weights_[i] * kernels::squared_distance(x, centers_.row(i));
  const auto& a = data_.agents[i];
  double loss = 0.0;
  for (std::size_t h = 0; h < a.size(); ++h) loss += softplus(-a.labels[h] * kernels::dot(data_.feature(i, h), x));
  return data_scale(i) * loss + 0.5 * eps_ * kernels::squared_norm(x);
}

void Problem::add_sample_gradient(std::size_t i, std::size_t h, std::span<const double> x, double scale,
                                  std::span<double> out) const {
  const auto a = data_.feature(i, h);
  const double b = data_.agents[i].labels[h];
  const double margin = b * kernels::dot(a, x);
  // d/dx log(1 + exp(-b a x)) = -b a^T sigma(-b a x)
  kernels::axpy(-scale * b * sigmoid(-margin), a, out);
}

void Problem::local_gradient(std::size_t i, std::span<const double> x, std::span<double> out) const {
  require_finite(x);
  if (quadratic_) {
    kernels::active().linear_combination(weights_[i], x.data(), -weights_[i], centers_.row(i).data(), out.data(),
                                         dim_);
    return;
  }
  for (std::size_t c = 0; c < dim_; ++c) out[c] = eps_ * x[c];
  const double s = data_scale(i);
  for (std::size_t h = 0; h < data_.agents[i].size(); ++h) add_sample_gradient(i, h, x, s, out);
}

std::vector<std::size_t> sample_batch(std::size_t m, std::size_t batch, Rng& rng) {
  require(batch >= 1 && batch <= m, ErrorCode::InvalidArgument, "batch size must lie in [1, m_i]");
  // Partial Fisher-Yates: the first `batch` entries become a uniform sample
  // without replacement.
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < batch; ++k) {
    const auto r = k + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m - k));
    std::swap(idx[k], idx[std::min(r, m - 1)]);
  }
  idx.resize(batch);
  return idx;
}

void Problem::batch_gradient(std::size_t i, std::span<const double> x, std::span<const std::size_t> batch,
                             std::span<double> out) const {
  const std::size_t m = local_size(i);
  require(!batch.empty() && batch.size() <= m, ErrorCode::InvalidArgument, "batch size must lie in [1, m_i]");
  for (auto h : batch) require(h < m, ErrorCode::InvalidArgument, "batch index out of range");
  require_finite(x);
  for (std::size_t c = 0; c < dim_; ++c) out[c] = eps_ * x[c];
  const double s = data_scale(i) * static_cast<double>(m) / static_cast<double>(batch.size());
  for (auto h : batch) add_sample_gradient(i, h, x, s, out);
}

void Problem::stochastic_gradient(std::size_t i, std::span<const double> x, std::size_t batch, Rng& rng,
                                  std::span<double> out) const {
  const std::size_t m = local_size(i);
  require(batch >= 1 && batch <= m, ErrorCode::InvalidArgument, "batch size must lie in [1, m_i]");
  require_finite(x);
  if (batch == m) {
    local_gradient(i, x, out);
    return;
  }
  const auto idx = sample_batch(m, batch, rng);
  batch_gradient(i, x, idx, out);
}

double Problem::total_cost(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < num_agents_; ++i) s += local_cost(i, x);
  return s;
}

void Problem::total_gradient(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> g(dim_);
  for (std::size_t i = 0; i < num_agents_; ++i) {
    local_gradient(i, x, g);
    kernels::axpy(1.0, g, out);
  }
}

std::optional<std::vector<double>> Problem::analytic_solution() const {
  if (!quadratic_) return std::nullopt;
  std::vector<double> x(dim_, 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < num_agents_; ++i) {
    kernels::axpy(weights_[i], centers_.row(i), x);
    wsum += weights_[i];
  }
  for (auto& v : x) v /= wsum;
  return x;
}

double gram_max_eigenvalue(const Dataset& d, std::size_t agent, double rel_tol) {
  const auto& a = d.agents[agent];
  if (a.size() == 0) return 0.0;
  const std::size_t n = d.dim;
  std::vector<double> v(n), u(n);
  for (std::size_t c = 0; c < n; ++c) v[c] = 1.0 + 0.01 * static_cast<double>(c);
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    const double vn = norm2(v);
    if (vn == 0.0) return 0.0;
    for (auto& x : v) x /= vn;
    // u = A^T (A v)
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t h = 0; h < a.size(); ++h) {
      const auto row = d.feature(agent, h);
      kernels::axpy(kernels::dot(row, v), row, u);
    }
    const double next = kernels::dot(u, v);  // Rayleigh quotient
    const bool done = it > 0 && std::fabs(next - lambda) <= rel_tol * std::fabs(next);
    lambda = next;
    v.swap(u);
    if (done) break;
  }
  return lambda;
}

void Problem::compute_constants() {
  if (quadratic_) {
    lower_ = *std::min_element(weights_.begin(), weights_.end());
    upper_ = *std::max_element(weights_.begin(), weights_.end());
    return;
  }
  // The logistic loss has curvature at most 1/4 along each sample direction.
  double worst = 0.0;
  for (std::size_t i = 0; i < num_agents_; ++i)
    worst = std::max(worst, 0.25 * data_scale(i) * gram_max_eigenvalue(data_, i));
  lower_ = eps_;
  upper_ = eps_ + worst;
}

CurvatureConstants curvature_constants(const Problem& p) { return {p.lower_curvature(), p.upper_curvature()}; }

OracleSolution solve_centralized(const Problem& p, double tol) {
  require(tol > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");
  const std::size_t n = p.dim();
  const double inv_agents = 1.0 / static_cast<double>(p.num_agents());
  // Minimize the network average; its smoothness constant is the per-agent upper curvature.
  const double step = 1.0 / p.upper_curvature();

  std::vector<double> x(n, 0.0), look(n, 0.0), g(n), x_next(n);
  double t = 1.0;
  OracleSolution sol;
  for (int it = 0; it < kCentralizedMaxIters; ++it) {
    p.total_gradient(x, g);
    const double gn = norm2(g);
    if (gn <= tol * std::max(1.0, norm2(x))) {
      sol.x = x;
      sol.gradient_norm = gn;
      sol.objective = p.total_cost(x);
      sol.iterations = it;
      return sol;
    }
    // FISTA-style momentum from the look-ahead point, restarted whenever the
    // step direction disagrees with the momentum.
    p.total_gradient(look, g);
    for (std::size_t c = 0; c < n; ++c) x_next[c] = look[c] - step * inv_agents * g[c];
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double agree = 0.0;
    for (std::size_t c = 0; c < n; ++c) agree += (look[c] - x_next[c]) * (x_next[c] - x[c]);
    if (agree > 0.0) {
      t = 1.0;
      look = x;  // restart from the current iterate
      continue;
    }
    const double beta = (t - 1.0) / t_next;
    for (std::size_t c = 0; c < n; ++c) look[c] = x_next[c] + beta * (x_next[c] - x[c]);
    x = x_next;
    t = t_next;
  }
  fail(ErrorCode::ConvergenceFailure, "centralized solver did not reach the tolerance");
}

}  // namespace qnopt
