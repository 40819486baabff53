#include "qnopt/quantize.hpp"

#include <cmath>

#include "qnopt/error.hpp"
#include "qnopt/kernels.hpp"

namespace qnopt {

QuantizerKind parse_quantizer_kind(const std::string& name) {
  if (name == "identity" || name == "none") return QuantizerKind::Identity;
  if (name == "symmetric" || name == "round") return QuantizerKind::Symmetric;
  if (name == "floor") return QuantizerKind::Floor;
  if (name == "ceil") return QuantizerKind::Ceil;
  if (name == "sparsifier") return QuantizerKind::Sparsifier;
  fail(ErrorCode::InvalidArgument, "unknown quantizer kind: " + name);
}

std::string to_string(QuantizerKind kind) {
  switch (kind) {
    case QuantizerKind::Identity: return "identity";
    case QuantizerKind::Symmetric: return "symmetric";
    case QuantizerKind::Floor: return "floor";
    case QuantizerKind::Ceil: return "ceil";
    case QuantizerKind::Sparsifier: return "sparsifier";
  }
  return "?";
}

Quantizer::Quantizer(QuantizerKind kind, double delta, double theta)
    : kind_(kind), delta_(delta), theta_(theta) {
  if (has_level()) {
    require(std::isfinite(delta) && delta > 0.0, ErrorCode::InvalidArgument,
            "quantization level must be positive");
  } else {
    delta_ = 0.0;
  }
  if (kind == QuantizerKind::Sparsifier) {
    require(std::isfinite(theta) && theta >= 0.0, ErrorCode::InvalidArgument,
            "sparsifier threshold must be nonnegative");
  } else {
    theta_ = 0.0;
  }
}

bool Quantizer::has_level() const noexcept {
  return kind_ == QuantizerKind::Symmetric || kind_ == QuantizerKind::Floor || kind_ == QuantizerKind::Ceil;
}

Quantizer Quantizer::with_delta(double delta) const {
  if (!has_level()) return *this;
  return Quantizer(kind_, delta, theta_);
}

void Quantizer::apply(std::span<const double> x, std::span<double> out) const {
  require(x.size() == out.size(), ErrorCode::InvalidArgument, "quantizer output size mismatch");
  for (double v : x) require(std::isfinite(v), ErrorCode::NumericInput, "quantizer input is not finite");
  const auto& k = kernels::active();
  switch (kind_) {
    case QuantizerKind::Identity:
      if (out.data() != x.data()) std::copy(x.begin(), x.end(), out.begin());
      return;
    case QuantizerKind::Symmetric: k.quantize_round(x.data(), delta_, out.data(), x.size()); return;
    case QuantizerKind::Floor: k.quantize_floor(x.data(), delta_, out.data(), x.size()); return;
    case QuantizerKind::Ceil: k.quantize_ceil(x.data(), delta_, out.data(), x.size()); return;
    case QuantizerKind::Sparsifier: k.sparsify(x.data(), theta_, out.data(), x.size()); return;
  }
}

std::vector<double> Quantizer::operator()(std::span<const double> x) const {
  std::vector<double> out(x.size());
  apply(x, out);
  return out;
}

MaxError max_error_bound(const Quantizer& q) {
  switch (q.kind()) {
    case QuantizerKind::Identity: return {0.0, false};
    case QuantizerKind::Symmetric: return {0.5 * q.delta(), false};
    case QuantizerKind::Floor:
    case QuantizerKind::Ceil: return {q.delta(), false};
    case QuantizerKind::Sparsifier: return {q.theta(), true};
  }
  return {0.0, false};
}

double max_error(const Quantizer& q) {
  const auto b = max_error_bound(q);
  require(!b.threshold_bound, ErrorCode::Unsupported,
          "sparsifier error is input dependent; use max_error_bound");
  return b.value;
}

}  // namespace qnopt
