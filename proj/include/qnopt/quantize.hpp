#pragma once

#include <span>
#include <string>
#include <vector>

namespace qnopt {

enum class QuantizerKind { Identity, Symmetric, Floor, Ceil, Sparsifier };

QuantizerKind parse_quantizer_kind(const std::string& name);
std::string to_string(QuantizerKind kind);

// Map applied to every transmitted message.
//  symmetric:  delta * round(x / delta), ties away from zero
//  floor/ceil: nearest lattice point below / above
//  sparsifier: zero every component with |x_c| < theta
//  identity:   no distortion
class Quantizer {
 public:
  static Quantizer identity() { return Quantizer(QuantizerKind::Identity, 0.0, 0.0); }
  static Quantizer symmetric(double delta) { return Quantizer(QuantizerKind::Symmetric, delta, 0.0); }
  static Quantizer floor(double delta) { return Quantizer(QuantizerKind::Floor, delta, 0.0); }
  static Quantizer ceil(double delta) { return Quantizer(QuantizerKind::Ceil, delta, 0.0); }
  static Quantizer sparsifier(double theta) { return Quantizer(QuantizerKind::Sparsifier, 0.0, theta); }

  // Generic constructor; validates that the level / threshold required by
  // the kind is present.
  Quantizer(QuantizerKind kind, double delta, double theta);

  QuantizerKind kind() const noexcept { return kind_; }
  double delta() const noexcept { return delta_; }
  double theta() const noexcept { return theta_; }
  bool has_level() const noexcept;

  // Same kind and threshold, different lattice spacing.
  Quantizer with_delta(double delta) const;

  // out may alias x. Throws NumericInput on non-finite input.
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> operator()(std::span<const double> x) const;

  bool operator==(const Quantizer&) const = default;

 private:
  QuantizerKind kind_;
  double delta_;
  double theta_;
};

struct MaxError {
  double value;
  // True when `value` is the sparsifier threshold: the error is input
  // dependent and only bounded componentwise by theta.
  bool threshold_bound;
};

// Per-component worst-case |q(x) - x|: delta/2 symmetric, delta floor/ceil,
// 0 identity. Throws Unsupported for the sparsifier.
double max_error(const Quantizer& q);
// Like max_error but reports theta for the sparsifier with the flag set.
MaxError max_error_bound(const Quantizer& q);

}  // namespace qnopt
