#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qnopt {

// One length-`dim` vector per agent, stored row-major. Stacked form of
// the network state (x_1, ..., x_N).
class AgentVectors {
 public:
  AgentVectors() = default;
  AgentVectors(std::size_t agents, std::size_t dim, double fill = 0.0)
      : agents_(agents), dim_(dim), data_(agents * dim, fill) {}

  std::size_t agents() const noexcept { return agents_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool operator==(const AgentVectors&) const = default;

 private:
  std::size_t agents_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace qnopt
