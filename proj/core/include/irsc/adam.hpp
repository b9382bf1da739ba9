#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace irsc::diff {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moment estimates. One slot per parameter tensor;
// slot sizes are fixed on first step and must match thereafter.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // params[i] and grads[i] must have equal length. Updates in place.
  void step(std::span<std::vector<double>*> params,
            std::span<const std::span<const double>> grads);

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace irsc::diff
