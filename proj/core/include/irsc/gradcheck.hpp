#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace irsc::gradcheck {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass = false;
};

// Central finite-difference validation (h = 1e-4, 10 random instances per
// op) of every differentiable operation and the channel layers. Noise inside
// the channel cases is pinned by reseeding, so the maps are deterministic
// functions of their inputs.
std::vector<CheckResult> run_gradient_suite(std::uint64_t seed = 12345);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace irsc::gradcheck
