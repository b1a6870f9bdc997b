#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eai/model.hpp"

namespace eai::gradcheck {

struct GroupResult {
  std::string name;
  double max_rel_err = 0.0;
  int entries = 0;
};

struct SuiteResult {
  std::vector<GroupResult> groups;
  double max_rel_err = 0.0;
};

inline constexpr double kFdStep = 1e-6;
// Relative error |fd - analytic| / max(|fd|, |analytic|, 0.01); the floor
// turns near-zero gradients into an absolute comparison.
inline constexpr double kRelFloor = 1e-2;

// Central finite differences over every entry of every parameter tensor on
// small random instances (T=6, feature dims 4, d_model=4, k=1). The sampler
// is re-seeded identically for every loss evaluation, so each perturbed pass
// sees the same negatives.
SuiteResult run_suite(uint64_t seed);

}  // namespace eai::gradcheck
