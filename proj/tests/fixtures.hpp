#pragma once

#include "cellbp/model.hpp"

namespace cellbp::testing {

// Configuration 1 of the simulation study.
inline ModelParams config1(std::int64_t s0 = 200) {
  return ModelParams{{0.55, 0.005, 4.0}, {0.15, 0.012, 12.0}, {0.2, 0.008, 20.0}, 0.2, s0};
}

inline ModelParams no_dud(std::int64_t s0 = 60) {
  return ModelParams{{0.5, 0.01, 3.0}, {0.2, 0.02, 8.0}, {0.0, 0.0, 0.0}, 0.3, s0};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace cellbp::testing
