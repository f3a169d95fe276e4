#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace egoyaw {

struct SimplexConfig {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double initial_offset = 5.0;    // x0 + offset * e_i seeds the simplex
  double tolerance = 1e-3;        // stop when the simplex diameter falls below
  std::size_t max_iterations = 200;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // false when the iteration cap was hit
};

using Objective = std::function<double(std::span<const double>)>;

/// Downhill simplex minimization. The objective may return +inf outside its
/// domain, but must be finite on every initial vertex (std::invalid_argument
/// otherwise).
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const SimplexConfig& cfg = {});

}  // namespace egoyaw
