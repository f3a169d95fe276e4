#include "egoyaw/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace egoyaw {

namespace {

struct Vertex {
  std::vector<double> x;
  double f;
};

std::vector<double> affine(const std::vector<double>& a, const std::vector<double>& b, double t) {
  // a + t (b - a)
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

double diameter(const std::vector<Vertex>& simplex) {
  double d = 0.0;
  for (std::size_t k = 1; k < simplex.size(); ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < simplex[0].x.size(); ++i) {
      const double diff = simplex[k].x[i] - simplex[0].x[i];
      sq += diff * diff;
    }
    d = std::max(d, std::sqrt(sq));
  }
  return d;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const SimplexConfig& cfg) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

  std::vector<Vertex> simplex;
  simplex.reserve(n + 1);
  simplex.push_back({x0, f(x0)});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x = x0;
    x[i] += cfg.initial_offset;
    const double fx = f(x);
    simplex.push_back({std::move(x), fx});
  }
  for (const auto& v : simplex) {
    if (!std::isfinite(v.f)) {
      throw std::invalid_argument("nelder_mead: objective is not finite on the initial simplex");
    }
  }

  const auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  NelderMeadResult result;
  for (;;) {
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    if (diameter(simplex) < cfg.tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= cfg.max_iterations) break;
    ++result.iterations;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k].x[i] / static_cast<double>(n);
    }
    Vertex& worst = simplex[n];
    const double f_best = simplex[0].f;
    const double f_second = simplex[n - 1].f;

    const auto reflected = affine(centroid, worst.x, -cfg.reflection);
    const double fr = f(reflected);
    if (fr < f_best) {
      const auto expanded = affine(centroid, reflected, cfg.expansion);
      const double fe = f(expanded);
      worst = fe < fr ? Vertex{expanded, fe} : Vertex{reflected, fr};
      continue;
    }
    if (fr < f_second) {
      worst = {reflected, fr};
      continue;
    }
    if (fr < worst.f) {
      const auto outside = affine(centroid, reflected, cfg.contraction);
      const double fc = f(outside);
      if (fc <= fr) {
        worst = {outside, fc};
        continue;
      }
    } else {
      const auto inside = affine(centroid, worst.x, cfg.contraction);
      const double fc = f(inside);
      if (fc < worst.f) {
        worst = {inside, fc};
        continue;
      }
    }
    for (std::size_t k = 1; k <= n; ++k) {
      simplex[k].x = affine(simplex[0].x, simplex[k].x, cfg.shrink);
      simplex[k].f = f(simplex[k].x);
    }
  }
  result.x = simplex[0].x;
  result.value = simplex[0].f;
  return result;
}

}  // namespace egoyaw
