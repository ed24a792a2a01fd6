#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "curriculum/error.hpp"

namespace curriculum {

// Parameters of the competence schedule
//
//   c(t) = min(1, (t (1 - c0^p) / T + c0^p)^(1/p))
//
// c0 is the fraction of the sorted data visible at t = 0, p shapes how fast
// the window grows, and T is the number of steps after which everything is
// visible. A common rule of thumb sets T to a quarter of the steps the
// uncurriculated model needs to reach ~90% of its final quality.
struct CompetenceParams {
  double c0 = 0.01;
  double p = 2.0;
  std::uint64_t T = 1;

  void validate() const {
    if (!(c0 > 0.0 && c0 <= 1.0)) {
      throw Error(ErrorKind::usage, "c0 must lie in (0, 1], got " + std::to_string(c0));
    }
    if (!(p >= 1.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::usage, "p must be >= 1, got " + std::to_string(p));
    }
    if (T < 1) throw Error(ErrorKind::usage, "T must be >= 1");
  }
};

inline double competence(std::uint64_t t, const CompetenceParams& params) {
  if (t == 0) return params.c0;
  if (t >= params.T) return 1.0;
  const double c0p = std::pow(params.c0, params.p);
  const double radicand =
      static_cast<double>(t) * (1.0 - c0p) / static_cast<double>(params.T) + c0p;
  return std::clamp(std::pow(radicand, 1.0 / params.p), params.c0, 1.0);
}

}  // namespace curriculum
