#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "errors.hpp"

namespace peakhabit {

struct RootResult {
  double x = 0;
  double fx = 0;
  int iterations = 0;
};

/// Safeguarded bracketed root of a monotone scalar function (TOMS 748 with
/// bisection fallback). Returns the endpoint with the smaller |f|.
template <typename F>
RootResult solve_bracketed(F&& f, double a, double b, double fa, double fb, double xtol = 1e-13,
                           int max_iter = 200) {
  if (fa == 0) return {a, fa, 0};
  if (fb == 0) return {b, fb, 0};
  if ((fa > 0) == (fb > 0)) throw BracketError("root not bracketed");
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
  double fl = fa, fh = fb;
  auto wrapped = [&](double x) {
    const double v = f(x);
    return v;
  };
  auto tol = [xtol](double lo, double hi) { return std::abs(hi - lo) <= xtol * std::max(1.0, std::abs(lo)); };
  std::pair<double, double> br = boost::math::tools::toms748_solve(wrapped, a, b, fl, fh, tol, it);
  const double f1 = f(br.first), f2 = f(br.second);
  RootResult r;
  r.iterations = static_cast<int>(it);
  if (std::abs(f1) <= std::abs(f2)) {
    r.x = br.first;
    r.fx = f1;
  } else {
    r.x = br.second;
    r.fx = f2;
  }
  return r;
}

/// Grows hi geometrically (in steps of `step`, doubling) until f(hi) changes sign
/// relative to f(lo) or `stop(hi, f(hi))` returns true.
template <typename F, typename Stop>
std::pair<double, double> expand_upper(F&& f, double lo, double step, double cap, Stop&& stop) {
  const double flo = f(lo);
  double hi = lo + step;
  for (int i = 0; i < 200; ++i) {
    if (hi > cap) hi = cap;
    const double fh = f(hi);
    if ((fh > 0) != (flo > 0) || fh == 0 || stop(hi, fh)) return {hi, fh};
    if (hi >= cap) break;
    step *= 2;
    hi = lo + step;
  }
  throw BracketError("could not bracket root below cap");
}

}  // namespace peakhabit
