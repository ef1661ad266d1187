#pragma once

#include <cmath>
#include <limits>

#include "dual_core.hpp"
#include "root_finding.hpp"
#include "thresholds.hpp"

namespace peakhabit {

struct DualPoint {
  double y = 0;
  RegionLabel region = RegionLabel::Gloom;
  Branch f_branch = Branch::F1;
};

struct DualValue {
  double v_tilde = 0;
  double v_tilde_y = 0;
  double v_tilde_yy = 0;
  double v_tilde_h = 0;
  Branch branch = Branch::F1;
};

struct InversionOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double log_y_tol = 1e-13;  // relative width of the log-y bracket at termination
  int max_iter = 200;
};

namespace detail {
/// Values of y just below the updating boundary are admitted to absorb rounding.
inline bool below_dual_region(double lny, double l4) {
  return lny < l4 - 1e-12 * std::max(1.0, std::abs(l4));
}
}  // namespace detail

inline DualValue dual_value(const Model& m, double y, double h) {
  const auto s = m.slice(h);
  const double lny = std::log(y);
  if (!(y > 0) || detail::below_dual_region(lny, s->cp.lb.l4))
    throw OutOfDualRegion("y below the updating boundary (1-alpha)e^{-(1-alpha)beta2 h}");
  const Branch br = branch_of(s->cp.lb, lny);
  const Jet<double> j = m.vtilde(s->cp, br, lny);
  using D = Dual<double>;
  const CoefPack<D> cpd = build_coefficients(m.params(), m.constants(), D(h, 1.0), s->cp.tag);
  const Jet<D> jd = vtilde_branch(m.params(), m.constants(), cpd, br, D(lny));
  return {j.v, j.vy, j.vyy, jd.v.d, br};
}

/// y = f(x, h) solving x = -V~_y(y, h) on the branch picked by the thresholds.
inline DualPoint invert(const Model& m, const Slice& s, double x, const InversionOptions& opt = {}) {
  const ThresholdSet& t = s.th;
  const CoefPack<double>& cp = s.cp;
  const double tol = opt.abs_tol + opt.rel_tol * std::abs(x);
  if (x < t.w_bkrp) throw OutOfEffectiveRegion("x below W_bkrp(h)");
  if (x > t.w_updt + tol) throw OutOfEffectiveRegion("x above W_updt(h)");

  DualPoint dp;
  double lo, hi;
  if (x <= t.w_low) {
    dp.f_branch = Branch::F1;
    if (x == t.w_low) return {std::exp(cp.lb.l1), RegionLabel::Gloom, Branch::F1};
    lo = cp.lb.l1;
    hi = std::numeric_limits<double>::infinity();
  } else if (x <= t.w_ref) {
    dp.f_branch = Branch::F2;
    if (x == t.w_ref) return {1.0, RegionLabel::Depression, Branch::F2};
    lo = 0.0;
    hi = cp.lb.l1;
  } else if (x <= t.w_peak) {
    dp.f_branch = Branch::F3;
    if (x == t.w_peak) return {std::exp(cp.lb.l3), RegionLabel::Recovery, Branch::F3};
    lo = cp.lb.l3;
    hi = 0.0;
  } else {
    dp.f_branch = Branch::F4;
    if (x >= t.w_updt) return {std::exp(cp.lb.l4), RegionLabel::Satisfactory, Branch::F4};
    lo = cp.lb.l4;
    hi = cp.lb.l3;
  }
  dp.region = region_of(dp.f_branch);

  // g is strictly decreasing in u = log y
  auto g = [&](double u) { return -m.vtilde(cp, dp.f_branch, u).vy - x; };
  double glo, ghi;
  if (dp.f_branch == Branch::F1) {
    // upper end grows by doubling until -V~_y < x (or the floor residual is already met)
    const double a = lo;
    glo = g(a);
    auto [b, gb] = expand_upper(g, a, 1.0, 700.0, [&](double, double v) { return std::abs(v) <= tol; });
    if (gb >= 0) {
      dp.y = std::exp(b);
      return dp;
    }
    lo = a;
    hi = b;
    ghi = gb;
  } else {
    glo = g(lo);
    ghi = g(hi);
    if ((glo > 0) == (ghi > 0)) {
      // x within rounding of a threshold; branch formulas disagree in the last bits there
      const bool at_lo = std::abs(glo) < std::abs(ghi);
      if (std::min(std::abs(glo), std::abs(ghi)) > tol) throw BracketError("invert: x not bracketed on its branch");
      dp.y = std::exp(at_lo ? lo : hi);
      return dp;
    }
  }
  const RootResult r = solve_bracketed(g, lo, hi, glo, ghi, opt.log_y_tol, opt.max_iter);
  if (std::abs(r.fx) > tol) {
    // bracket exhausted at rounding level: accept only if no float lies between
    const double nb = std::nextafter(r.x, r.fx > 0 ? hi : lo);
    if (std::abs(g(nb)) > tol && (g(nb) > 0) == (r.fx > 0))
      throw ConvergenceError("invert: residual " + std::to_string(r.fx) + " above tolerance", std::exp(r.x));
  }
  dp.y = std::exp(r.x);
  return dp;
}

inline DualPoint invert(const Model& m, double x, double h, const InversionOptions& opt = {}) {
  return invert(m, *m.slice(h), x, opt);
}

/// V(x,h) = V~(f(x,h),h) + x f(x,h).
inline double primal_value(const Model& m, double x, double h, const InversionOptions& opt = {}) {
  const DualPoint dp = invert(m, x, h, opt);
  const auto s = m.slice(h);
  return m.primal_from(s->cp, dp.f_branch, std::log(dp.y), x);
}

/// f_x = -1/V~_yy and f_h = V~_yh f_x at (x,h).
struct InverseDerivatives {
  double f, f_x, f_h;
};

inline InverseDerivatives inverse_derivatives(const Model& m, double x, double h) {
  const DualPoint dp = invert(m, x, h);
  const auto s = m.slice(h);
  const double lny = std::log(dp.y);
  const Jet<double> j = m.vtilde(s->cp, dp.f_branch, lny);
  using D = Dual<double>;
  const CoefPack<D> cpd = build_coefficients(m.params(), m.constants(), D(h, 1.0), s->cp.tag);
  const double vyh = vtilde_branch(m.params(), m.constants(), cpd, dp.f_branch, D(lny)).vy.d;
  const double fx = -1.0 / j.vyy;
  return {dp.y, fx, vyh * fx};
}

}  // namespace peakhabit
