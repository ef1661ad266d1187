#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "dual_core.hpp"
#include "root_finding.hpp"

namespace peakhabit {

struct ThresholdTolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
};

inline ThresholdSet thresholds_at(const Model& m, double h) { return m.slice(h)->th; }

inline std::vector<ThresholdSet> thresholds_on_grid(const Model& m, const std::vector<double>& hs) {
  std::vector<ThresholdSet> out;
  out.reserve(hs.size());
  for (double h : hs) out.push_back(m.make_slice(h).th);
  return out;
}

/// W_updt(h) for any scalar type; feed Dual numbers to get exact h-derivatives.
template <typename T>
T w_updt(const Model& m, const T& h) {
  const double hv = value_of(h);
  m.check_h(hv);
  const CaseTag tag = m.params().variant == Variant::GeneralReference ? m.pack(hv).tag : CaseTag::None;
  const CoefPack<T> cp = build_coefficients(m.params(), m.constants(), h, tag);
  return -vtilde_branch(m.params(), m.constants(), cp, Branch::F4, cp.lb.l4).vy;
}

struct WUpdtDerivs {
  double w, dw, d2w;
};

inline WUpdtDerivs w_updt_derivatives(const Model& m, double h) {
  using D = Dual<double>;
  using DD = Dual<D>;
  const DD hv(D(h, 1.0), D(1.0, 0.0));
  const DD w = w_updt(m, hv);
  return {w.v.v, w.v.d, w.d.d};
}

struct BlissOptions {
  double h_min = 1e-3;
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
};

/// Peak h with W_updt(h) = x. hint (if given, with W_updt(hint) <= x) starts a local bracket.
inline double bliss_inverse(const Model& m, double x, const BlissOptions& opt = {},
                            std::optional<double> hint = std::nullopt) {
  const double h_max = m.h_max();
  auto f = [&](double h) { return w_updt(m, h) - x; };
  double lo = opt.h_min, hi = h_max, flo, fhi;
  if (hint && *hint >= opt.h_min && *hint < h_max && f(*hint) <= 0) {
    lo = *hint;
    flo = f(lo);
    if (flo == 0) return lo;
    auto [b, fb] = expand_upper(f, lo, std::max(1e-3, 1e-3 * lo), h_max, [](double, double) { return false; });
    hi = b;
    fhi = fb;
  } else {
    flo = f(lo);
    if (flo > 0) throw BracketError("x below W_updt(h_min)");
    fhi = f(hi);
    if (fhi < 0) throw BracketError("x above W_updt(h_max)");
  }
  const double tol = opt.abs_tol + opt.rel_tol * std::abs(x);
  RootResult r = solve_bracketed(f, lo, hi, flo, fhi, 1e-15, 200);
  if (std::abs(r.fx) > tol) {
    // local non-monotonicity: retry on the global bracket
    r = solve_bracketed(f, opt.h_min, h_max, f(opt.h_min), f(h_max), 1e-15, 400);
    if (std::abs(r.fx) > tol) throw ConvergenceError("bliss_inverse did not converge", r.x);
  }
  return r.x;
}

/// Peak level below which the bliss curve is concave; none when concave everywhere.
inline std::optional<double> bliss_concavity_threshold(const Model& m) {
  const ModelParams& p = m.params();
  const DualConstants& c = m.constants();
  if (p.variant == Variant::Base) {
    if (p.beta1 >= p.beta2) return std::nullopt;
    const double k = c.k, q1 = c.q1, q2 = c.q2, g = p.gamma, al = p.alpha, lm = p.lambda;
    const double b1 = p.beta1, b2 = p.beta2;
    const double M1 = k / (g * g * b1) * (1 - q1) * (q2 - 1) * (q2 - 1) * std::pow(1 - al, q2 - 1) *
                      ((1 - al) * q2 * b2 + (al - lm) * (q2 - 1) * b1) /
                      ((1 - al) * (q2 - q1) * b2 + (al - lm) * (q2 - 1) * b1) *
                      std::pow((1 - al) * b2 + (al - lm) * b1, 2);
    const double M2 = k / (g * g) * (b2 - b1) / (b1 * b2) * (1 - q1) / (q2 - q1) * q2 *
                      std::pow(1 - al, q2 + 1) * (q2 - 1) * (q2 - 1) * b2 * b2;
    if (!(M1 > 0 && M2 > 0)) return std::nullopt;
    return (std::log(M1) - std::log(M2)) / ((al - lm) * (q2 - 1) * b1);
  }
  // no closed form off the base variant: locate the sign change of W''_updt
  auto d2 = [&](double h) { return w_updt_derivatives(m, h).d2w; };
  const double top = std::min(m.h_max(), 100.0);
  const int n = 400;
  double prev_h = 1e-2, prev = d2(prev_h);
  for (int i = 1; i <= n; ++i) {
    const double h = 1e-2 + (top - 1e-2) * i / n;
    const double v = d2(h);
    if ((prev > 0) != (v > 0)) return solve_bracketed(d2, prev_h, h, prev, v, 1e-12).x;
    prev_h = h;
    prev = v;
  }
  return std::nullopt;
}

}  // namespace peakhabit
