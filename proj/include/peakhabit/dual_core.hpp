#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dual_number.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "region.hpp"

namespace peakhabit {

struct DualConstants {
  double k = 0;
  double q1 = 0;
  double q2 = 0;
};

/// Roots of the characteristic quadratic of the homogeneous dual ODE.
inline DualConstants dual_constants(const ModelParams& p) {
  const double k = (p.r - p.mu) * (p.r - p.mu) / (2.0 * p.sigma * p.sigma);
  if (!(k > 0)) throw DegenerateMarket();
  DualConstants c;
  c.k = k;
  if (p.variant == Variant::GeneralRate) {
    // k q^2 - (k + r - gamma) q - gamma = 0
    const double b = k + (p.r - p.gamma);
    const double disc = std::sqrt(b * b + 4.0 * k * p.gamma);
    c.q1 = (b - disc) / (2.0 * k);
    c.q2 = (b + disc) / (2.0 * k);
  } else {
    // k q^2 - k q - gamma = 0
    const double disc = std::sqrt(k * k + 4.0 * k * p.gamma);
    c.q1 = (k - disc) / (2.0 * k);
    c.q2 = (k + disc) / (2.0 * k);
  }
  return c;
}

enum class Branch { F1 = 1, F2 = 2, F3 = 3, F4 = 4 };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::F1: return "F1";
    case Branch::F2: return "F2";
    case Branch::F3: return "F3";
    case Branch::F4: return "F4";
  }
  return "?";
}

inline RegionLabel region_of(Branch b) {
  switch (b) {
    case Branch::F1: return RegionLabel::Gloom;
    case Branch::F2: return RegionLabel::Depression;
    case Branch::F3: return RegionLabel::Recovery;
    case Branch::F4: return RegionLabel::Satisfactory;
  }
  return RegionLabel::Bankrupt;
}

enum class CaseTag { None, Case1, Case2 };

inline const char* to_string(CaseTag c) {
  switch (c) {
    case CaseTag::None: return "None";
    case CaseTag::Case1: return "Case1";
    case CaseTag::Case2: return "Case2";
  }
  return "?";
}

/// Signed sum of exponentials: sum_i amp_i * exp(expo_i).
/// Keeps coefficient * y^q products finite when both factors are extreme.
template <typename T>
struct ExpSum {
  static constexpr int kMax = 8;
  std::array<T, kMax> amp{};
  std::array<T, kMax> expo{};
  int n = 0;

  ExpSum plus(const T& a, const T& e) const {
    ExpSum s = *this;
    s.amp[s.n] = a;
    s.expo[s.n] = e;
    ++s.n;
    return s;
  }
  T value() const {
    using std::exp;
    T s(0.0);
    for (int i = 0; i < n; ++i) s += amp[i] * exp(expo[i]);
    return s;
  }
};

/// Log of the dual interval endpoints: F1 on [l1, inf), F2 on [0, l1),
/// F3 on [l3, 0), F4 on [l4, l3).
template <typename T>
struct LogBounds {
  T l1, l3, l4;
};

template <typename T>
struct CoefPack {
  T h;
  std::array<ExpSum<T>, 9> c;  // index 1..8
  CaseTag tag = CaseTag::None;
  LogBounds<T> lb;
  T a = T(1.0);    // 1 - alpha phi(h)
  T phi = T(0.0);  // phi(h)
};

template <typename T>
struct Jet {
  T v, vy, vyy;
};

namespace detail {

template <typename T>
T tmax(const T& a, const T& b) { return value_of(a) >= value_of(b) ? a : b; }

template <typename T>
LogBounds<T> log_bounds(const ModelParams& p, const T& h, const T& la, const T& E) {
  using std::log;
  LogBounds<T> b;
  if (p.variant == Variant::GeneralReference) {
    b.l1 = tmax(T(0.0), la + E * p.beta1 * h);
    b.l3 = la - (1 - p.alpha) * p.beta2 * h;
  } else {
    b.l1 = (p.alpha - p.lambda) * p.beta1 * h;
    b.l3 = -(1 - p.alpha) * p.beta2 * h;
  }
  b.l4 = std::log(1 - p.alpha) - (1 - p.alpha) * p.beta2 * h;
  return b;
}

/// Coefficients for Base and GeneralRate, and the shared C7 of GeneralReference.
/// A, B scale the odd/even jumps; B7 scales the second C7 term.
struct RateConsts {
  double A, B, B7, delta;
};

inline RateConsts rate_consts(const ModelParams& p, const DualConstants& dc) {
  const double k = dc.k, q1 = dc.q1, q2 = dc.q2, g = p.gamma, r = p.r;
  RateConsts rc;
  if (p.variant == Variant::GeneralRate) {
    const double G = (g - 2 * r + k) / (r * r);
    const double P1 = -q1 / g + 1 / r - G * (q1 - 1);
    const double P2 = -q2 / g + 1 / r - G * (q2 - 1);
    rc.A = P1 / (q2 - q1);
    rc.B = -P2 / (q2 - q1);
    rc.B7 = P1 * (q2 - 1) / ((1 - q1) * (q2 - q1));
    // extra C7 term that restores the updating-boundary condition when r != gamma
    rc.delta = -(1 / r - 1 / g) / (1 - q1);
  } else {
    rc.A = k / (g * g) * (1 - q1) / (q2 - q1);
    rc.B = k / (g * g) * (q2 - 1) / (q2 - q1);
    rc.B7 = rc.B;
    rc.delta = 0.0;
  }
  return rc;
}

template <typename T>
ExpSum<T> c7_terms(const ModelParams& p, const DualConstants& dc, const RateConsts& rc, const T& h) {
  const double q1 = dc.q1, q2 = dc.q2, al = p.alpha, lm = p.lambda, b1 = p.beta1, b2 = p.beta2;
  const double D = (1 - al) * (q2 - q1) * b2 + (al - lm) * (q2 - 1) * b1;
  const double l1a = std::log(1 - al);
  ExpSum<T> c7;
  c7 = c7.plus(T(rc.A * (al - lm) * (q2 - 1) / D), (q2 - q1) * l1a - D * h);
  c7 = c7.plus(T(rc.B7 / b2), (q2 - q1) * l1a - (1 - al) * (1 - q1) * b2 * h);
  if (rc.delta != 0.0) c7 = c7.plus(T(rc.delta / b2), -q1 * l1a - (1 - al) * (1 - q1) * b2 * h);
  return c7;
}

}  // namespace detail

/// Closed-form coefficients C1..C8 for the active variant, in exponential-sum form.
/// force_case selects the GeneralReference case explicitly (None: decide by the sign test).
template <typename T>
CoefPack<T> build_coefficients(const ModelParams& p, const DualConstants& dc, const T& h,
                               CaseTag force_case = CaseTag::None) {
  using std::exp;
  using std::log;
  const double k = dc.k, q1 = dc.q1, q2 = dc.q2, g = p.gamma;
  const double al = p.alpha, lm = p.lambda, b1 = p.beta1, b2 = p.beta2;
  const double d = (b2 - b1) / (b1 * b2);
  const auto rc = detail::rate_consts(p, dc);
  const double A = rc.A, B = rc.B;

  CoefPack<T> cp;
  cp.h = h;
  auto& C = cp.c;
  const ExpSum<T> zero;
  C[2] = zero;
  C[7] = detail::c7_terms(p, dc, rc, h);

  if (p.variant != Variant::GeneralReference) {
    C[4] = zero.plus(T(-A / b1), -(al - lm) * (q2 - 1) * b1 * h);
    C[6] = C[4].plus(T(A * d), T(0.0));
    C[8] = C[6].plus(T(A / b2), (1 - al) * (q2 - 1) * b2 * h);
    C[5] = C[7].plus(T(-B / b2), -(1 - al) * (1 - q1) * b2 * h);
    C[3] = C[5].plus(T(-B * d), T(0.0));
    C[1] = C[3].plus(T(B / b1), (al - lm) * (1 - q1) * b1 * h);
    cp.lb = detail::log_bounds(p, h, T(0.0), T(al - lm));
    return cp;
  }

  const PhiSpec phi = p.phi_or_zero();
  const T ph = phi(h);
  const T a = 1.0 - al * ph;
  const T la = log(a);
  const T E = (al - lm) - (1 - lm) * al * ph;
  cp.a = a;
  cp.phi = ph;
  cp.lb = detail::log_bounds(p, h, la, E);

  CaseTag tag = force_case;
  if (tag == CaseTag::None) tag = value_of(la + E * b1 * h) > 0 ? CaseTag::Case1 : CaseTag::Case2;
  cp.tag = tag;
  const double w = q2 - q1;

  C[5] = C[7].plus(T(-B / b2), -q1 * la - (1 - al) * (1 - q1) * b2 * h);
  if (tag == CaseTag::Case1) {
    C[4] = zero.plus(T(-A / b1), -q2 * la - E * (q2 - 1) * b1 * h);
    const T j6 = A * d / a + d / g * (q1 / w) * al * ph / a + d / g * ((1 - q1) / w) * (-la) / a;
    C[6] = C[4].plus(j6, T(0.0));
    const T j3 = -B * d / a + d / g * (q2 / w) * al * ph / a - d / g * ((q2 - 1) / w) * (-la) / a;
    C[3] = C[5].plus(j3, T(0.0));
    C[1] = C[3].plus(T(B / b1), -q1 * la + E * (1 - q1) * b1 * h);
  } else {
    C[3] = zero;
    C[4] = zero;
    const T s6 = -(1 - q1) / w * lm * h / g - q1 / (w * g * b1) - (1 - q1) / (w * g * b2) * (-la) / a +
                 q1 / (w * g * b2) * (1.0 - 1.0 / a) + (1 - q1) / w * al * h / g * (1.0 - ph) / a -
                 (1 - q1) / w * k / (g * g * b2) / a;
    C[6] = zero.plus(s6, T(0.0)).plus(T(q1 / (w * g * b1)), E * b1 * h);
    const T s1 = (q2 - 1) / w * lm * h / g - q2 / (w * g * b1) + (q2 - 1) / (w * g * b2) * (-la) / a +
                 q2 / (w * g * b2) * (1.0 - 1.0 / a) - (q2 - 1) / w * al * h / g * (1.0 - ph) / a +
                 (q2 - 1) / w * k / (g * g * b2) / a;
    C[1] = C[5].plus(s1, T(0.0)).plus(T(q2 / (w * g * b1)), E * b1 * h);
  }
  C[8] = C[6].plus(T(A / b2), -q2 * la + (1 - al) * (q2 - 1) * b2 * h);
  return cp;
}

/// Branch containing log y (intervals closed at their lower end).
template <typename T>
Branch branch_of(const LogBounds<T>& lb, double lny) {
  if (lny >= value_of(lb.l1)) return Branch::F1;
  if (lny >= 0.0) return Branch::F2;
  if (lny >= value_of(lb.l3)) return Branch::F3;
  return Branch::F4;
}

/// Dual value and y-derivatives on one branch, evaluated off-interval if asked.
/// With omit_floor the -lambda h y/r term of F1 is left out of the value (not of vy).
template <typename T>
Jet<T> vtilde_branch(const ModelParams& p, const DualConstants& dc, const CoefPack<T>& cp, Branch br,
                     const T& lny, bool omit_floor = false) {
  using std::exp;
  using std::log;
  const double q1 = dc.q1, q2 = dc.q2, g = p.gamma, r = p.r, k = dc.k;
  const T& h = cp.h;
  const T y = exp(lny);
  Jet<T> j{T(0.0), T(0.0), T(0.0)};

  const int bi = static_cast<int>(br);
  const ExpSum<T>& odd = cp.c[2 * bi - 1];
  const ExpSum<T>& even = cp.c[2 * bi];
  auto accumulate = [&](const ExpSum<T>& s, double q) {
    for (int i = 0; i < s.n; ++i) {
      const T t = s.amp[i] * exp(s.expo[i] + q * lny);
      j.v += t;
      j.vy += q * t / y;
      j.vyy += q * (q - 1) * t / (y * y);
    }
  };
  accumulate(odd, q1);
  accumulate(even, q2);

  const double al = p.alpha, lm = p.lambda;
  switch (br) {
    case Branch::F1: {
      const T E = p.variant == Variant::GeneralReference
                      ? T((al - lm)) - (1 - lm) * al * cp.phi
                      : T(al - lm);
      if (!omit_floor) j.v += -lm * h * y / r;
      j.v += (1.0 - exp(E * p.beta1 * h)) / (g * p.beta1);
      j.vy += -lm * h / r;
      break;
    }
    case Branch::F2:
    case Branch::F3: {
      const double be = br == Branch::F2 ? p.beta1 : p.beta2;
      if (p.variant == Variant::Base) {
        j.v += (1.0 - y + y * lny) / (g * be) + k * y / (g * g * be) - al * h * y / g;
        j.vy += lny / (g * be) + k / (g * g * be) - al * h / g;
        j.vyy += 1.0 / (g * be * y);
      } else if (p.variant == Variant::GeneralRate) {
        const double G = (g - 2 * r + k) / (r * r);
        j.v += y * lny / (r * be) + G * y / be - al * h * y / r + 1.0 / (g * be);
        j.vy += (lny + 1.0) / (r * be) + G / be - al * h / r;
        j.vyy += 1.0 / (r * be * y);
      } else {
        const T& a = cp.a;
        const T lya = lny - log(a);
        j.v += (1.0 - y / a) / (g * be) + y * lya / (g * be * a) - al * h * y * (1.0 - cp.phi) / (g * a) +
               k * y / (g * g * be * a);
        j.vy += lya / (g * be * a) - al * h * (1.0 - cp.phi) / (g * a) + k / (g * g * be * a);
        j.vyy += 1.0 / (g * be * a * y);
      }
      break;
    }
    case Branch::F4:
      j.v += -h * y / r + (1.0 - exp(-(1 - al) * p.beta2 * h)) / (g * p.beta2);
      j.vy += -h / r;
      break;
  }
  return j;
}

/// Optimal consumption as a function of the dual state on a given branch.
template <typename T>
T consumption_on(const ModelParams& p, Branch br, const T& lny, const T& h, const T& a, const T& phi) {
  using std::log;
  switch (br) {
    case Branch::F1: return p.lambda * h;
    case Branch::F2:
    case Branch::F3: {
      const double be = br == Branch::F2 ? p.beta1 : p.beta2;
      if (p.variant == Variant::GeneralReference)
        return -(lny - log(a)) / (be * a) + p.alpha * h * (1.0 - phi) / a;
      return p.alpha * h - lny / be;
    }
    case Branch::F4: return h;
  }
  return h;
}

/// C1..C8 and their h-derivatives at one h.
struct CoefficientSet {
  double h = 0;
  std::array<double, 9> c{};     // index 1..8
  std::array<double, 9> dc_dh{};
  CaseTag case_tag = CaseTag::None;
};

/// Wraps plain coefficient values as a single-term pack (used to evaluate user-supplied sets).
inline CoefPack<Dual<double>> pack_from_set(const ModelParams& p, const CoefficientSet& cs) {
  using D = Dual<double>;
  CoefPack<D> cp;
  cp.h = D(cs.h, 1.0);
  for (int i = 1; i <= 8; ++i) cp.c[i] = ExpSum<D>{}.plus(D(cs.c[i], cs.dc_dh[i]), D(0.0));
  cp.tag = cs.case_tag;
  const PhiSpec phi = p.phi_or_zero();
  cp.phi = phi(cp.h);
  cp.a = 1.0 - p.alpha * cp.phi;
  const D E = D(p.alpha - p.lambda) - (1 - p.lambda) * p.alpha * cp.phi;
  cp.lb = detail::log_bounds(p, cp.h, log(cp.a), E);
  if (p.variant == Variant::GeneralReference && cs.case_tag == CaseTag::Case2) cp.lb.l1 = D(0.0);
  return cp;
}

/// Smooth-fit and updating-boundary residuals of a coefficient set.
struct ResidualReport {
  struct Entry {
    std::string where;
    double y = 0;
    double value_gap = 0;
    double slope_gap = 0;
    double scale = 1;
  };
  std::vector<Entry> interior;
  double vh_updating = 0;
  double vh_scale = 1;

  double worst_relative() const {
    double w = std::abs(vh_updating) / vh_scale;
    for (const auto& e : interior)
      w = std::max(w, std::max(std::abs(e.value_gap), std::abs(e.slope_gap)) / e.scale);
    return w;
  }
};

inline ResidualReport smooth_fit_residuals(const ModelParams& p, const DualConstants& dc,
                                           const CoefficientSet& cs) {
  using D = Dual<double>;
  const CoefPack<D> cp = pack_from_set(p, cs);
  ResidualReport rep;
  auto gap = [&](const char* name, double lny, Branch lo, Branch hi) {
    const D ly(lny);
    const Jet<D> a = vtilde_branch(p, dc, cp, lo, ly);
    const Jet<D> b = vtilde_branch(p, dc, cp, hi, ly);
    ResidualReport::Entry e;
    e.where = name;
    e.y = std::exp(lny);
    e.value_gap = a.v.v - b.v.v;
    e.slope_gap = a.vy.v - b.vy.v;
    e.scale = std::max({1.0, std::abs(a.v.v), std::abs(a.vy.v)});
    rep.interior.push_back(e);
  };
  const bool case2 = p.variant == Variant::GeneralReference && cs.case_tag == CaseTag::Case2;
  if (case2) {
    gap("F1|F3 at y=1", 0.0, Branch::F1, Branch::F3);
  } else {
    gap("F1|F2 at y=b1", cp.lb.l1.v, Branch::F1, Branch::F2);
    gap("F2|F3 at y=1", 0.0, Branch::F2, Branch::F3);
  }
  gap("F3|F4 at y=b3", cp.lb.l3.v, Branch::F3, Branch::F4);
  // d/dh at fixed y on the updating boundary
  const Jet<D> u = vtilde_branch(p, dc, cp, Branch::F4, D(cp.lb.l4.v));
  rep.vh_updating = u.v.d;
  rep.vh_scale = std::max(1.0, std::abs(u.v.v));
  return rep;
}

/// Everything the evaluators need at one h, built once and cached.
struct Slice {
  double h = 0;
  CoefPack<double> cp;
  ThresholdSet th;
};

class Model {
 public:
  explicit Model(const ModelParams& p, bool allow_reference_degenerate = false, double h_max = 200.0)
      : vp_(validate(p, allow_reference_degenerate)), dc_(dual_constants(vp_.get())), h_max_(h_max) {}
  Model(const Model& o) : vp_(o.vp_), dc_(o.dc_), h_max_(o.h_max_) {}
  Model& operator=(const Model&) = delete;

  const ModelParams& params() const { return vp_.get(); }
  const DualConstants& constants() const { return dc_; }
  double h_max() const { return h_max_; }

  void check_h(double h) const {
    if (!(h > 0) || !(h <= h_max_)) throw HRangeError(h, h_max_);
  }

  /// Coefficient pack; in the GeneralReference tie band both cases are tried
  /// and the one with the smaller smooth-fit residual is kept.
  CoefPack<double> pack(double h) const {
    check_h(h);
    const ModelParams& p = params();
    CoefPack<double> cp = build_coefficients(p, dc_, h);
    if (p.variant == Variant::GeneralReference) {
      const double a = 1 - p.alpha * p.phi_or_zero()(h);
      const double E = (p.alpha - p.lambda) - (1 - p.lambda) * p.alpha * p.phi_or_zero()(h);
      if (std::abs(std::log(a) + E * p.beta1 * h) < 1e-12) {
        const CoefPack<double> c1 = build_coefficients(p, dc_, h, CaseTag::Case1);
        const CoefPack<double> c2 = build_coefficients(p, dc_, h, CaseTag::Case2);
        cp = residual_of(c1) <= residual_of(c2) ? c1 : c2;
      }
    }
    for (int i = 1; i <= 8; ++i)
      if (!std::isfinite(cp.c[i].value())) throw HRangeError(h, h_max_);
    return cp;
  }

  CoefficientSet coefficients(double h) const {
    check_h(h);
    using D = Dual<double>;
    const CoefPack<double> ref = pack(h);
    const CoefPack<D> cp = build_coefficients(params(), dc_, D(h, 1.0), ref.tag);
    CoefficientSet cs;
    cs.h = h;
    cs.case_tag = ref.tag;
    for (int i = 1; i <= 8; ++i) {
      const D v = cp.c[i].value();
      cs.c[i] = v.v;
      cs.dc_dh[i] = v.d;
    }
    return cs;
  }

  Slice make_slice(double h) const {
    Slice s;
    s.h = h;
    s.cp = pack(h);
    s.th = thresholds_from(s.cp);
    return s;
  }

  /// Memoized slice; safe for concurrent callers.
  std::shared_ptr<const Slice> slice(double h) const {
    std::uint64_t key;
    std::memcpy(&key, &h, sizeof key);
    {
      std::shared_lock lk(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto s = std::make_shared<const Slice>(make_slice(h));
    std::unique_lock lk(mu_);
    if (cache_.size() >= kCacheCap) cache_.clear();
    return cache_.emplace(key, std::move(s)).first->second;
  }

  Jet<double> vtilde(const CoefPack<double>& cp, Branch br, double lny) const {
    return vtilde_branch(params(), dc_, cp, br, lny);
  }

  /// V = V~(y) + x y, with the floor annuity taken out of both terms on F1 so that
  /// large y near W_bkrp does not cancel.
  double primal_from(const CoefPack<double>& cp, Branch br, double lny, double x) const {
    if (br != Branch::F1) return vtilde(cp, br, lny).v + x * std::exp(lny);
    const double y = std::exp(lny);
    return vtilde_branch(params(), dc_, cp, br, lny, true).v + (x - params().lambda * cp.h / params().r) * y;
  }

  ThresholdSet thresholds_from(const CoefPack<double>& cp) const {
    const ModelParams& p = params();
    ThresholdSet t;
    t.h = cp.h;
    t.w_bkrp = p.lambda * cp.h / p.r;
    t.w_low = -vtilde(cp, Branch::F1, cp.lb.l1).vy;
    t.w_ref = cp.tag == CaseTag::Case2 ? t.w_low : -vtilde(cp, Branch::F2, 0.0).vy;
    t.w_peak = -vtilde(cp, Branch::F3, cp.lb.l3).vy;
    t.w_updt = -vtilde(cp, Branch::F4, cp.lb.l4).vy;
    return t;
  }

 private:
  double residual_of(const CoefPack<double>& cp) const {
    double w = 0;
    auto gap = [&](double lny, Branch lo, Branch hi) {
      const auto a = vtilde(cp, lo, lny), b = vtilde(cp, hi, lny);
      w = std::max({w, std::abs(a.v - b.v), std::abs(a.vy - b.vy)});
    };
    if (cp.tag == CaseTag::Case2) {
      gap(0.0, Branch::F1, Branch::F3);
    } else {
      gap(cp.lb.l1, Branch::F1, Branch::F2);
      gap(0.0, Branch::F2, Branch::F3);
    }
    gap(cp.lb.l3, Branch::F3, Branch::F4);
    return w;
  }

  static constexpr std::size_t kCacheCap = 8192;
  ValidatedParams vp_;
  DualConstants dc_;
  double h_max_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::uint64_t, std::shared_ptr<const Slice>> cache_;
};

/// Coefficients of the active variant at h (free-function form).
inline CoefficientSet coefficients(const Model& m, double h) { return m.coefficients(h); }

inline ResidualReport smooth_fit_residuals(const Model& m, double h) {
  return smooth_fit_residuals(m.params(), m.constants(), m.coefficients(h));
}

}  // namespace peakhabit
