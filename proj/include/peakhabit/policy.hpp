#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "inversion.hpp"
#include "thresholds.hpp"

namespace peakhabit {

struct PolicyEvaluation {
  RegionLabel region = RegionLabel::Gloom;
  Branch branch = Branch::F1;
  double y = 0;
  double c_star = 0;
  double pi_star = 0;
  double pi_prop = 0;
  double value = 0;
  double mpc = 0;
  double irra = 0;
};

struct PolicyOptions {
  InversionOptions inversion;
  /// |x - W_updt| within this band counts as on the bliss curve
  double bliss_band_rel = 1e-12;
};

/// Feedback policy from an already inverted dual point.
inline PolicyEvaluation policy_from_dual(const Model& m, const Slice& s, double x, const DualPoint& dp,
                                         const PolicyOptions& opt = {}) {
  const ModelParams& p = m.params();
  const double lny = std::log(dp.y);
  const Jet<double> j = m.vtilde(s.cp, dp.f_branch, lny);
  PolicyEvaluation e;
  e.region = dp.region;
  e.branch = dp.f_branch;
  e.y = dp.y;
  e.c_star = consumption_on(p, dp.f_branch, lny, s.h, s.cp.a, s.cp.phi);
  const double sy = dp.y * j.vyy;
  e.pi_star = (p.mu - p.r) / (p.sigma * p.sigma) * sy;
  e.pi_prop = x != 0 ? e.pi_star / x : std::numeric_limits<double>::quiet_NaN();
  e.value = m.primal_from(s.cp, dp.f_branch, lny, x);
  switch (dp.f_branch) {
    case Branch::F2: e.mpc = 1.0 / (p.beta1 * s.cp.a * sy); break;
    case Branch::F3: e.mpc = 1.0 / (p.beta2 * s.cp.a * sy); break;
    default: e.mpc = 0.0; break;
  }
  if (std::abs(x - s.th.w_updt) <= opt.bliss_band_rel * std::max(1.0, std::abs(x)))
    e.mpc = 1.0 / w_updt_derivatives(m, s.h).dw;
  e.irra = e.pi_star > 0 ? (p.mu - p.r) / (p.sigma * p.sigma * e.pi_prop)
                         : std::numeric_limits<double>::infinity();
  return e;
}

inline PolicyEvaluation evaluate_policy(const Model& m, double x, double h, const PolicyOptions& opt = {}) {
  const auto s = m.slice(h);
  const DualPoint dp = invert(m, x, h, opt.inversion);
  return policy_from_dual(m, *s, x, dp, opt);
}

/// Ratio of right to left MPC at W_ref from the closed forms; NaN when the
/// depression region is empty (general reference, Case 2).
inline double mpc_jump_ratio(const Model& m, double h) {
  const auto s = m.slice(h);
  if (s->cp.tag == CaseTag::Case2) return std::numeric_limits<double>::quiet_NaN();
  const ModelParams& p = m.params();
  const double v2 = m.vtilde(s->cp, Branch::F2, 0.0).vyy;
  const double v3 = m.vtilde(s->cp, Branch::F3, 0.0).vyy;
  return (p.beta1 * v2) / (p.beta2 * v3);
}

/// Wealth where the MPC turns from decreasing to increasing (base variant).
inline std::optional<double> mpc_turning_point(const Model& m, double h) {
  const ModelParams& p = m.params();
  if (p.variant != Variant::Base) throw DomainError("mpc_turning_point requires the Base variant");
  const auto s = m.slice(h);
  const DualConstants& dc = m.constants();
  const double q1 = dc.q1, q2 = dc.q2;
  const auto& C = s->cp.c;
  auto scaled = [](const ExpSum<double>& c, double pw, double lny) {
    double v = 0;
    for (int i = 0; i < c.n; ++i) v += c.amp[i] * std::exp(c.expo[i] + pw * lny);
    return v;
  };
  const double l3 = s->cp.lb.l3;
  const double cond = (q1 - 1) * scaled(C[5], q1 - 2, l3) + (q2 - 1) * scaled(C[6], q2 - 2, l3);
  if (!(cond > 0)) return std::nullopt;
  const double c3 = C[3].value(), c4 = C[4].value(), c5 = C[5].value(), c6 = C[6].value();
  double ybar;
  if (c3 * (q1 - 1) + c4 * (q2 - 1) > 0)
    ybar = std::pow(-c3 * (q1 - 1) / (c4 * (q2 - 1)), 1.0 / (q2 - q1));
  else
    ybar = std::pow(-c5 * (q1 - 1) / (c6 * (q2 - 1)), 1.0 / (q2 - q1));
  if (!(ybar > 0) || !std::isfinite(ybar)) return std::nullopt;
  const double lny = std::log(ybar);
  return -m.vtilde(s->cp, branch_of(s->cp.lb, lny), lny).vy;
}

struct ProportionProfile {
  std::vector<double> x;
  std::vector<double> pi_prop;
  std::size_t argmax = 0;
  /// interior local maxima (indices)
  std::vector<std::size_t> peaks;
};

/// pi*/x on n points spanning [W_bkrp + eps, W_updt].
inline ProportionProfile proportion_profile(const Model& m, double h, std::size_t n,
                                            std::optional<double> eps = std::nullopt) {
  if (n < 3) throw DomainError("proportion_profile needs n >= 3");
  const ThresholdSet t = thresholds_at(m, h);
  const double e = eps ? *eps : 1e-8 * std::max(1.0, t.w_bkrp);
  const double lo = t.w_bkrp + e, hi = t.w_updt;
  ProportionProfile pr;
  pr.x.resize(n);
  pr.pi_prop.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    pr.x[i] = x;
    pr.pi_prop[i] = evaluate_policy(m, x, h).pi_prop;
    if (pr.pi_prop[i] > pr.pi_prop[pr.argmax]) pr.argmax = i;
  }
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (pr.pi_prop[i] > pr.pi_prop[i - 1] && pr.pi_prop[i] >= pr.pi_prop[i + 1]) pr.peaks.push_back(i);
  return pr;
}

}  // namespace peakhabit
