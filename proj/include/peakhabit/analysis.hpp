#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "policy.hpp"
#include "simulate.hpp"
#include "thresholds.hpp"

namespace peakhabit {

enum class SweepParam { Alpha, Lambda, Beta1, Beta2 };
enum class SweepQuantity { Thresholds, Consumption, Proportion };

inline const char* to_string(SweepParam s) {
  switch (s) {
    case SweepParam::Alpha: return "alpha";
    case SweepParam::Lambda: return "lambda";
    case SweepParam::Beta1: return "beta1";
    case SweepParam::Beta2: return "beta2";
  }
  return "?";
}

inline const char* to_string(SweepQuantity q) {
  switch (q) {
    case SweepQuantity::Thresholds: return "thresholds";
    case SweepQuantity::Consumption: return "consumption";
    case SweepQuantity::Proportion: return "proportion";
  }
  return "?";
}

inline SweepParam sweep_param_from_string(const std::string& s) {
  if (s == "alpha") return SweepParam::Alpha;
  if (s == "lambda") return SweepParam::Lambda;
  if (s == "beta1") return SweepParam::Beta1;
  if (s == "beta2") return SweepParam::Beta2;
  throw DomainError("unknown sweep parameter '" + s + "'");
}

inline SweepQuantity sweep_quantity_from_string(const std::string& s) {
  if (s == "thresholds") return SweepQuantity::Thresholds;
  if (s == "consumption") return SweepQuantity::Consumption;
  if (s == "proportion") return SweepQuantity::Proportion;
  throw DomainError("unknown sweep quantity '" + s + "'");
}

struct SweepSpec {
  SweepParam parameter = SweepParam::Alpha;
  std::vector<double> values;
  ModelParams held;
  std::vector<double> h_grid;  // thresholds
  double h = 4.0;              // consumption / proportion
  std::size_t x_steps = 200;
  SweepQuantity quantity = SweepQuantity::Thresholds;
  bool allow_reference_degenerate = true;  // admit alpha == lambda endpoints
  unsigned threads = 0;
};

struct SweepRow {
  std::string swept_param;
  double swept_value = 0;
  double h = 0;
  double x = std::numeric_limits<double>::quiet_NaN();  // NaN when the row is not indexed by x
  std::string quantity;
  double value = 0;
};

inline ModelParams with_param(ModelParams p, SweepParam s, double v) {
  switch (s) {
    case SweepParam::Alpha: p.alpha = v; break;
    case SweepParam::Lambda: p.lambda = v; break;
    case SweepParam::Beta1: p.beta1 = v; break;
    case SweepParam::Beta2: p.beta2 = v; break;
  }
  return p;
}

/// x grid on (W_bkrp(h), W_updt(h)] with the floor offset used by the policy module.
inline std::vector<double> wealth_grid(const ThresholdSet& t, std::size_t n) {
  const double eps = 1e-8 * std::max(1.0, t.w_bkrp);
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = t.w_bkrp + eps + (t.w_updt - t.w_bkrp - eps) * static_cast<double>(i) / static_cast<double>(n - 1);
  return xs;
}

inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw DomainError("sweep: no values");
  if (spec.quantity == SweepQuantity::Thresholds && spec.h_grid.empty()) throw DomainError("sweep: empty h grid");
  if (spec.quantity != SweepQuantity::Thresholds && spec.x_steps < 2) throw DomainError("sweep: x_steps < 2");
  const std::string pname = to_string(spec.parameter);
  std::vector<std::vector<SweepRow>> parts(spec.values.size());
  parallel_for(spec.values.size(), spec.threads, [&](std::size_t i) {
    const double v = spec.values[i];
    try {
      const Model m(with_param(spec.held, spec.parameter, v), spec.allow_reference_degenerate);
      auto& rows = parts[i];
      if (spec.quantity == SweepQuantity::Thresholds) {
        for (double h : spec.h_grid) {
          const ThresholdSet t = m.make_slice(h).th;
          const std::pair<const char*, double> q[] = {{"w_bkrp", t.w_bkrp}, {"w_low", t.w_low},
                                                      {"w_ref", t.w_ref},   {"w_peak", t.w_peak},
                                                      {"w_updt", t.w_updt}};
          for (auto& [name, val] : q) rows.push_back({pname, v, h, std::numeric_limits<double>::quiet_NaN(), name, val});
        }
        return;
      }
      const Slice s = m.make_slice(spec.h);
      const bool cons = spec.quantity == SweepQuantity::Consumption;
      for (double x : wealth_grid(s.th, spec.x_steps)) {
        const PolicyEvaluation e = policy_from_dual(m, s, x, invert(m, s, x));
        rows.push_back({pname, v, spec.h, x, cons ? "c_star" : "pi_prop", cons ? e.c_star : e.pi_prop});
      }
    } catch (const ParamDomainError& e) {
      std::vector<std::string> ann = e.violations();
      for (auto& a : ann) a = pname + "=" + std::to_string(v) + ": " + a;
      throw ParamDomainError(ann);
    } catch (const DomainError& e) {
      throw DomainError(pname + "=" + std::to_string(v) + ": " + e.what());
    }
  });
  std::vector<SweepRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Result of checking that a quantity moves in one direction along the swept values.
struct DirectionCheck {
  bool holds = true;
  std::size_t comparisons = 0;
  std::size_t violations = 0;
  double worst = 0;  // largest step against the claimed direction
};

/// Pointwise (same h, same x) monotonicity of `quantity` in the swept value.
inline DirectionCheck check_direction(const std::vector<SweepRow>& rows, const std::string& quantity, bool increasing,
                                      double slack = 0.0) {
  std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows)
    if (r.quantity == quantity) series[{r.h, std::isnan(r.x) ? 0.0 : r.x}].push_back({r.swept_value, r.value});
  DirectionCheck dc;
  for (auto& [key, s] : series) {
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double step = (s[i].second - s[i - 1].second) * (increasing ? 1.0 : -1.0);
      ++dc.comparisons;
      if (step < -slack) {
        ++dc.violations;
        dc.worst = std::max(dc.worst, -step);
      }
    }
  }
  dc.holds = dc.violations == 0;
  return dc;
}

/// Alpha from lambda to 1 - 1e-8 with lambda = 0.2 (other parameters at their defaults).
inline SweepSpec alpha_box(std::size_t n = 9, std::vector<double> h_grid = {}) {
  SweepSpec s;
  s.parameter = SweepParam::Alpha;
  s.held = ModelParams{};
  s.held.lambda = 0.2;
  for (std::size_t i = 0; i < n; ++i) s.values.push_back(0.2 + (0.8 - 1e-8) * static_cast<double>(i) / static_cast<double>(n - 1));
  if (h_grid.empty())
    for (int i = 1; i <= 20; ++i) h_grid.push_back(0.5 * i);
  s.h_grid = std::move(h_grid);
  return s;
}

/// Lambda from 0 up to alpha = 0.7 (exclusive of the degenerate endpoint unless asked).
inline SweepSpec lambda_box(std::size_t n = 8, std::vector<double> h_grid = {}) {
  SweepSpec s;
  s.parameter = SweepParam::Lambda;
  s.held = ModelParams{};
  s.held.alpha = 0.7;
  for (std::size_t i = 0; i < n; ++i) s.values.push_back(0.7 * static_cast<double>(i) / static_cast<double>(n));
  if (h_grid.empty())
    for (int i = 1; i <= 20; ++i) h_grid.push_back(0.5 * i);
  s.h_grid = std::move(h_grid);
  return s;
}

enum class LimitDirection { Beta1ToZero, Beta2ToZero };

inline const char* to_string(LimitDirection d) { return d == LimitDirection::Beta1ToZero ? "beta1_to_0" : "beta2_to_0"; }

inline LimitDirection limit_direction_from_string(const std::string& s) {
  if (s == "beta1_to_0") return LimitDirection::Beta1ToZero;
  if (s == "beta2_to_0") return LimitDirection::Beta2ToZero;
  throw DomainError("unknown limit direction '" + s + "'");
}

/// Finite beta1 -> 0 limits of C1, C5, C6, C7, C8 (base variant) and the thresholds they imply.
/// Obtained by letting beta1 -> 0 in the finite-beta1 closed forms; the shared term carries 1/beta2
/// and C1 inherits the C5 tail.
struct Beta1Limits {
  double c1, c5, c6, c7, c8;
  double w_low, w_peak, w_updt;
};

inline Beta1Limits beta1_limits(const ModelParams& p, double h) {
  const DualConstants d = dual_constants(p);
  const double k = d.k, q1 = d.q1, q2 = d.q2, g = p.gamma, al = p.alpha, lm = p.lambda, b2 = p.beta2;
  const double K = k / (g * g), dq = q2 - q1, u = (1 - al) * b2 * h;
  const double common = std::pow(1 - al, dq - 1) * (al - lm) * K * (1 - q1) / dq * (q2 - 1) / dq * std::exp(-dq * u) / b2;
  const double tail = K / b2 * (q2 - 1) / dq * std::exp(-(1 - q1) * u);
  Beta1Limits L;
  L.c6 = -K / b2 * (1 - q1) / dq + K * (1 - q1) / dq * (al - lm) * (q2 - 1) * h;
  L.c8 = K / b2 * (1 - q1) / dq * std::expm1((q2 - 1) * u) + K * (1 - q1) / dq * (al - lm) * (q2 - 1) * h;
  L.c7 = common + std::pow(1 - al, dq) * tail;
  L.c5 = common + (std::pow(1 - al, dq) - 1) * tail;
  L.c1 = L.c5 + K / b2 * (q2 - 1) / dq + K * (q2 - 1) / dq * (al - lm) * (1 - q1) * h;
  L.w_low = -L.c1 * q1 + lm * h / g;
  L.w_peak = -L.c5 * q1 * std::exp((1 - q1) * u) - L.c6 * q2 * std::exp(-(q2 - 1) * u) - K / b2 + h / g;
  L.w_updt = -L.c7 * q1 * std::pow(1 - al, q1 - 1) * std::exp((1 - q1) * u) -
             L.c8 * q2 * std::pow(1 - al, q2 - 1) * std::exp(-(q2 - 1) * u) + h / g;
  return L;
}

struct LimitReport {
  LimitDirection direction = LimitDirection::Beta1ToZero;
  double h = 0;
  std::vector<double> betas;
  std::vector<ThresholdSet> trajectory;
  std::optional<Beta1Limits> closed_form;  // beta1_to_0 only
  bool gap_shrinking = false;               // beta1_to_0: W_ref - W_low decreasing along betas
  double max_rel_error = 0;                 // beta1_to_0: smallest beta vs closed forms
  bool unbounded_growth = false;            // beta2_to_0: W_low exceeds growth_factor x first value
  double growth_factor = 10.0;
};

inline LimitReport limiting_case(const ModelParams& p, LimitDirection dir, const std::vector<double>& betas,
                                 double h = 4.0) {
  if (betas.empty()) throw DomainError("limiting_case: empty beta sequence");
  for (std::size_t i = 0; i < betas.size(); ++i)
    if (!(betas[i] > 0) || (i && !(betas[i] < betas[i - 1])))
      throw DomainError("limiting_case: betas must be positive and strictly decreasing");
  LimitReport rep;
  rep.direction = dir;
  rep.h = h;
  rep.betas = betas;
  for (double b : betas) {
    const Model m(with_param(p, dir == LimitDirection::Beta1ToZero ? SweepParam::Beta1 : SweepParam::Beta2, b));
    rep.trajectory.push_back(m.make_slice(h).th);
  }
  if (dir == LimitDirection::Beta1ToZero) {
    rep.gap_shrinking = true;
    for (std::size_t i = 1; i < rep.trajectory.size(); ++i) {
      const double g0 = rep.trajectory[i - 1].w_ref - rep.trajectory[i - 1].w_low;
      const double g1 = rep.trajectory[i].w_ref - rep.trajectory[i].w_low;
      if (!(g1 < g0)) rep.gap_shrinking = false;
    }
    const Beta1Limits L = beta1_limits(p, h);
    rep.closed_form = L;
    const ThresholdSet& t = rep.trajectory.back();
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    rep.max_rel_error = std::max({rel(t.w_low, L.w_low), rel(t.w_ref, L.w_low), rel(t.w_peak, L.w_peak),
                                  rel(t.w_updt, L.w_updt)});
  } else {
    rep.unbounded_growth = rep.trajectory.back().w_low > rep.growth_factor * rep.trajectory.front().w_low;
  }
  return rep;
}

}  // namespace peakhabit
