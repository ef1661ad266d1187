#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <peakhabit/peakhabit.hpp>

namespace peakhabit::cli {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal, locale independent.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Rows of named cells; strings stay strings, doubles go through fmt().
class Table {
 public:
  using Cell = std::variant<double, std::string>;
  explicit Table(std::vector<std::string> cols) : cols_(std::move(cols)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != cols_.size()) throw std::logic_error("table row width mismatch");
    rows_.push_back(std::move(row));
  }

  std::string csv() const {
    std::string s;
    for (std::size_t i = 0; i < cols_.size(); ++i) s += (i ? "," : "") + cols_[i];
    s += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) s += ',';
        if (auto* d = std::get_if<double>(&r[i]))
          s += std::isnan(*d) ? std::string() : fmt(*d);
        else
          s += std::get<std::string>(r[i]);
      }
      s += '\n';
    }
    return s;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& r : rows_) {
      json o = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (auto* d = std::get_if<double>(&r[i]))
          o[cols_[i]] = std::isfinite(*d) ? json(*d) : json(nullptr);
        else
          o[cols_[i]] = std::get<std::string>(r[i]);
      }
      arr.push_back(std::move(o));
    }
    return arr;
  }

  std::string render(const std::string& format) const {
    if (format == "json") return to_json().dump(2) + "\n";
    return csv();
  }

 private:
  std::vector<std::string> cols_;
  std::vector<std::vector<Cell>> rows_;
};

inline ModelParams params_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("params file: expected a JSON object");
  static const std::vector<std::string> known = {"r",     "mu",    "sigma", "gamma",   "lambda",
                                                 "alpha", "beta1", "beta2", "variant", "phi"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw DomainError("params file: unknown key '" + it.key() + "'");
  ModelParams p;
  auto num = [&](const char* k, double& dst) {
    if (!j.contains(k)) throw DomainError(std::string("params file: missing key '") + k + "'");
    if (!j[k].is_number()) throw DomainError(std::string("params file: '") + k + "' must be a number");
    dst = j[k].get<double>();
  };
  num("r", p.r);
  num("mu", p.mu);
  num("sigma", p.sigma);
  num("gamma", p.gamma);
  num("lambda", p.lambda);
  num("alpha", p.alpha);
  num("beta1", p.beta1);
  num("beta2", p.beta2);
  if (j.contains("variant")) {
    const auto v = variant_from_string(j["variant"].get<std::string>());
    if (!v) throw DomainError("params file: unknown variant '" + j["variant"].get<std::string>() + "'");
    p.variant = *v;
  }
  if (j.contains("phi") && !j["phi"].is_null()) {
    const json& f = j["phi"];
    PhiSpec ph;
    const std::string kind = f.value("kind", "Zero");
    if (kind == "Zero")
      ph.kind = PhiSpec::Kind::Zero;
    else if (kind == "Fractional")
      ph.kind = PhiSpec::Kind::Fractional;
    else
      throw DomainError("params file: unknown phi kind '" + kind + "'");
    ph.phi_bar = f.value("phi_bar", 0.0);
    ph.h_hat = f.value("h_hat", 1.0);
    p.phi = ph;
  }
  return p;
}

inline ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open params file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DomainError("params file: " + std::string(e.what()));
  }
  return params_from_json(j);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n < 1) throw UsageError("grid needs at least one point");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

struct Common {
  std::string params_path;
  std::string output;
  std::string format = "csv";
  unsigned threads = 0;
  bool allow_degenerate = false;
};

inline void add_common(CLI::App* sc, Common& c) {
  sc->add_option("--params", c.params_path, "model parameter JSON file")->required();
  sc->add_option("--output,-o", c.output, "output file (default: stdout)");
  sc->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sc->add_option("--threads", c.threads, "worker threads (0: all cores)");
  sc->add_flag("--allow-degenerate", c.allow_degenerate, "admit alpha == lambda");
}

struct Options {
  Common common;
  // thresholds
  double h_min = 0.5, h_max = 10.0;
  std::size_t h_steps = 100;
  // policy / value
  double h = 4.0, x = 0.0;
  std::size_t x_steps = 400;
  // simulation
  double x0 = 0, h0 = 4, y = 0, dt = 1.0 / 252.0, horizon = 300.0;
  std::size_t paths = 1000, stride = 1;
  std::uint64_t seed = 0;
  std::string mode = "primal";
  bool solve = false;
  // sweep
  std::string param = "alpha", quantity = "thresholds";
  std::vector<double> values;
  // limits
  std::string direction = "beta1_to_0";
  std::vector<double> betas;
};

inline std::string cmd_thresholds(const Model& m, const Options& o) {
  if (o.h_steps < 1 || !(o.h_min > 0) || o.h_max < o.h_min) throw UsageError("need 0 < h-min <= h-max, h-steps >= 1");
  Table t({"h", "w_bkrp", "w_low", "w_ref", "w_peak", "w_updt"});
  for (const ThresholdSet& s : thresholds_on_grid(m, linspace(o.h_min, o.h_max, o.h_steps)))
    t.add({s.h, s.w_bkrp, s.w_low, s.w_ref, s.w_peak, s.w_updt});
  return t.render(o.common.format);
}

inline std::string cmd_policy(const Model& m, const Options& o) {
  if (o.x_steps < 2) throw UsageError("x-steps must be >= 2");
  const Slice s = m.make_slice(o.h);
  Table t({"x", "region", "y", "c_star", "pi_star", "pi_prop", "value", "mpc", "irra"});
  for (double x : wealth_grid(s.th, o.x_steps)) {
    const PolicyEvaluation e = policy_from_dual(m, s, x, invert(m, s, x));
    t.add({x, std::string(to_string(e.region)), e.y, e.c_star, e.pi_star, e.pi_prop, e.value, e.mpc, e.irra});
  }
  return t.render(o.common.format);
}

inline std::string cmd_value(const Model& m, const Options& o) {
  const PolicyEvaluation e = evaluate_policy(m, o.x, o.h);
  const DualValue d = dual_value(m, e.y, o.h);
  Table t({"x", "h", "region", "branch", "y", "value", "v_tilde", "v_tilde_y", "v_tilde_yy", "v_tilde_h"});
  t.add({o.x, o.h, std::string(to_string(e.region)), std::string(to_string(d.branch)), e.y, e.value, d.v_tilde,
         d.v_tilde_y, d.v_tilde_yy, d.v_tilde_h});
  return t.render(o.common.format);
}

inline SimConfig sim_config(const Options& o) {
  SimConfig c;
  c.t_horizon = o.horizon;
  c.dt = o.dt;
  c.n_paths = o.paths;
  c.seed = o.seed;
  c.record_stride = o.stride;
  c.threads = o.common.threads;
  c.check();
  return c;
}

inline std::string cmd_simulate(const Model& m, const Options& o, std::ostream& err) {
  const SimConfig c = sim_config(o);
  if (o.mode == "dual") {
    Table t({"path_id", "t", "Y", "Hhat", "infY"});
    const auto paths = simulate_dual(m, o.y, o.h0, c);
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (std::size_t k = 0; k < paths[i].t.size(); ++k)
        t.add({static_cast<double>(i), paths[i].t[k], paths[i].Y[k], paths[i].Hhat[k], paths[i].infY[k]});
    return t.render(o.common.format);
  }
  Table t({"path_id", "t", "X", "H", "c", "pi", "region"});
  const auto paths = simulate_primal(m, o.x0, o.h0, c);
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const PathRecord& p = paths[i];
    clamps += p.clamp_events;
    for (std::size_t k = 0; k < p.t.size(); ++k)
      t.add({static_cast<double>(i), p.t[k], p.X[k], p.H[k], p.c[k], p.pi[k], std::string(to_string(p.region[k]))});
  }
  err << "clamp events: " << clamps << " over " << paths.size() * c.steps() << " steps\n";
  return t.render(o.common.format);
}

inline std::string cmd_budget(const Model& m, const Options& o) {
  const SimConfig c = sim_config(o);
  if (o.solve) {
    YStarOptions yo;
    const ThresholdSet th = thresholds_at(m, o.h0);
    const bool inside = o.x0 >= th.w_bkrp && o.x0 <= th.w_updt;
    const double y_inv = inside ? invert(m, o.x0, o.h0).y : std::numeric_limits<double>::quiet_NaN();
    const YStarResult r = solve_y_star(m, o.x0, o.h0, c, yo);
    Table t({"x0", "h0", "y_star", "se", "slope", "truncation_bound", "y_tolerance", "y_invert", "passes"});
    t.add({o.x0, o.h0, r.y, r.se, r.slope, r.truncation_bound, r.y_tolerance(), y_inv, static_cast<double>(r.passes)});
    return t.render(o.common.format);
  }
  const BudgetEstimate b = budget_functional(m, o.y, o.h0, c);
  Table t({"y", "h0", "estimate", "se", "d_estimate_d_log_y", "truncation_bound", "n_paths"});
  t.add({b.y, o.h0, b.estimate, b.se, b.dlog, b.truncation_bound, static_cast<double>(b.n_paths)});
  return t.render(o.common.format);
}

inline std::string cmd_sweep(const ModelParams& p, const Options& o) {
  SweepSpec s;
  s.parameter = sweep_param_from_string(o.param);
  s.quantity = sweep_quantity_from_string(o.quantity);
  s.values = o.values;
  s.held = p;
  s.h = o.h;
  s.x_steps = o.x_steps;
  s.threads = o.common.threads;
  s.allow_reference_degenerate = true;
  if (s.values.empty()) throw UsageError("--values is required");
  if (s.quantity == SweepQuantity::Thresholds) s.h_grid = linspace(o.h_min, o.h_max, o.h_steps);
  Table t({"swept_param", "swept_value", "h", "x", "quantity", "value"});
  for (const SweepRow& r : run_sweep(s)) t.add({r.swept_param, r.swept_value, r.h, r.x, r.quantity, r.value});
  return t.render(o.common.format);
}

inline std::string cmd_limits(const ModelParams& p, const Options& o, std::ostream& err) {
  const LimitDirection d = limit_direction_from_string(o.direction);
  std::vector<double> betas = o.betas;
  if (betas.empty())
    betas = d == LimitDirection::Beta1ToZero ? std::vector<double>{1, 1e-1, 1e-2, 1e-4, 1e-6}
                                             : std::vector<double>{1, 1e-1, 1e-2, 1e-3};
  const LimitReport r = limiting_case(p, d, betas, o.h);
  Table t({"kind", "beta", "w_low", "w_ref", "w_peak", "w_updt"});
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const ThresholdSet& s = r.trajectory[i];
    t.add({std::string("computed"), betas[i], s.w_low, s.w_ref, s.w_peak, s.w_updt});
  }
  if (r.closed_form) {
    const Beta1Limits& L = *r.closed_form;
    t.add({std::string("limit"), 0.0, L.w_low, L.w_low, L.w_peak, L.w_updt});
    err << "gap W_ref-W_low shrinking: " << (r.gap_shrinking ? "pass" : "warn")
              << "; max relative error vs limits: " << fmt(r.max_rel_error) << "\n";
  } else {
    err << "W_low growth beyond " << fmt(r.growth_factor) << "x: " << (r.unbounded_growth ? "pass" : "warn")
              << "\n";
  }
  return t.render(o.common.format);
}

/// Property report: smooth fit, convexity, ordering and round trip on an h grid.
inline std::string cmd_check(const Model& m, const Options& o, bool& ok) {
  Table t({"check", "h", "worst", "tolerance", "status"});
  ok = true;
  auto row = [&](const std::string& name, double h, double worst, double tol) {
    const bool pass = worst <= tol;
    ok = ok && pass;
    t.add({name, h, worst, tol, std::string(pass ? "pass" : "fail")});
  };
  for (double h : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    const ResidualReport rr = smooth_fit_residuals(m, h);
    row("smooth_fit", h, rr.worst_relative(), 1e-9);
    const auto s = m.slice(h);
    const ThresholdSet& th = s->th;
    const double ord = std::max({th.w_bkrp - th.w_low, th.w_low - th.w_ref, th.w_ref - th.w_peak,
                                 th.w_peak - th.w_updt, 0.0});
    row("ordering", h, ord, 0.0);
    double conv = 0, rt = 0;
    const double l4 = s->cp.lb.l4;
    const double top = std::max(s->cp.lb.l1, 0.0) + 5.0;
    for (int i = 0; i <= 200; ++i) {
      const double u = l4 + (top - l4) * i / 200.0;
      const Jet<double> j = m.vtilde(s->cp, branch_of(s->cp.lb, u), u);
      if (!(j.vyy > 0)) conv = std::max(conv, 1.0 + std::abs(j.vyy));
    }
    row("convexity", h, conv, 0.0);
    for (double x : wealth_grid(th, 101)) {
      const DualPoint dp = invert(m, *s, x);
      const double gap = std::abs(x + m.vtilde(s->cp, dp.f_branch, std::log(dp.y)).vy) / std::max(1.0, x);
      rt = std::max(rt, gap);
    }
    row("round_trip", h, rt, 1e-9);
  }
  return t.render(o.common.format);
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  const std::string tmp = path + ".partial";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw UsageError("cannot write output file '" + path + "'");
    f << text;
    if (!f) {
      std::filesystem::remove(tmp);
      throw DomainError("failed writing output file '" + path + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Consumption and investment with a past-peak habit, drawdown floor and reference-dependent risk aversion"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // -h is taken by --h on some subcommands
  Options o;

  auto* th = app.add_subcommand("thresholds", "W_bkrp..W_updt on an h grid");
  auto* po = app.add_subcommand("policy", "optimal policy on an x grid at fixed h");
  auto* va = app.add_subcommand("value", "value function and dual quantities at (x,h)");
  auto* si = app.add_subcommand("simulate", "Monte Carlo paths of the optimal wealth or of the dual process");
  auto* bu = app.add_subcommand("budget", "budget functional E int c* M dt, or solve it for y");
  auto* sw = app.add_subcommand("sweep", "sensitivity sweep over alpha, lambda, beta1 or beta2");
  auto* li = app.add_subcommand("limits", "limiting cases beta1 -> 0 or beta2 -> 0");
  auto* ch = app.add_subcommand("check", "smooth fit, convexity, ordering and round-trip report");
  for (auto* sc : {th, po, va, si, bu, sw, li, ch}) add_common(sc, o.common);

  for (auto* sc : {th, sw}) {
    sc->add_option("--h-min", o.h_min);
    sc->add_option("--h-max", o.h_max);
    sc->add_option("--h-steps", o.h_steps);
  }
  for (auto* sc : {po, va, sw, li}) sc->add_option("--h", o.h);
  for (auto* sc : {po, sw}) sc->add_option("--x-steps", o.x_steps);
  va->add_option("--x", o.x)->required();

  for (auto* sc : {si, bu}) {
    sc->add_option("--seed", o.seed, "RNG seed")->required();
    sc->add_option("--h0", o.h0);
    sc->add_option("--paths", o.paths);
    sc->add_option("--dt", o.dt);
    sc->add_option("--horizon", o.horizon);
    sc->add_option("--x0", o.x0);
    sc->add_option("--y", o.y);
  }
  si->add_option("--mode", o.mode)->check(CLI::IsMember({"primal", "dual"}));
  si->add_option("--stride", o.stride, "record every k-th step");
  bu->add_flag("--solve", o.solve, "solve the budget equation for y at --x0");

  sw->add_option("--param", o.param)->check(CLI::IsMember({"alpha", "lambda", "beta1", "beta2"}));
  sw->add_option("--quantity", o.quantity)->check(CLI::IsMember({"thresholds", "consumption", "proportion"}));
  sw->add_option("--values", o.values, "swept values")->delimiter(',')->required();
  li->add_option("--direction", o.direction)->check(CLI::IsMember({"beta1_to_0", "beta2_to_0"}));
  li->add_option("--betas", o.betas)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  const std::string& outpath = o.common.output;
  try {
    const ModelParams p = load_params(o.common.params_path);
    std::string text;
    bool ok = true;
    if (sw->parsed()) {
      text = cmd_sweep(p, o);
    } else if (li->parsed()) {
      text = cmd_limits(p, o, err);
    } else {
      const Model m(p, o.common.allow_degenerate);
      if (th->parsed()) text = cmd_thresholds(m, o);
      else if (po->parsed()) text = cmd_policy(m, o);
      else if (va->parsed()) text = cmd_value(m, o);
      else if (si->parsed()) text = cmd_simulate(m, o, err);
      else if (bu->parsed()) text = cmd_budget(m, o);
      else if (ch->parsed()) text = cmd_check(m, o, ok);
    }
    write_output(outpath, text, out);
    return ok ? 0 : 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    if (!outpath.empty()) {
      std::error_code ec;
      std::filesystem::remove(outpath + ".partial", ec);
    }
    return 1;
  }
}

}  // namespace peakhabit::cli
