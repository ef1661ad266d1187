#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "policy.hpp"
#include "thresholds.hpp"

namespace peakhabit {

enum class Scheme { EulerMaruyama };

struct SimConfig {
  double t_horizon = 300.0;
  double dt = 1.0 / 252.0;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::EulerMaruyama;
  std::size_t record_stride = 1;  // keep every k-th step in path records
  unsigned threads = 0;           // 0: hardware concurrency

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_horizon / dt)); }
  void check() const {
    if (!(dt > 0) || !(t_horizon >= dt) || n_paths < 1 || record_stride < 1)
      throw DomainError("invalid SimConfig: need dt > 0, t_horizon >= dt, n_paths >= 1");
  }
};

struct PathRecord {
  std::vector<double> t, X, H, c, pi;
  std::vector<RegionLabel> region;
  std::size_t clamp_events = 0;
  std::size_t steps = 0;
};

struct DualPathRecord {
  std::vector<double> t, Y, Hhat, infY;
};

/// Generator for one path, fixed by (seed, path index) alone.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), 0x5eedu};
  return std::mt19937_64(ss);
}

/// Runs fn(i) for i in [0, n) over a fixed partition; output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  t = static_cast<unsigned>(std::min<std::size_t>(t, n));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

/// Exact-in-law stepping of ln Z_t with Y_t = y Z_t, plus the running minimum of
/// ln Z sampled from the Brownian-bridge law between grid points.
class DualStepper {
 public:
  DualStepper(const ModelParams& p, double dt) : dt_(dt) {
    const double theta = (p.mu - p.r) / p.sigma;
    drift_ = ((p.gamma - p.r) - 0.5 * theta * theta) * dt;
    vol_ = theta * std::sqrt(dt);
    var_ = theta * theta * dt;
  }

  double log_z = 0;
  double min_log_z = 0;

  void reset() { log_z = min_log_z = 0; }

  template <typename Rng>
  void step(Rng& rng) {
    const double a = log_z;
    const double b = a + drift_ - vol_ * normal_(rng);
    const double L = min_log_z;
    // P(bridge dips below L) = exp(-2(a-L)(b-L)/var); skip the draw when negligible
    if (b > L && 2.0 * (a - L) * (b - L) / var_ < 40.0) {
      double u = 1.0 - uniform_(rng);
      if (u <= 0) u = std::numeric_limits<double>::min();
      const double m = 0.5 * (a + b - std::sqrt((b - a) * (b - a) - 2.0 * var_ * std::log(u)));
      min_log_z = std::min(L, m);
    }
    min_log_z = std::min(min_log_z, b);
    log_z = b;
  }

 private:
  double dt_, drift_, vol_, var_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

/// H-hat = h0 v ln((1-alpha)/inf Y)/((1-alpha) beta2).
inline double hhat_from(const ModelParams& p, double h0, double log_y0, double min_log_z) {
  const double k = (1 - p.alpha) * p.beta2;
  return std::max(h0, (std::log(1 - p.alpha) - log_y0 - min_log_z) / k);
}

namespace detail {
/// c*(Y, H) and its derivative in ln y along dH/dln y.
inline void dual_consumption(const ModelParams& p, double lnY, double H, double dH, double& c, double& dc) {
  if (p.variant == Variant::GeneralReference) {
    using D = Dual<double>;
    const D Hd(H, dH);
    const PhiSpec phi = p.phi_or_zero();
    const D ph = phi(Hd);
    const D a = 1.0 - p.alpha * ph;
    const D E = D(p.alpha - p.lambda) - (1 - p.lambda) * p.alpha * ph;
    const LogBounds<D> lb = peakhabit::detail::log_bounds(p, Hd, log(a), E);
    const Branch br = branch_of(lb, lnY);
    const D cd = consumption_on(p, br, D(lnY, 1.0), Hd, a, ph);
    c = cd.v;
    dc = cd.d;
    return;
  }
  const double l1 = (p.alpha - p.lambda) * p.beta1 * H;
  const double l3 = -(1 - p.alpha) * p.beta2 * H;
  if (lnY >= l1) {
    c = p.lambda * H;
    dc = p.lambda * dH;
  } else if (lnY >= 0) {
    c = p.alpha * H - lnY / p.beta1;
    dc = p.alpha * dH - 1.0 / p.beta1;
  } else if (lnY >= l3) {
    c = p.alpha * H - lnY / p.beta2;
    dc = p.alpha * dH - 1.0 / p.beta2;
  } else {
    c = H;
    dc = dH;
  }
}
}  // namespace detail

/// Optimal consumption c*(y, h) in dual coordinates.
inline double dual_consumption(const ModelParams& p, double y, double h) {
  double c, dc;
  detail::dual_consumption(p, std::log(y), h, 0.0, c, dc);
  return c;
}

inline std::vector<PathRecord> simulate_primal(const Model& m, double x0, double h0, const SimConfig& cfg) {
  cfg.check();
  const ModelParams& p = m.params();
  const ThresholdSet t0 = thresholds_at(m, h0);
  if (x0 < t0.w_bkrp) throw OutOfEffectiveRegion("x0 below W_bkrp(h0)");
  const double H0 = x0 > t0.w_updt ? bliss_inverse(m, x0, {}, h0) : h0;
  const auto slice0 = m.slice(H0);
  const std::size_t n = cfg.steps();
  const double sq = std::sqrt(cfg.dt);

  std::vector<PathRecord> out(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
    auto rng = path_rng(cfg.seed, i);
    boost::random::normal_distribution<double> normal;
    PathRecord& rec = out[i];
    const std::size_t keep = n / cfg.record_stride + 2;
    for (auto* v : {&rec.t, &rec.X, &rec.H, &rec.c, &rec.pi}) v->reserve(keep);
    rec.region.reserve(keep);
    std::shared_ptr<const Slice> owned = slice0;
    const Slice* s = owned.get();
    Slice local;
    double X = x0, H = H0;
    for (std::size_t k = 0; k <= n; ++k) {
      const PolicyEvaluation e = policy_from_dual(m, *s, X, invert(m, *s, X));
      if (k % cfg.record_stride == 0 || k == n) {
        rec.t.push_back(static_cast<double>(k) * cfg.dt);
        rec.X.push_back(X);
        rec.H.push_back(H);
        rec.c.push_back(e.c_star);
        rec.pi.push_back(e.pi_star);
        rec.region.push_back(e.region);
      }
      if (k == n) break;
      const double z = normal(rng);
      X += (p.r * X + e.pi_star * (p.mu - p.r) - e.c_star) * cfg.dt + e.pi_star * p.sigma * sq * z;
      if (X < s->th.w_bkrp) {
        X = s->th.w_bkrp;
        ++rec.clamp_events;
      }
      if (X > s->th.w_updt) {
        H = bliss_inverse(m, X, {}, H);
        local = m.make_slice(H);
        s = &local;
        if (X > s->th.w_updt) X = s->th.w_updt;
      }
    }
    rec.steps = n;
  });
  return out;
}

inline std::vector<DualPathRecord> simulate_dual(const Model& m, double y, double h0, const SimConfig& cfg) {
  cfg.check();
  if (!(y > 0)) throw DomainError("simulate_dual needs y > 0");
  const ModelParams& p = m.params();
  const std::size_t n = cfg.steps();
  const double ly = std::log(y);
  std::vector<DualPathRecord> out(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
    auto rng = path_rng(cfg.seed, i);
    DualStepper st(p, cfg.dt);
    DualPathRecord& rec = out[i];
    for (std::size_t k = 0; k <= n; ++k) {
      if (k % cfg.record_stride == 0 || k == n) {
        rec.t.push_back(static_cast<double>(k) * cfg.dt);
        rec.Y.push_back(std::exp(ly + st.log_z));
        rec.infY.push_back(std::exp(ly + st.min_log_z));
        rec.Hhat.push_back(hhat_from(p, h0, ly, st.min_log_z));
      }
      if (k == n) break;
      st.step(rng);
    }
  });
  return out;
}

struct BudgetEstimate {
  double y = 0;
  double estimate = 0;
  double se = 0;
  double dlog = 0;     // d estimate / d ln y (pathwise)
  double dlog_se = 0;
  double truncation_bound = 0;
  std::size_t n_paths = 0;
};

/// Tail bound for truncating the budget integral at T: e^{-rT} h_max / r.
inline double budget_truncation_bound(const Model& m, const SimConfig& cfg) {
  const double r = m.params().r;
  return std::exp(-r * cfg.t_horizon) * m.h_max() / r;
}

/// E int_0^T c*(Y_t, H-hat_t) M_t dt for several y on common paths.
inline std::vector<BudgetEstimate> budget_functional_grid(const Model& m, const std::vector<double>& ys, double h0,
                                                          const SimConfig& cfg) {
  cfg.check();
  const ModelParams& p = m.params();
  for (double y : ys)
    if (!(y > 0)) throw DomainError("budget_functional needs y > 0");
  const std::size_t ny = ys.size(), n = cfg.steps(), np = cfg.n_paths;
  std::vector<double> lys(ny);
  for (std::size_t j = 0; j < ny; ++j) lys[j] = std::log(ys[j]);
  const double dHk = -1.0 / ((1 - p.alpha) * p.beta2);
  const double log1a = std::log(1 - p.alpha);
  // per-path integrals: [path][2*j] value, [path][2*j+1] d/dln y
  std::vector<double> acc(np * 2 * ny, 0.0);

  parallel_for(np, cfg.threads, [&](std::size_t i) {
    auto rng = path_rng(cfg.seed, i);
    DualStepper st(p, cfg.dt);
    double* a = &acc[i * 2 * ny];
    std::vector<double> f_prev(2 * ny);
    auto integrand = [&](double t, double* f) {
      const double M = std::exp(st.log_z - p.gamma * t);
      for (std::size_t j = 0; j < ny; ++j) {
        const double H = std::max(h0, -(log1a - lys[j] - st.min_log_z) * dHk);
        const double dH = H > h0 ? dHk : 0.0;
        double c, dc;
        detail::dual_consumption(p, lys[j] + st.log_z, H, dH, c, dc);
        f[2 * j] = c * M;
        f[2 * j + 1] = dc * M;
      }
    };
    integrand(0.0, f_prev.data());
    std::vector<double> f(2 * ny);
    const double hdt = 0.5 * cfg.dt;
    for (std::size_t k = 1; k <= n; ++k) {
      st.step(rng);
      integrand(static_cast<double>(k) * cfg.dt, f.data());
      for (std::size_t q = 0; q < 2 * ny; ++q) a[q] += hdt * (f_prev[q] + f[q]);
      std::swap(f, f_prev);
    }
  });

  std::vector<BudgetEstimate> out(ny);
  const double tb = budget_truncation_bound(m, cfg);
  for (std::size_t j = 0; j < ny; ++j) {
    for (int w = 0; w < 2; ++w) {
      double mean = 0, m2 = 0;
      for (std::size_t i = 0; i < np; ++i) {
        const double v = acc[i * 2 * ny + 2 * j + w];
        const double d = v - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (v - mean);
      }
      const double se = np > 1 ? std::sqrt(m2 / static_cast<double>(np - 1) / static_cast<double>(np)) : 0.0;
      if (w == 0) {
        out[j].estimate = mean;
        out[j].se = se;
      } else {
        out[j].dlog = mean;
        out[j].dlog_se = se;
      }
    }
    out[j].y = ys[j];
    out[j].truncation_bound = tb;
    out[j].n_paths = np;
  }
  return out;
}

inline BudgetEstimate budget_functional(const Model& m, double y, double h0, const SimConfig& cfg) {
  return budget_functional_grid(m, {y}, h0, cfg).front();
}

struct YStarResult {
  double y = 0;
  double se = 0;                // SE of the budget estimate near y
  double slope = 0;             // d estimate / d y at y
  double truncation_bound = 0;
  int passes = 0;
  std::vector<BudgetEstimate> probes;  // extra y values evaluated on the final paths

  /// y-tolerance equivalent to a budget tolerance of 2 SE + truncation bound.
  double y_tolerance() const { return (2.0 * se + truncation_bound) / std::abs(slope); }
};

struct YStarOptions {
  std::size_t pilot_divisor = 50;   // pilot uses n_paths / divisor paths
  double pilot_dt_factor = 4.0;     // and a coarser step
  int grid_points = 3;              // final-pass grid across the pilot window
  int max_passes = 6;
  std::vector<double> probes;
};

/// Solves E int c* M dt = x0 for y on common random numbers: a coarse pilot
/// brackets the root on [1e-8, 1e8], a full pass over a small window around the
/// pilot root refines it by cubic Hermite interpolation using pathwise derivatives.
inline YStarResult solve_y_star(const Model& m, double x0, double h0, const SimConfig& cfg,
                                const YStarOptions& opt = {}) {
  cfg.check();
  const ThresholdSet t = thresholds_at(m, h0);
  if (x0 < t.w_bkrp || x0 > t.w_updt) throw OutOfEffectiveRegion("x0 outside [W_bkrp(h0), W_updt(h0)]");

  SimConfig pc = cfg;
  pc.n_paths = std::max<std::size_t>(std::min<std::size_t>(cfg.n_paths, 200), cfg.n_paths / opt.pilot_divisor);
  pc.dt = std::min(cfg.dt * opt.pilot_dt_factor, cfg.t_horizon);
  std::vector<double> grid;
  for (int i = 0; i <= 64; ++i) grid.push_back(std::pow(10.0, -8.0 + 0.25 * i));
  const auto pilot = budget_functional_grid(m, grid, h0, pc);
  std::size_t cell = grid.size();
  for (std::size_t j = 0; j + 1 < grid.size(); ++j)
    if (pilot[j].estimate >= x0 && pilot[j + 1].estimate < x0) {
      cell = j;
      break;
    }
  if (cell == grid.size()) throw ConvergenceError("solve_y_star: no bracket within y in [1e-8, 1e8]", 0.0);

  // final window: pilot root +- a few pilot standard errors, mapped to ln y
  const BudgetEstimate& pa = pilot[cell];
  const BudgetEstimate& pb = pilot[cell + 1];
  const double ua = std::log(grid[cell]), ub = std::log(grid[cell + 1]);
  const double up = ua + (pa.estimate - x0) / (pa.estimate - pb.estimate) * (ub - ua);
  const double dl = std::min(-0.5 * (pa.dlog + pb.dlog), (pa.estimate - pb.estimate) / (ub - ua));
  double half = dl > 0 ? (4.0 * std::max(pa.se, pb.se) + pa.truncation_bound) / dl : ub - ua;
  half = std::clamp(half, 0.01, ub - ua);
  double lo = up - half, hi = up + half;
  const int K = std::max(2, opt.grid_points);
  YStarResult res;
  for (int pass = 1; pass <= opt.max_passes; ++pass) {
    std::vector<double> ys;
    for (int i = 0; i < K; ++i) ys.push_back(std::exp(lo + (hi - lo) * i / (K - 1)));
    const std::size_t nprobe = opt.probes.size();
    std::vector<double> all = ys;
    all.insert(all.end(), opt.probes.begin(), opt.probes.end());
    const auto est = budget_functional_grid(m, all, h0, cfg);
    res.passes = pass;
    const double width = hi - lo;
    if (est.front().estimate < x0) {
      hi = lo;
      lo -= width;
      continue;
    }
    if (est[K - 1].estimate >= x0) {
      lo = hi;
      hi += width;
      continue;
    }
    int j = 0;
    while (!(est[j].estimate >= x0 && est[j + 1].estimate < x0)) ++j;
    const double u0 = std::log(ys[j]), u1 = std::log(ys[j + 1]), du = u1 - u0;
    const double b0 = est[j].estimate, b1 = est[j + 1].estimate;
    const double d0 = est[j].dlog * du, d1 = est[j + 1].dlog * du;
    auto herm = [&](double s) {
      const double s2 = s * s, s3 = s2 * s;
      return (2 * s3 - 3 * s2 + 1) * b0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * b1 + (s3 - s2) * d1;
    };
    auto dherm = [&](double s) {
      const double s2 = s * s;
      return ((6 * s2 - 6 * s) * b0 + (3 * s2 - 4 * s + 1) * d0 + (-6 * s2 + 6 * s) * b1 + (3 * s2 - 2 * s) * d1) / du;
    };
    const RootResult r = solve_bracketed([&](double s) { return herm(s) - x0; }, 0.0, 1.0, b0 - x0, b1 - x0, 1e-14);
    const double u = u0 + r.x * du;
    res.y = std::exp(u);
    res.se = std::max(est[j].se, est[j + 1].se);
    res.slope = dherm(r.x) / res.y;
    res.truncation_bound = est[j].truncation_bound;
    res.probes.assign(est.begin() + K, est.begin() + K + static_cast<std::ptrdiff_t>(nprobe));
    return res;
  }
  throw ConvergenceError("solve_y_star: final bracket not established", std::exp(0.5 * (lo + hi)));
}

}  // namespace peakhabit
