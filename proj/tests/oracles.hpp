#pragma once

// Independent reference implementations and frozen high-precision values.
// Nothing here calls into the library's evaluation code.

#include <array>
#include <cmath>
#include <random>

#include <peakhabit/model.hpp>

namespace oracle {

using ld = long double;

struct Roots {
  ld k, q1, q2;
};

/// Roots of k q^2 - (k + r - gamma) q - gamma = 0 in long double.
inline Roots roots(const peakhabit::ModelParams& p) {
  const ld r = p.r, g = p.gamma, mu = p.mu, s = p.sigma;
  const ld k = (r - mu) * (r - mu) / (2 * s * s);
  const ld b = k + r - g;
  const ld disc = std::sqrt(b * b + 4 * k * g);
  // q1 via the product of roots to avoid cancellation
  const ld q2 = (b + disc) / (2 * k);
  const ld q1 = -g / (k * q2);
  return {k, q1, q2};
}

/// Base variant (r = gamma) closed forms, transcribed directly and evaluated in long double.
struct Base {
  ld r, g, lam, al, b1, b2, k, q1, q2, h;
  std::array<ld, 9> C{};  // 1-based

  Base(const peakhabit::ModelParams& p, ld h_) : h(h_) {
    r = p.r;
    g = p.gamma;
    lam = p.lambda;
    al = p.alpha;
    b1 = p.beta1;
    b2 = p.beta2;
    const Roots rt = roots(p);
    k = rt.k;
    q1 = rt.q1;
    q2 = rt.q2;
    const ld A = k / (g * g) * (1 - q1) / (q2 - q1);
    const ld B = k / (g * g) * (q2 - 1) / (q2 - q1);
    const ld d = (b2 - b1) / (b1 * b2);
    const ld D = (1 - al) * (q2 - q1) * b2 + (al - lam) * (q2 - 1) * b1;
    const ld P1 = (1 - q1) * k / (g * g);
    const ld c7 = std::pow(1 - al, q2 - q1) * A * (al - lam) * (q2 - 1) / D * std::exp(-D * h) +
                  std::pow(1 - al, q2 - q1) * P1 / ((1 - q1) * b2) * (q2 - 1) / (q2 - q1) *
                      std::exp(-(1 - al) * (1 - q1) * b2 * h);
    C[7] = c7;
    C[5] = c7 - B / b2 * std::exp(-(1 - al) * (1 - q1) * b2 * h);
    C[4] = -A / b1 * std::exp(-(al - lam) * (q2 - 1) * b1 * h);
    C[6] = C[4] + A * d;
    C[3] = C[5] - B * d;
    C[1] = C[3] + B / b1 * std::exp((al - lam) * (1 - q1) * b1 * h);
    C[8] = C[6] + A / b2 * std::exp((1 - al) * (q2 - 1) * b2 * h);
    C[2] = 0;
  }

  ld y1() const { return std::exp((al - lam) * b1 * h); }
  ld y3() const { return std::exp(-(1 - al) * b2 * h); }
  ld y4() const { return (1 - al) * std::exp(-(1 - al) * b2 * h); }

  int branch(ld y) const { return y >= y1() ? 1 : y >= 1 ? 2 : y >= y3() ? 3 : 4; }

  ld V(ld y, int br) const {
    switch (br) {
      case 1: return C[1] * std::pow(y, q1) - lam * h * y / r + (1 - std::exp((al - lam) * b1 * h)) / (g * b1);
      case 2:
      case 3: {
        const ld be = br == 2 ? b1 : b2;
        const ld G = (g - 2 * r + k) / (r * r);
        return C[2 * br - 1] * std::pow(y, q1) + C[2 * br] * std::pow(y, q2) + y * std::log(y) / (r * be) +
               G * y / be - al * h * y / r + 1 / (g * be);
      }
      default: return C[7] * std::pow(y, q1) + C[8] * std::pow(y, q2) - h * y / r + (1 - std::exp(-(1 - al) * b2 * h)) / (g * b2);
    }
  }

  ld Vy(ld y, int br) const {
    switch (br) {
      case 1: return C[1] * q1 * std::pow(y, q1 - 1) - lam * h / r;
      case 2:
      case 3: {
        const ld be = br == 2 ? b1 : b2;
        const ld G = (g - 2 * r + k) / (r * r);
        return C[2 * br - 1] * q1 * std::pow(y, q1 - 1) + C[2 * br] * q2 * std::pow(y, q2 - 1) +
               (std::log(y) + 1) / (r * be) + G / be - al * h / r;
      }
      default: return C[7] * q1 * std::pow(y, q1 - 1) + C[8] * q2 * std::pow(y, q2 - 1) - h / r;
    }
  }

  ld Vyy(ld y, int br) const {
    switch (br) {
      case 1: return C[1] * q1 * (q1 - 1) * std::pow(y, q1 - 2);
      case 2:
      case 3: {
        const ld be = br == 2 ? b1 : b2;
        return C[2 * br - 1] * q1 * (q1 - 1) * std::pow(y, q1 - 2) + C[2 * br] * q2 * (q2 - 1) * std::pow(y, q2 - 2) +
               1 / (r * be * y);
      }
      default: return C[7] * q1 * (q1 - 1) * std::pow(y, q1 - 2) + C[8] * q2 * (q2 - 1) * std::pow(y, q2 - 2);
    }
  }

  std::array<ld, 5> thresholds() const {
    return {lam * h / r, -Vy(y1(), 1), -Vy(1, 2), -Vy(y3(), 3), -Vy(y4(), 4)};
  }

  /// Plain bisection on log y; 200 halvings of a bracket well inside long double range.
  ld invert(ld x) const {
    ld lo = std::log(y4()), hi = std::log(y1()) + 1;
    while (-Vy(std::exp(hi), branch(std::exp(hi))) > x) hi += 1;
    for (int i = 0; i < 200; ++i) {
      const ld m = (lo + hi) / 2;
      const ld y = std::exp(m);
      if (-Vy(y, branch(y)) > x)
        lo = m;
      else
        hi = m;
    }
    return std::exp((lo + hi) / 2);
  }

  /// Optimal consumption on the dual side.
  ld consumption(ld y) const {
    switch (branch(y)) {
      case 1: return lam * h;
      case 2: return al * h - std::log(y) / b1;
      case 3: return al * h - std::log(y) / b2;
      default: return h;
    }
  }
};

// Values below were computed once with 50-digit arithmetic from the same closed forms and frozen.
namespace frozen {
inline constexpr double base_k = 0.035555555555555556;
inline constexpr double base_q1 = -0.67260393995585739;
inline constexpr double base_q2 = 1.6726039399558574;
// C1, C3..C8 (C2 = 0)
inline constexpr std::array<double, 7> base_C_h05 = {3.969169534865104,    -4.9360797413767918, -13.854077763428965,
                                                     -1.7494210342169077,  -5.9296253594777377, 0.17994555831419899,
                                                     3.766577994366894};
inline constexpr std::array<double, 5> base_W_h05 = {3.75, 5.6606384968869034, 6.3801361473575772, 7.5510849164617388,
                                                     11.706622195368254};
inline constexpr std::array<double, 7> base_C_h4 = {89.359152460576324,    -3.240595989651263,  -5.4028905463320015,
                                                    -0.053937282491378942, 2.5215618576192255,  0.0036026257671244089,
                                                    42.334927496062845};
inline constexpr std::array<double, 5> base_W_h4 = {30, 34.136701554608449, 54.635036162278348, 86.040261348296303,
                                                    94.734267308709469};
inline constexpr double base_y_60_4 = 0.69825249778562199;
inline constexpr double base_V_60_4 = 2.7268882141668786;
inline constexpr double base_mid_lowref_x = 44.385868858443399;
inline constexpr double base_mid_lowref_y = 1.9697915574396635;
inline constexpr double base_h_bar = 6.606215913458647;
inline constexpr double base_c_60_4 = 2.9795872484775272;
inline constexpr double base_pi_60_4 = 12.993151565675933;
inline constexpr double base_mpc_60_4 = 0.034206054027610616;
inline constexpr double base_xbar_4 = 52.011810853257803;

// GeneralRate r = 0.06, gamma = 0.04
inline constexpr double gr_k = 0.02;
inline constexpr double gr_q1 = -0.73205080756887729;
inline constexpr double gr_q2 = 2.7320508075688773;
inline constexpr std::array<double, 7> gr_C_h4 = {101.69750922709657,   -3.3217802046273296, -0.11020903051909066,
                                                  -0.03563381048227596, 0.77031124200252233, 0.01581302276608661,
                                                  57.013199984053761};
inline constexpr std::array<double, 5> gr_W_h4 = {20, 24.65907141487176, 44.536051456133984, 64.967501119655245,
                                                  72.313911797927372};

// GeneralReference, phi_bar = 0.4, h_hat = 2, h = 4 (Case 1)
inline constexpr std::array<double, 7> gref_C_h4 = {30.790238696587016,    -2.8291364151181114, -10.848920300199698,
                                                    -0.046471739486325237, 0.33618866533482847, 0.0036026257671244089,
                                                    56.585088562661822};
inline constexpr std::array<double, 5> gref_W_h4 = {30, 34.827027829168446, 45.68456043689531, 83.795715636213675,
                                                    92.62339018523866};
// GeneralReference, phi_bar = 0.5, h_hat = 0.01, h = 0.5 (Case 2)
inline constexpr std::array<double, 7> gref2_C_h05 = {1.8246344793214593, 0, 0, -1.2743325679458883, -14.322951383979654,
                                                      0.17994555831419899, 5.260731434773427};
inline constexpr std::array<double, 5> gref2_W_h05 = {3.75, 4.9772563397709179, 4.9772563397709179, 7.4832493326939762,
                                                      10.797827974728763};

// beta1 -> 0 limits at h = 4 (finite-beta1 closed forms evaluated at beta1 = 1e-12)
inline constexpr double lim_w_low = 43.5793626802;
inline constexpr double lim_w_peak = 83.8568776801;
inline constexpr double lim_w_updt = 93.8839708529;
// C1, C5, C6, C7, C8 at the same point
inline constexpr std::array<double, 5> lim_C = {20.18924, -0.053476, 9.131605, 0.0040644, 48.94497};
// W_low(4) along beta2 = 1, .1, .01, .001
inline constexpr std::array<double, 4> beta2_w_low = {34.2496736383, 34.6804710888, 36.3095627132, 52.0864245552};
}  // namespace frozen

/// Random valid parameters. GeneralRate draws keep r >= gamma.
inline peakhabit::ModelParams random_params(std::mt19937_64& rng, peakhabit::Variant v) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  peakhabit::ModelParams p;
  p.variant = v;
  p.r = 0.02 + 0.05 * U(rng);
  p.gamma = v == peakhabit::Variant::GeneralRate ? p.r * (0.5 + 0.5 * U(rng)) : p.r;
  p.mu = p.r + 0.04 + 0.10 * U(rng);
  p.sigma = 0.2 + 0.2 * U(rng);
  p.lambda = 0.5 * U(rng);
  p.alpha = p.lambda + 0.05 + (0.95 - p.lambda - 0.05) * U(rng);
  p.beta1 = 0.3 + 2.7 * U(rng);
  p.beta2 = 0.3 + 2.7 * U(rng);
  return p;
}

}  // namespace oracle
