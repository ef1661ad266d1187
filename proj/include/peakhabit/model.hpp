#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace peakhabit {

enum class Variant { Base, GeneralRate, GeneralReference };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Base: return "Base";
    case Variant::GeneralRate: return "GeneralRate";
    case Variant::GeneralReference: return "GeneralReference";
  }
  return "?";
}

inline std::optional<Variant> variant_from_string(const std::string& s) {
  if (s == "Base") return Variant::Base;
  if (s == "GeneralRate") return Variant::GeneralRate;
  if (s == "GeneralReference") return Variant::GeneralReference;
  return std::nullopt;
}

/// Reference weight phi(h). Fractional: phi_bar * h / (h + h_hat).
struct PhiSpec {
  enum class Kind { Zero, Fractional };
  Kind kind = Kind::Zero;
  double phi_bar = 0.0;
  double h_hat = 1.0;

  template <typename T>
  T operator()(const T& h) const {
    if (kind == Kind::Zero) return T(0.0);
    return phi_bar * h / (h + h_hat);
  }
  /// phi'(h)
  double derivative(double h) const {
    if (kind == Kind::Zero) return 0.0;
    return phi_bar * h_hat / ((h + h_hat) * (h + h_hat));
  }
};

struct ModelParams {
  double r = 0.04;
  double mu = 0.12;
  double sigma = 0.3;
  double gamma = 0.04;
  double lambda = 0.3;
  double alpha = 0.7;
  double beta1 = 1.0;
  double beta2 = 2.0;
  Variant variant = Variant::Base;
  std::optional<PhiSpec> phi;

  /// Reference weight; zero unless GeneralReference carries a phi.
  PhiSpec phi_or_zero() const {
    if (variant == Variant::GeneralReference && phi) return *phi;
    return PhiSpec{};
  }
};

/// Parameters for which every invariant has been checked.
class ValidatedParams {
 public:
  const ModelParams& get() const { return p_; }
  const ModelParams* operator->() const { return &p_; }

 private:
  explicit ValidatedParams(ModelParams p) : p_(std::move(p)) {}
  ModelParams p_;
  friend ValidatedParams validate(const ModelParams&, bool);
};

namespace detail {
inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}
}  // namespace detail

/// Checks every invariant and reports all violations at once.
/// allow_reference_degenerate admits alpha == lambda (sweep endpoints only).
inline ValidatedParams validate(const ModelParams& p, bool allow_reference_degenerate = false) {
  using detail::fmt;
  std::vector<std::string> bad;
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) bad.push_back(std::string(name) + " must be finite");
    return std::isfinite(v);
  };
  bool ok = finite(p.r, "r") & finite(p.mu, "mu") & finite(p.sigma, "sigma") &
            finite(p.gamma, "gamma") & finite(p.lambda, "lambda") & finite(p.alpha, "alpha") &
            finite(p.beta1, "beta1") & finite(p.beta2, "beta2");
  if (ok) {
    if (!(p.sigma > 0)) bad.push_back("sigma must be > 0 (got " + fmt(p.sigma) + ")");
    if (!(p.beta1 > 0)) bad.push_back("beta1 must be > 0 (got " + fmt(p.beta1) + ")");
    if (!(p.beta2 > 0)) bad.push_back("beta2 must be > 0 (got " + fmt(p.beta2) + ")");
    if (!(p.r > 0)) bad.push_back("r must be > 0 (got " + fmt(p.r) + ")");
    if (!(p.gamma > 0)) bad.push_back("gamma must be > 0 (got " + fmt(p.gamma) + ")");
    if (!(p.mu >= p.r)) bad.push_back("mu must be >= r (got mu=" + fmt(p.mu) + ", r=" + fmt(p.r) + ")");
    if (!(p.lambda >= 0)) bad.push_back("lambda must be >= 0 (got " + fmt(p.lambda) + ")");
    if (allow_reference_degenerate) {
      if (!(p.lambda <= p.alpha))
        bad.push_back("lambda must be <= alpha (got lambda=" + fmt(p.lambda) + ", alpha=" + fmt(p.alpha) + ")");
    } else if (!(p.lambda < p.alpha)) {
      bad.push_back("lambda must be < alpha (got lambda=" + fmt(p.lambda) + ", alpha=" + fmt(p.alpha) + ")");
    }
    if (!(p.alpha < 1)) bad.push_back("alpha must be < 1 (got " + fmt(p.alpha) + ")");
    if (p.variant == Variant::Base && p.r != p.gamma)
      bad.push_back("variant Base requires r == gamma (got r=" + fmt(p.r) + ", gamma=" + fmt(p.gamma) + ")");
    if (p.variant == Variant::GeneralReference && p.r != p.gamma)
      bad.push_back("variant GeneralReference requires r == gamma (got r=" + fmt(p.r) + ", gamma=" +
                    fmt(p.gamma) + ")");
  }
  if (p.phi && p.phi->kind != PhiSpec::Kind::Zero && p.variant != Variant::GeneralReference)
    bad.push_back("phi applies only to variant GeneralReference");
  if (p.variant == Variant::GeneralReference) {
    if (!p.phi) {
      bad.push_back("variant GeneralReference requires phi");
    } else if (p.phi->kind == PhiSpec::Kind::Fractional) {
      const PhiSpec& f = *p.phi;
      if (!(f.phi_bar >= 0 && f.phi_bar <= 1))
        bad.push_back("phi.phi_bar must lie in [0, 1] (got " + fmt(f.phi_bar) + ")");
      if (!(f.h_hat > 0)) bad.push_back("phi.h_hat must be > 0 (got " + fmt(f.h_hat) + ")");
      if (ok && p.alpha > 0 && p.lambda < 1) {
        double cap = (p.alpha - p.lambda) / (p.alpha * (1 - p.lambda));
        if (!(f.phi_bar < cap))
          bad.push_back("phi.phi_bar must be < (alpha-lambda)/(alpha(1-lambda)) = " + fmt(cap) + " (got " +
                        fmt(f.phi_bar) + ")");
      }
      if (f.h_hat > 0 && f.phi_bar >= 0 && f.phi_bar <= 1) {
        // phi'(h) h + phi(h) <= 1, sampled on a log grid
        for (int i = 0; i <= 200; ++i) {
          double h = std::pow(10.0, -4.0 + 8.0 * i / 200.0);
          if (f.derivative(h) * h + f(h) > 1.0 + 1e-15) {
            bad.push_back("phi violates phi'(h) h + phi(h) <= 1 at h=" + fmt(h));
            break;
          }
        }
      }
    }
  }
  if (!bad.empty()) throw ParamDomainError(std::move(bad));
  return ValidatedParams(p);
}

struct StatePoint {
  double x;
  double h;
};

}  // namespace peakhabit
