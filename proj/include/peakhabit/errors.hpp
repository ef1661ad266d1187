#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace peakhabit {

/// Base of every domain-level failure (CLI exit code 1).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParamDomainError : public DomainError {
 public:
  explicit ParamDomainError(std::vector<std::string> violations)
      : DomainError(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid parameters:";
    for (const auto& m : v) s += "\n  - " + m;
    return s;
  }
  std::vector<std::string> violations_;
};

class DegenerateMarket : public DomainError {
 public:
  DegenerateMarket() : DomainError("degenerate market: mu == r gives k = 0") {}
};

class HRangeError : public DomainError {
 public:
  HRangeError(double h, double h_max)
      : DomainError("h = " + std::to_string(h) + " outside (0, " + std::to_string(h_max) + "]"),
        h_(h) {}
  double h() const { return h_; }

 private:
  double h_;
};

class OutOfDualRegion : public DomainError {
 public:
  using DomainError::DomainError;
};

class OutOfEffectiveRegion : public DomainError {
 public:
  using DomainError::DomainError;
};

class BracketError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ConvergenceError : public DomainError {
 public:
  ConvergenceError(const std::string& what, double best) : DomainError(what), best_(best) {}
  double best_iterate() const { return best_; }

 private:
  double best_;
};

}  // namespace peakhabit
