#pragma once

#include <cmath>
#include <type_traits>

namespace peakhabit {

/// Forward-mode dual number. Nest Dual<Dual<double>> for second derivatives.
template <typename T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(double x) : v(x), d(0.0) {}
  constexpr Dual(T x, T dx) : v(x), d(dx) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <typename T> struct is_dual : std::false_type {};
template <typename T> struct is_dual<Dual<T>> : std::true_type {};

/// Innermost double value of a (possibly nested) dual.
inline double value_of(double x) { return x; }
template <typename T>
double value_of(const Dual<T>& x) { return value_of(x.v); }

template <typename T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <typename T> Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <typename T> Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <typename T> Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <typename T> Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }

template <typename T> Dual<T> operator+(Dual<T> a, double b) { a.v += b; return a; }
template <typename T> Dual<T> operator+(double b, Dual<T> a) { a.v += b; return a; }
template <typename T> Dual<T> operator-(Dual<T> a, double b) { a.v -= b; return a; }
template <typename T> Dual<T> operator-(double b, const Dual<T>& a) { return {b - a.v, -a.d}; }
template <typename T> Dual<T> operator*(const Dual<T>& a, double b) { return {a.v * b, a.d * b}; }
template <typename T> Dual<T> operator*(double b, const Dual<T>& a) { return {a.v * b, a.d * b}; }
template <typename T> Dual<T> operator/(const Dual<T>& a, double b) { return {a.v / b, a.d / b}; }
template <typename T> Dual<T> operator/(double b, const Dual<T>& a) {
  return {b / a.v, -b * a.d / (a.v * a.v)};
}

template <typename T> bool operator<(const Dual<T>& a, const Dual<T>& b) { return value_of(a) < value_of(b); }
template <typename T> bool operator>(const Dual<T>& a, const Dual<T>& b) { return value_of(a) > value_of(b); }

template <typename T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return {e, e * a.d};
}

template <typename T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}

template <typename T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}

template <typename T>
Dual<T> pow(const Dual<T>& a, double p) {
  using std::pow;
  return {pow(a.v, p), p * pow(a.v, p - 1.0) * a.d};
}

/// Seed x as the active variable.
template <typename T>
Dual<T> make_variable(const T& x) { return Dual<T>(x, T(1.0)); }

}  // namespace peakhabit
