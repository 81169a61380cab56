#pragma once

#include <array>
#include <cmath>
#include <limits>

namespace covar {

inline constexpr int kMaxDim = 4;

/// A value together with its partial derivatives along every chart axis.
/// Arithmetic applies the chain and product rules (first-order forward mode).
struct Jet {
  double v = 0.0;
  std::array<double, kMaxDim> d{};

  static Jet constant(double value) { return Jet{value, {}}; }

  /// Value whose derivatives are unknown.
  static Jet opaque(double value) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return Jet{value, {nan, nan, nan, nan}};
  }

  Jet& operator+=(const Jet& o) {
    v += o.v;
    for (int i = 0; i < kMaxDim; ++i) d[i] += o.d[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    v -= o.v;
    for (int i = 0; i < kMaxDim; ++i) d[i] -= o.d[i];
    return *this;
  }
  Jet& operator*=(double s) {
    v *= s;
    for (auto& x : d) x *= s;
    return *this;
  }
};

inline Jet operator-(Jet a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator*(Jet a, double s) { return a *= s; }
inline Jet operator*(double s, Jet a) { return a *= s; }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  for (int i = 0; i < kMaxDim; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

inline Jet operator/(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v / b.v;
  const double inv2 = 1.0 / (b.v * b.v);
  for (int i = 0; i < kMaxDim; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
  return r;
}

inline Jet sqrt(const Jet& a) {
  Jet r;
  r.v = std::sqrt(a.v);
  for (int i = 0; i < kMaxDim; ++i) r.d[i] = a.d[i] / (2.0 * r.v);
  return r;
}

inline Jet abs(const Jet& a) { return a.v < 0.0 ? -a : a; }

/// a^p for real p; requires a > 0 unless p is an integer.
inline Jet pow(const Jet& a, double p) {
  Jet r;
  r.v = std::pow(a.v, p);
  const double slope = p == 0.0 ? 0.0 : p * std::pow(a.v, p - 1.0);
  for (int i = 0; i < kMaxDim; ++i) r.d[i] = slope * a.d[i];
  return r;
}

}  // namespace covar
