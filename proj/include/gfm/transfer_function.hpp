#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfm/core_model.hpp"

namespace gfm {

/// Real polynomial, coefficients in descending powers of s.
using Poly = std::vector<double>;

inline cplx polyval(std::span<const double> p, cplx s) {
  cplx acc{0.0, 0.0};
  for (double c : p) acc = acc * s + c;
  return acc;
}

inline double polyval(std::span<const double> p, double x) {
  double acc = 0.0;
  for (double c : p) acc = acc * x + c;
  return acc;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  const std::size_t oa = out.size() - a.size();
  const std::size_t ob = out.size() - b.size();
  for (std::size_t k = 0; k < a.size(); ++k) out[oa + k] += a[k];
  for (std::size_t k = 0; k < b.size(); ++k) out[ob + k] += b[k];
  return out;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
  return out;
}

inline Poly poly_scale(Poly p, double k) {
  for (double& c : p) c *= k;
  return p;
}

/// Drops leading coefficients that are exactly zero (keeps at least one).
inline Poly poly_trim(Poly p) {
  std::size_t lead = 0;
  while (lead + 1 < p.size() && p[lead] == 0.0) ++lead;
  p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(lead));
  return p;
}

inline std::size_t degree(const Poly& p) { return p.empty() ? 0 : poly_trim(p).size() - 1; }

/// Real-coefficient rational transfer function num(s)/den(s).
struct RationalTF {
  Poly num{1.0};
  Poly den{1.0};

  /// Scales numerator and denominator so den is monic.
  RationalTF normalized() const {
    RationalTF out{poly_trim(num), poly_trim(den)};
    const double lead = out.den.front();
    if (lead == 0.0) throw DomainError("transfer function denominator is identically zero");
    for (double& c : out.num) c /= lead;
    for (double& c : out.den) c /= lead;
    return out;
  }

  cplx operator()(cplx s) const { return polyval(num, s) / polyval(den, s); }

  /// G(0); infinite when the denominator has a root at the origin.
  double dc_gain() const {
    const double d = den.back();
    const double n = num.back();
    if (d == 0.0) return n == 0.0 ? std::nan("") : std::copysign(INFINITY, n);
    return n / d;
  }
};

struct FrequencyResponse {
  std::vector<double> freq_hz;
  std::vector<cplx> value;
  std::vector<double> mag_db;
  std::vector<double> phase_deg;  // unwrapped
  std::vector<bool> flagged;      // exact pole hit, non-settled scan point, ...

  std::size_t size() const { return freq_hz.size(); }

  void push_back(double f, cplx h, bool flag = false) {
    freq_hz.push_back(f);
    value.push_back(h);
    flagged.push_back(flag);
    mag_db.push_back(20.0 * std::log10(std::abs(h)));
    double ph = std::arg(h) * 180.0 / std::numbers::pi;
    if (!phase_deg.empty() && std::isfinite(phase_deg.back()) && std::isfinite(ph)) {
      while (ph - phase_deg.back() > 180.0) ph -= 360.0;
      while (ph - phase_deg.back() < -180.0) ph += 360.0;
    }
    phase_deg.push_back(ph);
  }
};

inline FrequencyResponse eval_frequency_response(const RationalTF& tf,
                                                 std::span<const double> freqs_hz) {
  FrequencyResponse out;
  for (double f : freqs_hz) {
    const cplx s{0.0, kTwoPi * f};
    const cplx d = polyval(tf.den, s);
    const cplx n = polyval(tf.num, s);
    if (d == cplx{0.0, 0.0}) {
      out.push_back(f, cplx{INFINITY, 0.0}, true);
      out.mag_db.back() = INFINITY;
      out.phase_deg.back() = std::nan("");
      continue;
    }
    out.push_back(f, n / d);
  }
  return out;
}

inline std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DomainError("log_space needs 0 < lo < hi, n >= 2");
  std::vector<double> out(n);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::vector<double> lin_space(double lo, double hi, std::size_t n) {
  if (n < 2) throw DomainError("lin_space needs n >= 2");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

}  // namespace gfm
