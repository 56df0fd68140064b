#pragma once

// Approximate factorization of a monic cubic
//   s^3 + (n1 + m2) s^2 + (n0 + m1) s + m0
// into a resonant quadratic and a real pole,
//   [s^2 + (n1 - m0/n0 + m2) s + n0] (s + m0/n0),
// which is accurate when n0 dominates m1 and eps = (n1 - m0/n0 + m2) m0/n0.
// exact_roots() is the independent oracle used to validate it.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "gfm/core_model.hpp"

namespace gfm {

inline constexpr double kDefaultDominance = 20.0;

struct CubicCoefficients {
  double n1 = 0.0;
  double n0 = 0.0;
  double m2 = 0.0;
  double m1 = 0.0;
  double m0 = 0.0;

  /// {1, a2, a1, a0} of the monic cubic.
  std::array<double, 4> monic() const { return {1.0, n1 + m2, n0 + m1, m0}; }

  cplx operator()(cplx s) const {
    const auto c = monic();
    return ((s + c[1]) * s + c[2]) * s + c[3];
  }
};

enum class PoleProvenance { ClosedForm, ExactOracle };

struct PoleSet {
  cplx p1;
  cplx p2;
  cplx p3;
  PoleProvenance provenance = PoleProvenance::ClosedForm;
  bool overdamped = false;  // p1, p2 real because the quadratic radicand went negative

  std::array<cplx, 3> as_array() const { return {p1, p2, p3}; }
  double max_real() const { return std::max({p1.real(), p2.real(), p3.real()}); }
};

struct FactorizationDiagnostics {
  double epsilon = 0.0;
  double ratio_n0_m1 = 0.0;
  double ratio_n0_eps = 0.0;
  double ratio_n0_n1 = 0.0;
  double ratio_n0_m0 = 0.0;
  double ratio_n0_m2 = 0.0;
  double threshold = kDefaultDominance;
  bool conditions_met = false;   // necessary set: n0 >> m1, n0 >> eps
  bool sufficient_met = false;   // n0 >> n1, m0, m1, m2
  bool overdamped = false;       // quadratic radicand negative
};

namespace detail {
inline double dominance(double n0, double x) {
  const double a = std::abs(x);
  return a == 0.0 ? std::numeric_limits<double>::infinity() : n0 / a;
}
}  // namespace detail

inline FactorizationDiagnostics check_conditions(const CubicCoefficients& c,
                                                 double dominance_threshold = kDefaultDominance) {
  if (!(c.n0 > 0.0)) throw DomainError("factorization needs n0 > 0");
  if (!(dominance_threshold >= 1.0)) throw DomainError("dominance threshold must be >= 1");
  FactorizationDiagnostics d;
  d.threshold = dominance_threshold;
  const double q = c.m0 / c.n0;
  d.epsilon = (c.n1 - q + c.m2) * q;
  d.ratio_n0_m1 = detail::dominance(c.n0, c.m1);
  d.ratio_n0_eps = detail::dominance(c.n0, d.epsilon);
  d.ratio_n0_n1 = detail::dominance(c.n0, c.n1);
  d.ratio_n0_m0 = detail::dominance(c.n0, c.m0);
  d.ratio_n0_m2 = detail::dominance(c.n0, c.m2);
  d.conditions_met = d.ratio_n0_m1 >= dominance_threshold && d.ratio_n0_eps >= dominance_threshold;
  d.sufficient_met = d.ratio_n0_n1 >= dominance_threshold &&
                     d.ratio_n0_m0 >= dominance_threshold &&
                     d.ratio_n0_m1 >= dominance_threshold &&
                     d.ratio_n0_m2 >= dominance_threshold;
  const double half = 0.5 * (c.n1 - q + c.m2);
  d.overdamped = c.n0 - half * half < 0.0;
  return d;
}

struct FactorResult {
  PoleSet poles;
  FactorizationDiagnostics diagnostics;
};

inline FactorResult factor_approx(const CubicCoefficients& c,
                                  double dominance_threshold = kDefaultDominance) {
  FactorResult out;
  out.diagnostics = check_conditions(c, dominance_threshold);
  const double q = c.m0 / c.n0;
  const double half = 0.5 * (c.n1 - q + c.m2);
  const double radicand = c.n0 - half * half;
  PoleSet& p = out.poles;
  p.provenance = PoleProvenance::ClosedForm;
  if (radicand >= 0.0) {
    const double w = std::sqrt(radicand);
    p.p1 = {-half, w};
    p.p2 = {-half, -w};
  } else {
    const double w = std::sqrt(-radicand);
    p.p1 = {-half + w, 0.0};
    p.p2 = {-half - w, 0.0};
    p.overdamped = true;
  }
  p.p3 = {-q, 0.0};
  return out;
}

/// All three roots of the cubic via companion-matrix eigenvalues, polished by
/// Newton steps. Ordering: conjugate pair first (p1 with Im > 0), real root
/// last; three real roots ascending.
inline PoleSet exact_roots(const CubicCoefficients& c) {
  const auto a = c.monic();
  Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
  companion(0, 0) = -a[1];
  companion(0, 1) = -a[2];
  companion(0, 2) = -a[3];
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(companion, false);
  std::array<cplx, 3> r{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};

  for (cplx& z : r) {
    for (int it = 0; it < 3; ++it) {
      const cplx f = c(z);
      const cplx df = (3.0 * z + 2.0 * a[1]) * z + a[2];
      if (std::abs(df) == 0.0) break;
      const cplx next = z - f / df;
      if (!(std::abs(c(next)) < std::abs(f))) break;
      z = next;
    }
  }

  // Discriminant sign decides between three real roots and a conjugate pair.
  const double p = a[1], q = a[2], s = a[3];
  const double disc = 18.0 * p * q * s - 4.0 * p * p * p * s + p * p * q * q - 4.0 * q * q * q -
                      27.0 * s * s;
  const double scale = std::abs(18.0 * p * q * s) + std::abs(4.0 * p * p * p * s) +
                       std::abs(p * p * q * q) + std::abs(4.0 * q * q * q) + std::abs(27.0 * s * s);
  std::sort(r.begin(), r.end(), [](cplx x, cplx y) { return std::abs(x.imag()) < std::abs(y.imag()); });

  PoleSet out;
  out.provenance = PoleProvenance::ExactOracle;
  if (disc < -1e-12 * scale) {
    const cplx pair = r[2].imag() >= 0.0 ? r[2] : std::conj(r[2]);
    const cplx other = r[1].imag() >= 0.0 ? r[1] : std::conj(r[1]);
    const cplx avg = 0.5 * (pair + other);  // the two members of the pair
    out.p1 = {avg.real(), std::abs(avg.imag())};
    out.p2 = std::conj(out.p1);
    out.p3 = {r[0].real(), 0.0};
  } else {
    std::array<double, 3> re{r[0].real(), r[1].real(), r[2].real()};
    std::sort(re.begin(), re.end());
    out.p1 = re[0];
    out.p2 = re[1];
    out.p3 = re[2];
  }
  return out;
}

/// Minimum total-distance assignment between two pole sets.
struct PoleMatch {
  std::array<int, 3> index;       // b[index[k]] pairs with a[k]
  std::array<double, 3> distance;
  double max_distance() const { return *std::max_element(distance.begin(), distance.end()); }
};

inline PoleMatch match_poles(const PoleSet& a, const PoleSet& b) {
  const auto pa = a.as_array();
  const auto pb = b.as_array();
  std::array<int, 3> perm{0, 1, 2};
  PoleMatch best{};
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int k = 0; k < 3; ++k) cost += std::abs(pa[k] - pb[perm[k]]);
    if (cost < best_cost) {
      best_cost = cost;
      best.index = perm;
      for (int k = 0; k < 3; ++k) best.distance[k] = std::abs(pa[k] - pb[perm[k]]);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace gfm
