#pragma once

// Independent small-signal oracle: numerical Jacobian of the nonlinear dq
// model (rotating at the PSC angle), eigenvalues by Eigen. Written directly
// from the circuit and control laws, without reusing any library derivation.

#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "gfm/core_model.hpp"

namespace oracle {

using cplx = std::complex<double>;

struct Eval {
  cplx di;      // d(i)/dt in the rotating frame
  double ddelta;
  cplx dx;      // AVC integrator
};

inline Eval rhs(const gfm::CircuitParams& c, const gfm::ControlParams& k, double p_ref, cplx i,
                double delta, cplx x) {
  const cplx j{0.0, 1.0};
  const double w = c.omega1;
  const double l = c.l_total() / w;
  const double lg = c.l_g / w;
  const double kk = lg / l;
  const cplx vg = std::polar(c.v_g, -delta);
  const double vr = k.v_ref;
  cplx v, e;
  // Solve v = f(e), e = vg + kk (v - vg - r i) by fixed-point free elimination:
  // both laws are affine in e, so write v = a + b e.
  cplx a;
  double b;
  switch (k.scheme) {
    case gfm::Scheme::Scheme1:
      a = vr;
      b = 0.0;
      break;
    case gfm::Scheme::Scheme2:
      a = vr + k.g_a * vr + x;
      b = -k.g_a;
      break;
    default: {
      const double ff = k.vff_enabled ? 1.0 : 0.0;
      a = k.r_a * (k.g_a * vr + x - i);
      b = ff - k.r_a * k.g_a;
    }
  }
  e = (vg + kk * (a - vg - c.r * i)) / (1.0 - kk * b);
  v = a + b * e;
  const double p = (e * std::conj(i)).real();
  const double dtheta = w + k.k_p * (p_ref - p);
  Eval out;
  out.di = (v - vg - c.r * i) / l - j * dtheta * i;
  out.ddelta = dtheta - w;
  out.dx = k.k_i * (vr - e);
  return out;
}

/// Eigenvalues of the linearization around (i0, theta0, x0). x0 is the
/// integrator value that holds the equilibrium; states x are dropped when
/// the scheme has no AVC integrator.
inline std::vector<cplx> poles(const gfm::CircuitParams& c, const gfm::ControlParams& k,
                               const gfm::OperatingPoint& op) {
  const bool has_x = k.k_i > 0.0 && k.scheme != gfm::Scheme::Scheme1;
  // The integrator value (a frozen offset when there is no integrator) makes
  // v or i_ref consistent with op.
  cplx x0{0.0, 0.0};
  if (k.scheme != gfm::Scheme::Scheme1) {
    if (k.scheme == gfm::Scheme::Scheme2) {
      x0 = op.v0 - (k.v_ref + k.g_a * (k.v_ref - op.e0));
    } else {
      const double ff = k.vff_enabled ? 1.0 : 0.0;
      // v0 = r_a (g_a (vr - e0) + x - i0) + ff e0
      x0 = (op.v0 - ff * op.e0) / k.r_a - k.g_a * (k.v_ref - op.e0) + op.i0;
    }
  }
  const int n = has_x ? 5 : 3;
  auto pack = [&](const Eval& ev) {
    Eigen::VectorXd f(n);
    f << ev.di.real(), ev.di.imag(), ev.ddelta;
    if (has_x) {
      f(3) = ev.dx.real();
      f(4) = ev.dx.imag();
    }
    return f;
  };
  Eigen::VectorXd s0(n);
  s0 << op.i0.real(), op.i0.imag(), op.theta0;
  if (has_x) {
    s0(3) = x0.real();
    s0(4) = x0.imag();
  }
  auto f = [&](const Eigen::VectorXd& s) {
    const cplx x = has_x ? cplx{s(3), s(4)} : x0;
    return pack(rhs(c, k, op.p0, {s(0), s(1)}, s(2), x));
  };
  Eigen::MatrixXd jac(n, n);
  for (int col = 0; col < n; ++col) {
    const double h = 1e-6;
    Eigen::VectorXd sp = s0, sm = s0;
    sp(col) += h;
    sm(col) -= h;
    jac.col(col) = (f(sp) - f(sm)) / (2.0 * h);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(jac);
  std::vector<cplx> out;
  for (int r = 0; r < n; ++r) out.push_back(es.eigenvalues()(r));
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    return a.imag() != b.imag() ? a.imag() > b.imag() : a.real() < b.real();
  });
  return out;
}

/// Residual of the equilibrium (should be ~0 for a consistent op).
inline double equilibrium_residual(const gfm::CircuitParams& c, const gfm::ControlParams& k,
                                   const gfm::OperatingPoint& op) {
  cplx x0{0.0, 0.0};
  if (k.scheme == gfm::Scheme::Scheme2) {
    x0 = op.v0 - (k.v_ref + k.g_a * (k.v_ref - op.e0));
  } else if (k.scheme != gfm::Scheme::Scheme1) {
    const double ff = k.vff_enabled ? 1.0 : 0.0;
    x0 = (op.v0 - ff * op.e0) / k.r_a - k.g_a * (k.v_ref - op.e0) + op.i0;
  }
  const Eval ev = rhs(c, k, op.p0, op.i0, op.theta0, x0);
  return std::max({std::abs(ev.di), std::abs(ev.ddelta), k.k_i > 0.0 ? std::abs(ev.dx) : 0.0});
}

/// Nearest oracle eigenvalue to z.
inline cplx nearest(const std::vector<cplx>& ev, cplx z) {
  return *std::min_element(ev.begin(), ev.end(),
                           [&](cplx a, cplx b) { return std::abs(a - z) < std::abs(b - z); });
}

}  // namespace oracle
