#pragma once

// Per-unit parameterization of a grid-forming VSC behind an L filter on an
// inductive grid, plus the steady-state operating-point solver.
//
// Conventions used throughout the library:
//  - voltages, currents, impedances and power are per-unit (kappa = 1);
//  - time is in seconds and omega1 keeps its rad/s value;
//  - inductances are stored as per-unit reactances at omega1 (omega1*L/Z_B).
//    Dynamic equations need the inductance in p.u.*s, i.e. l_pu / omega1,
//    which CircuitParams::dyn() returns.
//  - complex vectors are in the converter dq frame, aligned with the PSC
//    angle theta: x = x_d + j*x_q.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "gfm/errors.hpp"

namespace gfm {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct BaseQuantities {
  double e_base = 1.0;  // peak nominal phase voltage (V)
  double i_base = 1.0;  // peak nominal phase current (A)
  double kappa = 1.0;   // power scaling, 3/(2K^2)

  double z_base() const { return e_base / i_base; }
  double y_base() const { return 1.0 / z_base(); }
  double p_base() const { return kappa * e_base * i_base; }

  double inductance_to_pu(double henry, double omega1) const {
    return omega1 * henry / z_base();
  }
  double resistance_to_pu(double ohm) const { return ohm / z_base(); }

  /// Bases from line-to-line RMS voltage and rated power with peak-value
  /// space vectors (K = 1, kappa = 3/2).
  static BaseQuantities from_ratings(double v_ll_rms, double p_rated) {
    if (v_ll_rms <= 0.0 || p_rated <= 0.0) {
      throw DomainError("ratings must be positive");
    }
    BaseQuantities b;
    b.kappa = 1.5;
    b.e_base = v_ll_rms * std::sqrt(2.0 / 3.0);
    b.i_base = p_rated / (b.kappa * b.e_base);
    return b;
  }
};

/// SCR = 1/(omega1*L_g) with the reactance in p.u.
inline double scr_to_lg(double scr) {
  if (!(scr > 0.0)) throw DomainError("scr must be positive");
  return 1.0 / scr;
}

inline double lg_to_scr(double l_g) {
  if (!(l_g > 0.0)) throw DomainError("l_g must be positive to define an SCR");
  return 1.0 / l_g;
}

struct CircuitParams {
  double omega1 = kTwoPi * 50.0;  // rad/s
  double l_f = 0.1298;            // p.u.
  double r = 0.026;               // p.u. (grid resistance may be folded in)
  double l_g = 0.1;               // p.u.
  double v_g = 1.0;               // p.u.

  double l_total() const { return l_f + l_g; }
  double scr() const { return lg_to_scr(l_g); }
  double x_total() const { return l_total(); }  // omega1_pu = 1

  /// Per-unit reactance -> inductance in p.u.*s for the dynamic equations.
  double dyn(double l_pu) const { return l_pu / omega1; }

  void validate() const {
    if (!(omega1 > 0.0)) throw DomainError("omega1 must be positive");
    if (!(l_f > 0.0)) throw DomainError("l_f must be positive");
    if (!(l_g >= 0.0)) throw DomainError("l_g must be non-negative");
    if (!(r >= 0.0)) throw DomainError("r must be non-negative");
    if (!(v_g > 0.0)) throw DomainError("v_g must be positive");
  }

  /// Power stage of the 5 kW laboratory converter at the given SCR.
  static CircuitParams table_ii(double scr) {
    CircuitParams c;
    c.l_g = scr_to_lg(scr);
    return c;
  }
};

enum class Scheme { Scheme1, Scheme2, Scheme3P, Scheme3PI };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Scheme1: return "scheme1";
    case Scheme::Scheme2: return "scheme2";
    case Scheme::Scheme3P: return "scheme3p";
    case Scheme::Scheme3PI: return "scheme3pi";
  }
  return "unknown";
}

inline Scheme scheme_from_string(std::string_view s) {
  if (s == "scheme1" || s == "1") return Scheme::Scheme1;
  if (s == "scheme2" || s == "2") return Scheme::Scheme2;
  if (s == "scheme3p" || s == "3p" || s == "3a") return Scheme::Scheme3P;
  if (s == "scheme3pi" || s == "3pi" || s == "3b") return Scheme::Scheme3PI;
  throw DomainError("unknown scheme '" + std::string(s) + "'");
}

struct ControlParams {
  Scheme scheme = Scheme::Scheme1;
  double k_p = 0.0;  // PSC integral gain, (rad/s)/p.u.
  double g_a = 0.0;  // AVC proportional gain
  double k_i = 0.0;  // AVC integral gain, 1/s
  double r_a = 0.0;  // CC proportional gain (virtual resistance)
  bool vff_enabled = false;
  double v_ref = 1.0;

  bool uses_avc() const { return scheme != Scheme::Scheme1; }
  bool uses_cc() const {
    return scheme == Scheme::Scheme3P || scheme == Scheme::Scheme3PI;
  }
  bool has_avc_integrator() const { return uses_avc() && k_i > 0.0; }

  void validate() const {
    if (k_p < 0.0 || g_a < 0.0 || k_i < 0.0 || r_a < 0.0) {
      throw DomainError("controller gains must be non-negative");
    }
    if (!(v_ref > 0.0)) throw DomainError("v_ref must be positive");
    switch (scheme) {
      case Scheme::Scheme1:
        if (g_a != 0.0 || k_i != 0.0 || r_a != 0.0) {
          throw DomainError("scheme1 uses PSC only: g_a, k_i, r_a must be 0");
        }
        break;
      case Scheme::Scheme2:
        if (r_a != 0.0) throw DomainError("scheme2 has no current control: r_a must be 0");
        break;
      case Scheme::Scheme3P:
        if (k_i != 0.0) throw DomainError("scheme3p uses a P voltage controller: k_i must be 0");
        break;
      case Scheme::Scheme3PI:
        break;
    }
  }

  // Controller settings of the worked examples (k_p = 0.03*omega1).
  static ControlParams example1(double omega1) {
    return {Scheme::Scheme1, 0.03 * omega1, 0.0, 0.0, 0.0, false, 1.0};
  }
  static ControlParams example2(double omega1) {
    return {Scheme::Scheme2, 0.03 * omega1, 0.5, 0.0, 0.0, false, 1.0};
  }
  static ControlParams example4(double omega1) {
    return {Scheme::Scheme3P, 0.03 * omega1, 3.0, 0.0, 0.865, true, 1.0};
  }
  static ControlParams example5(double omega1) {
    return {Scheme::Scheme3PI, 0.03 * omega1, 3.0, 100.0, 0.865, true, 1.0};
  }
};

struct OperatingPoint {
  double theta0 = 0.0;  // converter angle relative to the grid voltage
  cplx v0{1.0, 0.0};    // converter voltage (real for scheme 1)
  cplx i0{0.0, 0.0};
  cplx e0{1.0, 0.0};    // PCC voltage
  double p0 = 0.0;

  double v() const { return std::abs(v0); }
  double e_d0() const { return e0.real(); }
  double e_q0() const { return e0.imag(); }
  double i_d0() const { return i0.real(); }
  double i_q0() const { return i0.imag(); }
};

inline double active_power(cplx e, cplx i, double kappa = 1.0) {
  return kappa * (e * std::conj(i)).real();
}

enum class OperatingMode {
  ConverterVoltageFixed,  // v0 = v_ref (real)
  PccVoltageFixed,        // e0 = v_ref (real): steady state of an integral dq AVC
  LightLoad,              // i0 = 0
  ControllerSteadyState,  // whatever the scheme's control law settles to
};

inline std::string_view to_string(OperatingMode m) {
  switch (m) {
    case OperatingMode::ConverterVoltageFixed: return "converter_voltage_fixed";
    case OperatingMode::PccVoltageFixed: return "pcc_voltage_fixed";
    case OperatingMode::LightLoad: return "light_load";
    case OperatingMode::ControllerSteadyState: return "controller_steady_state";
  }
  return "unknown";
}

inline OperatingMode operating_mode_from_string(std::string_view s) {
  if (s == "converter_voltage_fixed") return OperatingMode::ConverterVoltageFixed;
  if (s == "pcc_voltage_fixed") return OperatingMode::PccVoltageFixed;
  if (s == "light_load") return OperatingMode::LightLoad;
  if (s == "controller_steady_state") return OperatingMode::ControllerSteadyState;
  throw DomainError("unknown operating mode '" + std::string(s) + "'");
}

struct OperatingPointResiduals {
  double circuit;  // |v0 - (r + j x) i0 - v_g e^{-j theta0}|
  double pcc;      // |e0 - v_g e^{-j theta0} - j x_g i0|
  double power;    // |p0 - Re{e0 conj(i0)}|
  double max() const { return std::max({circuit, pcc, power}); }
};

inline OperatingPointResiduals residuals(const CircuitParams& c, const OperatingPoint& op) {
  const cplx vg = std::polar(c.v_g, -op.theta0);
  const cplx z{c.r, c.x_total()};
  return {std::abs(op.v0 - z * op.i0 - vg),
          std::abs(op.e0 - vg - cplx{0.0, c.l_g} * op.i0),
          std::abs(op.p0 - active_power(op.e0, op.i0))};
}

namespace detail {

// In every supported mode the controller constraint makes the current affine
// in the grid voltage seen from the dq frame: i0 = k * (v_ref - vg).
inline cplx current_gain(const CircuitParams& c, const ControlParams& ctrl, OperatingMode mode) {
  const cplx z{c.r, c.x_total()};
  const cplx j{0.0, 1.0};
  if (mode == OperatingMode::ControllerSteadyState) {
    switch (ctrl.scheme) {
      case Scheme::Scheme1:
        mode = OperatingMode::ConverterVoltageFixed;
        break;
      case Scheme::Scheme2:
        if (ctrl.k_i > 0.0) {
          mode = OperatingMode::PccVoltageFixed;
        } else {
          // v0 = v_ref + g_a (v_ref - e0)
          return (1.0 + ctrl.g_a) / (z + j * ctrl.g_a * c.l_g);
        }
        break;
      case Scheme::Scheme3P:
      case Scheme::Scheme3PI:
        if (ctrl.k_i > 0.0) {
          mode = OperatingMode::PccVoltageFixed;
          break;
        }
        if (ctrl.vff_enabled) {
          // r_a (g_a (v_ref - e0) - i0) + e0 = v0 = e0 + (r + j x_f) i0
          const double rg = ctrl.r_a * ctrl.g_a;
          return rg / cplx{c.r + ctrl.r_a, c.l_f + rg * c.l_g};
        }
        // Current control without feedforward is not affine in (v_ref - vg);
        // solve_operating_point handles it separately.
        return cplx{std::nan(""), 0.0};
    }
  }
  switch (mode) {
    case OperatingMode::ConverterVoltageFixed:
      return 1.0 / z;
    case OperatingMode::PccVoltageFixed:
      if (!(c.l_g > 0.0)) throw DomainError("pcc-voltage mode needs l_g > 0");
      return 1.0 / (j * c.l_g);
    default:
      return 0.0;
  }
}

}  // namespace detail

/// Solves the two-bus steady state for the requested active power.
///
/// Damped Newton on theta0 with step halving, started from the lossless
/// power-angle estimate asin(p_ref x / (v_ref v_g)).
inline OperatingPoint solve_operating_point(const CircuitParams& c, const ControlParams& ctrl,
                                            double p_ref, OperatingMode mode) {
  c.validate();
  ctrl.validate();
  const cplx j{0.0, 1.0};

  if (mode == OperatingMode::LightLoad) {
    if (std::abs(ctrl.v_ref - c.v_g) > 1e-12) {
      throw InfeasibleOperatingPoint("light load needs v_ref == v_g", std::abs(ctrl.v_ref - c.v_g));
    }
    OperatingPoint op;
    op.theta0 = 0.0;
    op.v0 = op.e0 = cplx{c.v_g, 0.0};
    op.i0 = 0.0;
    op.p0 = 0.0;
    return op;
  }

  const double ff = ctrl.vff_enabled ? 1.0 : 0.0;
  const bool cc_without_ff = mode == OperatingMode::ControllerSteadyState && ctrl.uses_cc() &&
                             ctrl.k_i == 0.0 && ff == 0.0;

  // i0(vg) for the active constraint.
  auto current = [&](cplx vg) -> cplx {
    if (cc_without_ff) {
      const double rg = ctrl.r_a * ctrl.g_a;
      return (rg * ctrl.v_ref - (rg + 1.0) * vg) /
             (cplx{c.r + ctrl.r_a, c.l_f} + (rg + 1.0) * j * c.l_g);
    }
    return detail::current_gain(c, ctrl, mode) * (ctrl.v_ref - vg);
  };
  auto build = [&](double theta) {
    OperatingPoint op;
    op.theta0 = theta;
    const cplx vg = std::polar(c.v_g, -theta);
    op.i0 = current(vg);
    op.v0 = vg + cplx{c.r, c.x_total()} * op.i0;
    op.e0 = vg + j * c.l_g * op.i0;
    op.p0 = active_power(op.e0, op.i0);
    return op;
  };

  const double s0 = std::clamp(p_ref * c.x_total() / (ctrl.v_ref * c.v_g), -0.99, 0.99);
  double theta = std::asin(s0);
  OperatingPoint op = build(theta);
  double mismatch = op.p0 - p_ref;
  constexpr int kMaxIter = 50;
  for (int it = 0; it < kMaxIter && std::abs(mismatch) > 1e-13; ++it) {
    const double h = 1e-7;
    const double slope = (build(theta + h).p0 - build(theta - h).p0) / (2.0 * h);
    if (!(std::abs(slope) > 1e-14)) break;
    double step = -mismatch / slope;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      const OperatingPoint trial = build(theta + step);
      if (std::abs(trial.p0 - p_ref) < std::abs(mismatch)) {
        theta += step;
        op = trial;
        mismatch = op.p0 - p_ref;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(std::abs(mismatch) <= 1e-10)) {
    throw InfeasibleOperatingPoint("no steady state delivers p_ref = " + std::to_string(p_ref),
                                   std::abs(mismatch));
  }
  return op;
}

}  // namespace gfm
