#pragma once

// Small-signal PSC models for the three control schemes.
//
// Every scheme reduces to the same loop: an equivalent plant
// G_thetaP(s) = dP/dtheta that folds in the inner loops, closed by the PSC
// integrator k_p/(kappa s). The closed loop is third order, and its
// denominator is split into (n, m) coefficient sets so the resonant pair and
// the real pole can be read off in closed form (see cubic_factor.hpp).
//
//   scheme 1   PSC only, v = V
//   scheme 2   PSC + proportional AVC, dv = -G_a dE
//   scheme 3a  PSC + proportional AVC + CC + VFF, dv = (1 - R_a G_a) dE - R_a di
//   scheme 3b  as 3a with PI AVC, light load and f < 25 Hz only
//
// Inductances inside the formulas are in p.u.*s (CircuitParams::dyn), so
// alpha, beta, poles and gains come out in rad/s.

#include <cmath>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "gfm/core_model.hpp"
#include "gfm/cubic_factor.hpp"
#include "gfm/transfer_function.hpp"

namespace gfm {

struct Scheme1Terms {
  double alpha = 0.0;  // R/L
  double beta = 0.0;   // V/L
  double gamma = 0.0;  // E_d0 + i_q0 omega1 L_g
  double a1 = 0.0;     // k_p beta E_q0
  double a2 = 0.0;     // k_p beta i_q0 L_g
};

struct Scheme2Terms {
  double l_eq_a = 0.0;  // L + G_a L_g, p.u.
  double alpha_a = 0.0;
  cplx beta_a;
  cplx eta_a;
  double tau_2a = 0.0;
  double tau_1a = 0.0;
  double tau_0a = 0.0;
  double discriminant_d = 0.0;
};

struct Scheme3aTerms {
  double l_eq_b = 0.0;  // L + (R_a G_a - 1) L_g, p.u.
  double alpha_b = 0.0;
  cplx beta_b;
  cplx eta_b;
  double tau_2b = 0.0;
  double tau_1b = 0.0;
  double tau_0b = 0.0;
  double discriminant_f = 0.0;
  PoleSet full_poles;  // unsimplified pair and real pole before alpha_b dominance is used
};

struct Scheme3bTerms {
  double l_eq_c = 0.0;  // L_f + R_a G_a L_g, p.u.
  double mu = 0.0;
  double alpha_c0 = 0.0;
  double alpha_c = 0.0;
  double gamma_c = 0.0;
  double tau_c = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double psi = 0.0;
  double validity_hz = 25.0;
};

struct SchemeDerived {
  Scheme scheme = Scheme::Scheme1;
  CubicCoefficients cubic;
  std::variant<Scheme1Terms, Scheme2Terms, Scheme3aTerms, Scheme3bTerms> terms;

  template <class T>
  const T& get() const { return std::get<T>(terms); }
};

struct SchemeModel {
  RationalTF plant;        // G_thetaP(s)
  RationalTF closed_loop;  // dP / dP_ref
  SchemeDerived derived;
};

/// -Re(p)/|p|.
inline double damping_ratio(cplx p) {
  const double m = std::abs(p);
  return m == 0.0 ? 1.0 : -p.real() / m;
}

namespace detail {

inline void require_scheme(const ControlParams& ctrl, Scheme s, const char* what) {
  if (ctrl.scheme != s) {
    throw DomainError(std::string(what) + " requires " + std::string(to_string(s)));
  }
}

inline double real_converter_voltage(const OperatingPoint& op) {
  if (std::abs(op.v0.imag()) > 1e-9 * std::max(1.0, std::abs(op.v0))) {
    throw DomainError("PSC-only scheme needs a real converter voltage in the dq frame");
  }
  return op.v0.real();
}

/// k_p/(kappa s) around the plant, unity feedback.
inline RationalTF close_psc_loop(const RationalTF& plant, double k_p, double kappa) {
  RationalTF cl;
  cl.num = poly_scale(plant.num, k_p / kappa);
  cl.den = poly_add(poly_mul(plant.den, Poly{1.0, 0.0}), cl.num);
  const double lead = cl.den.front();
  for (double& x : cl.num) x /= lead;
  for (double& x : cl.den) x /= lead;
  return cl;
}

inline cplx conj(cplx z) { return std::conj(z); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Scheme 1: PSC only

inline RationalTF plant_scheme1(const CircuitParams& c, const OperatingPoint& op,
                                double kappa = 1.0) {
  const double v = detail::real_converter_voltage(op);
  const double w = c.omega1;
  const double l = c.dyn(c.l_total());
  const double lg = c.dyn(c.l_g);
  const double alpha = c.r / l;
  const double beta = v / l;
  const double gamma = op.e_d0() + op.i_q0() * w * lg;
  RationalTF g;
  g.num = {kappa * beta * op.i_q0() * lg, kappa * beta * op.e_q0(), kappa * beta * w * gamma};
  g.den = {1.0, 2.0 * alpha, alpha * alpha + w * w};
  return g;
}

inline SchemeModel closed_loop_scheme1(const CircuitParams& c, const OperatingPoint& op,
                                       const ControlParams& ctrl, double kappa = 1.0) {
  detail::require_scheme(ctrl, Scheme::Scheme1, "closed_loop_scheme1");
  const double v = detail::real_converter_voltage(op);
  const double w = c.omega1;
  const double l = c.dyn(c.l_total());
  const double lg = c.dyn(c.l_g);

  Scheme1Terms t;
  t.alpha = c.r / l;
  t.beta = v / l;
  t.gamma = op.e_d0() + op.i_q0() * w * lg;
  t.a1 = ctrl.k_p * t.beta * op.e_q0();
  t.a2 = ctrl.k_p * t.beta * op.i_q0() * lg;

  SchemeModel m;
  m.plant = plant_scheme1(c, op, kappa);
  m.derived.scheme = Scheme::Scheme1;
  m.derived.cubic = {2.0 * t.alpha, w * w, t.a2, t.alpha * t.alpha + t.a1,
                     ctrl.k_p * t.beta * w * t.gamma};
  m.derived.terms = t;

  const double kb = ctrl.k_p * t.beta;
  m.closed_loop.num = {kb * op.i_q0() * lg, kb * op.e_q0(), kb * w * t.gamma};
  const auto a = m.derived.cubic.monic();
  m.closed_loop.den = {a[0], a[1], a[2], a[3]};
  return m;
}

/// Headline closed form: p1,2 = -(2R - k_p V E_d0/w1)/(2L) +- j w1,
/// p3 = -k_p (E_d0 + i_q0 w1 L_g) V / (w1 L).
inline PoleSet poles_scheme1_closed_form(const CircuitParams& c, const OperatingPoint& op,
                                         const ControlParams& ctrl) {
  detail::require_scheme(ctrl, Scheme::Scheme1, "poles_scheme1_closed_form");
  const double v = detail::real_converter_voltage(op);
  const double w = c.omega1;
  const double l = c.dyn(c.l_total());
  const double lg = c.dyn(c.l_g);
  const double re = -(2.0 * c.r - ctrl.k_p * v * op.e_d0() / w) / (2.0 * l);
  PoleSet p;
  p.p1 = {re, w};
  p.p2 = {re, -w};
  p.p3 = -ctrl.k_p * (op.e_d0() + op.i_q0() * w * lg) * v / (w * l);
  return p;
}

/// The damping expression (w1 R - k_p V E_d0 / 2) / L evaluated with L as a
/// per-unit reactance. Numerically this is the SR decay rate -Re{p1,2} in
/// rad/s; it vanishes exactly at k_p = kp_max_scheme1.
inline double damping_ratio_scheme1(const CircuitParams& c, const OperatingPoint& op,
                                    const ControlParams& ctrl) {
  detail::require_scheme(ctrl, Scheme::Scheme1, "damping_ratio_scheme1");
  const double v = detail::real_converter_voltage(op);
  return (c.omega1 * c.r - ctrl.k_p * v * op.e_d0() / 2.0) / c.l_total();
}

// ---------------------------------------------------------------------------
// Shared by schemes 2 and 3a: plant with complex beta, real denominator.

namespace detail {

struct ResonantPlant {
  double alpha;
  double tau2, tau1, tau0;
};

inline RationalTF resonant_plant_tf(const ResonantPlant& p, double w, double kappa) {
  RationalTF g;
  g.num = {kappa * p.tau2, kappa * p.tau1, kappa * p.tau0};
  g.den = {1.0, 2.0 * p.alpha, p.alpha * p.alpha + w * w};
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scheme 2: PSC + proportional AVC (the AVC integrator is left out of the
// analytic model).

inline SchemeModel plant_and_closed_loop_scheme2(const CircuitParams& c, const OperatingPoint& op,
                                                 const ControlParams& ctrl, double kappa = 1.0) {
  detail::require_scheme(ctrl, Scheme::Scheme2, "plant_and_closed_loop_scheme2");
  using detail::conj;
  const cplx j{0.0, 1.0};
  const double w = c.omega1;
  const double lg = c.dyn(c.l_g);
  const double leq = c.dyn(c.l_total() + ctrl.g_a * c.l_g);
  if (!(leq > 0.0)) throw DegenerateParameter("L_eqa = L + G_a L_g is not positive");

  Scheme2Terms t;
  t.l_eq_a = c.l_total() + ctrl.g_a * c.l_g;
  t.alpha_a = c.r / leq;
  t.beta_a = (op.v0 + ctrl.g_a * op.e0) / leq;
  t.eta_a = -(t.alpha_a - j * w) * t.beta_a;
  const cplx& e0 = op.e0;
  const cplx& i0 = op.i0;
  t.tau_2a = lg * (i0 * conj(t.beta_a)).imag();
  t.tau_1a = (e0 * conj(t.beta_a)).imag() - w * lg * (i0 * conj(t.beta_a)).real() +
             lg * (conj(i0) * t.eta_a).imag();
  t.tau_0a = (conj(e0) * t.eta_a).imag() + w * lg * (i0 * conj(t.eta_a)).real();

  const double kp = ctrl.k_p;
  const double x = 2.0 * t.alpha_a - kp * t.tau_0a / (w * w) + kp * t.tau_2a;
  t.discriminant_d = w * w - x * x / 4.0;

  SchemeModel m;
  m.plant = detail::resonant_plant_tf({t.alpha_a, t.tau_2a, t.tau_1a, t.tau_0a}, w, kappa);
  m.closed_loop = detail::close_psc_loop(m.plant, kp, kappa);
  m.derived.scheme = Scheme::Scheme2;
  m.derived.cubic = {2.0 * t.alpha_a, w * w, kp * t.tau_2a, t.alpha_a * t.alpha_a + kp * t.tau_1a,
                     kp * t.tau_0a};
  m.derived.terms = t;
  return m;
}

/// p1,2a = -(R - delta)/(L + G_a L_g) +- j w1 with
/// delta = k_p (V E_d0 + G_a |E0|^2) / (2 w1). V E_d0 is evaluated as
/// Re{E0* v0}, which is the same number when v0 is real.
inline PoleSet poles_scheme2_closed_form(const CircuitParams& c, const OperatingPoint& op,
                                         const ControlParams& ctrl) {
  detail::require_scheme(ctrl, Scheme::Scheme2, "poles_scheme2_closed_form");
  const double w = c.omega1;
  const double lg = c.dyn(c.l_g);
  const double leq = c.dyn(c.l_total() + ctrl.g_a * c.l_g);
  if (!(leq > 0.0)) throw DegenerateParameter("L_eqa = L + G_a L_g is not positive");
  const cplx& e0 = op.e0;
  const cplx& i0 = op.i0;
  const double ve = (std::conj(e0) * op.v0).real();
  const double delta = ctrl.k_p * (ve + ctrl.g_a * std::norm(e0)) / (2.0 * w);
  const double re = -(c.r - delta) / leq;
  const double q = (i0 * std::conj(op.v0)).imag() + ctrl.g_a * (std::conj(e0) * i0).imag();
  PoleSet p;
  p.p1 = {re, w};
  p.p2 = {re, -w};
  p.p3 = -(2.0 * delta + ctrl.k_p * lg * q) / leq;
  return p;
}

// ---------------------------------------------------------------------------
// Scheme 3a: PSC + P-AVC + CC + VFF.

inline SchemeModel plant_and_closed_loop_scheme3a(const CircuitParams& c, const OperatingPoint& op,
                                                  const ControlParams& ctrl, double kappa = 1.0) {
  detail::require_scheme(ctrl, Scheme::Scheme3P, "plant_and_closed_loop_scheme3a");
  using detail::conj;
  const cplx j{0.0, 1.0};
  const double w = c.omega1;
  const double lg = c.dyn(c.l_g);
  const double ff = ctrl.vff_enabled ? 1.0 : 0.0;
  const double k = ctrl.r_a * ctrl.g_a - ff;
  const double leq_pu = c.l_total() + k * c.l_g;
  const double leq = c.dyn(leq_pu);
  if (!(leq > 0.0)) throw DegenerateParameter("L_eqb = L + (R_a G_a - 1) L_g is not positive");

  Scheme3aTerms t;
  t.l_eq_b = leq_pu;
  t.alpha_b = (c.r + ctrl.r_a) / leq;
  t.beta_b = (op.v0 + k * op.e0) / leq;
  t.eta_b = -(t.alpha_b - j * w) * t.beta_b;
  const cplx& e0 = op.e0;
  const cplx& i0 = op.i0;
  const double ab = t.alpha_b;
  const double ei_im = (conj(e0) * i0).imag();
  t.tau_2b = lg * (i0 * conj(t.beta_b)).imag();
  t.tau_1b = -ab * ei_im + (e0 * conj(t.beta_b)).imag() - w * lg * (i0 * conj(t.beta_b)).real() +
             lg * (j * i0 * conj(t.eta_b)).real();
  t.tau_0b = w * ab * (conj(e0) * i0).real() + (j * e0 * conj(t.eta_b)).real() +
             w * lg * (j * i0 * conj(t.eta_b)).imag() - (ei_im + w * lg * std::norm(i0)) * ab * ab;

  const double kp = ctrl.k_p;
  const double n0 = ab * ab + w * w;
  const double x = 2.0 * ab - kp * t.tau_0b / n0 + kp * t.tau_2b;
  t.discriminant_f = n0 - x * x / 4.0;

  SchemeModel m;
  m.plant = detail::resonant_plant_tf({ab, t.tau_2b, t.tau_1b, t.tau_0b}, w, kappa);
  m.closed_loop = detail::close_psc_loop(m.plant, kp, kappa);
  m.derived.scheme = Scheme::Scheme3P;
  m.derived.cubic = {2.0 * ab, n0, kp * t.tau_2b, kp * t.tau_1b, kp * t.tau_0b};
  t.full_poles = factor_approx(m.derived.cubic).poles;
  m.derived.terms = t;
  return m;
}

/// p1,2b = -(R + R_a)/(L + (R_a G_a - 1) L_g) +- j w1; p3b = -k_p tau_0b/(alpha_b^2 + w1^2).
inline PoleSet poles_scheme3a_closed_form(const CircuitParams& c, const OperatingPoint& op,
                                          const ControlParams& ctrl) {
  const SchemeModel m = plant_and_closed_loop_scheme3a(c, op, ctrl);
  const auto& t = m.derived.get<Scheme3aTerms>();
  const double w = c.omega1;
  PoleSet p;
  p.p1 = {-t.alpha_b, w};
  p.p2 = {-t.alpha_b, -w};
  p.p3 = -ctrl.k_p * t.tau_0b / (t.alpha_b * t.alpha_b + w * w);
  return p;
}

// ---------------------------------------------------------------------------
// Scheme 3b: PI AVC, light load, low-frequency model (f < 25 Hz).

namespace detail {

inline Scheme3bTerms scheme3b_terms(const CircuitParams& c, const ControlParams& ctrl) {
  require_scheme(ctrl, Scheme::Scheme3PI, "scheme 3b model");
  if (!ctrl.vff_enabled) throw UnsupportedRegime("scheme 3b closed forms assume voltage feedforward");
  const double w = c.omega1;
  const double lf = c.dyn(c.l_f);
  const double lg = c.dyn(c.l_g);
  const double v = ctrl.v_ref;
  Scheme3bTerms t;
  t.l_eq_c = c.l_f + ctrl.r_a * ctrl.g_a * c.l_g;
  const double leq = c.dyn(t.l_eq_c);
  if (!(leq > 0.0)) throw DegenerateParameter("L_eqc = L_f + R_a G_a L_g is not positive");
  t.mu = ctrl.r_a * ctrl.k_i * lg / leq;
  t.alpha_c0 = c.r / leq + t.mu;
  t.alpha_c = ctrl.r_a / leq + t.mu;
  t.gamma_c = ctrl.r_a * ctrl.g_a * v / leq;
  t.tau_c = ctrl.r_a * ctrl.k_i * v / leq;
  const double lg_rag = ctrl.r_a * lg * ctrl.g_a;
  t.rho1 = (lf + lg_rag) / (lf + 2.0 * lg_rag);
  const double x = ctrl.r_a * (1.0 + ctrl.k_i * lg) / (w * leq);
  t.rho2 = 2.0 / (x * x + 1.0);
  t.psi = (v * v * ctrl.r_a / (w * leq)) / (x * x + 1.0);
  return t;
}

}  // namespace detail

inline SchemeModel plant_and_closed_loop_scheme3b(const CircuitParams& c, const ControlParams& ctrl,
                                                  double kappa = 1.0) {
  const Scheme3bTerms t = detail::scheme3b_terms(c, ctrl);
  const double w = c.omega1;
  const double v = ctrl.v_ref;
  const double kp = ctrl.k_p;
  const double d = t.alpha_c * t.alpha_c + w * w;

  SchemeModel m;
  const double g = kappa * v / d;
  m.plant.num = {g * t.gamma_c * w, g * (t.tau_c + t.mu * t.gamma_c) * w, g * w * t.mu * t.tau_c};
  m.plant.den = {1.0, 2.0 * w * w * t.mu / d, w * w * t.mu * t.mu / d};

  CubicCoefficients cc;
  cc.m2 = kp * v * t.gamma_c * w / d;
  cc.m1 = w * w * t.mu * t.mu / d;
  cc.m0 = kp * v * w * t.mu * t.tau_c / d;
  cc.n1 = 2.0 * w * w * t.mu / d;
  cc.n0 = kp * v * (t.tau_c + t.mu * t.gamma_c) * w / d;

  m.closed_loop.num = {cc.m2, cc.n0, cc.m0};
  const auto a = cc.monic();
  m.closed_loop.den = {a[0], a[1], a[2], a[3]};
  m.derived.scheme = Scheme::Scheme3PI;
  m.derived.cubic = cc;
  m.derived.terms = t;
  return m;
}

/// Overload that rejects loaded operating points: the scheme 3b closed forms
/// exist for i0 = 0 only.
inline SchemeModel plant_and_closed_loop_scheme3b(const CircuitParams& c, const OperatingPoint& op,
                                                  const ControlParams& ctrl, double kappa = 1.0) {
  if (std::abs(op.i0) > 1e-9) {
    throw UnsupportedRegime("scheme 3b closed forms are derived for light load (i0 = 0)");
  }
  return plant_and_closed_loop_scheme3b(c, ctrl, kappa);
}

inline PoleSet poles_scheme3b_closed_form(const CircuitParams& c, const ControlParams& ctrl) {
  const Scheme3bTerms t = detail::scheme3b_terms(c, ctrl);
  const double lg = c.dyn(c.l_g);
  const double lf = c.dyn(c.l_f);
  const double leq = c.dyn(t.l_eq_c);
  const double kp = ctrl.k_p;
  const double re = (t.rho1 - t.rho2) * ctrl.r_a * ctrl.k_i * lg / (2.0 * leq) -
                    kp * ctrl.g_a * t.psi / 2.0;
  const double radicand = ctrl.k_i * kp * t.psi / t.rho1 - re * re;
  PoleSet p;
  if (radicand >= 0.0) {
    p.p1 = {re, std::sqrt(radicand)};
    p.p2 = {re, -std::sqrt(radicand)};
  } else {
    p.p1 = re + std::sqrt(-radicand);
    p.p2 = re - std::sqrt(-radicand);
    p.overdamped = true;
  }
  p.p3 = -ctrl.r_a * ctrl.k_i * lg / (lf + 2.0 * ctrl.r_a * lg * ctrl.g_a);
  return p;
}

inline PoleSet poles_scheme3b_closed_form(const CircuitParams& c, const OperatingPoint& op,
                                          const ControlParams& ctrl) {
  if (std::abs(op.i0) > 1e-9) {
    throw UnsupportedRegime("scheme 3b closed forms are derived for light load (i0 = 0)");
  }
  return poles_scheme3b_closed_form(c, ctrl);
}

// ---------------------------------------------------------------------------
// Dispatch by scheme.

inline SchemeModel closed_loop_model(const CircuitParams& c, const OperatingPoint& op,
                                     const ControlParams& ctrl, double kappa = 1.0) {
  switch (ctrl.scheme) {
    case Scheme::Scheme1: return closed_loop_scheme1(c, op, ctrl, kappa);
    case Scheme::Scheme2: return plant_and_closed_loop_scheme2(c, op, ctrl, kappa);
    case Scheme::Scheme3P: return plant_and_closed_loop_scheme3a(c, op, ctrl, kappa);
    case Scheme::Scheme3PI: return plant_and_closed_loop_scheme3b(c, op, ctrl, kappa);
  }
  throw DomainError("unknown scheme");
}

inline PoleSet closed_form_poles(const CircuitParams& c, const OperatingPoint& op,
                                 const ControlParams& ctrl) {
  switch (ctrl.scheme) {
    case Scheme::Scheme1: return poles_scheme1_closed_form(c, op, ctrl);
    case Scheme::Scheme2: return poles_scheme2_closed_form(c, op, ctrl);
    case Scheme::Scheme3P: return poles_scheme3a_closed_form(c, op, ctrl);
    case Scheme::Scheme3PI: return poles_scheme3b_closed_form(c, op, ctrl);
  }
  throw DomainError("unknown scheme");
}

/// Default Bode grid: 200 log-spaced points over the model's validity band.
inline std::vector<double> default_frequency_grid(Scheme s, std::size_t points = 200) {
  return log_space(0.5, s == Scheme::Scheme3PI ? 25.0 : 100.0, points);
}

}  // namespace gfm
