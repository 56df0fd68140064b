#pragma once

// Nonlinear averaged-model simulator of the converter-grid circuit.
//
// States: stationary-frame current i_s, angle offset delta = theta - w1 t, and
// the complex AVC integrator x (dq frame). The PCC voltage is algebraic:
// with k = L_g/L,
//   E = v_g + r_g i + k (v - v_g - (r + r_g) i),
// and each control law is affine in E, so the pair (v, E) is solved in closed
// form at every evaluation.
//
// Besides fixed-step time integration the module provides the numerical
// linearization of the same model, sinusoidal-injection frequency scans, and a
// matrix-pencil modal fit of recorded transients.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfm/core_model.hpp"
#include "gfm/cubic_factor.hpp"
#include "gfm/transfer_function.hpp"

namespace gfm {

enum class Integrator { RK4, Trapezoidal };

inline std::string_view to_string(Integrator i) {
  return i == Integrator::RK4 ? "rk4" : "trapezoidal";
}

inline Integrator integrator_from_string(std::string_view s) {
  if (s == "rk4" || s == "RK4") return Integrator::RK4;
  if (s == "trapezoidal" || s == "Trapezoidal" || s == "trap") return Integrator::Trapezoidal;
  throw DomainError("unknown integrator '" + std::string(s) + "'");
}

/// p_ref(t) = p0 + step [t >= t_step] + amp sin(2 pi f (t - t_sine)) [t >= t_sine].
struct PowerSchedule {
  double p0 = 0.0;
  double step = 0.0;
  double t_step = 0.0;
  double sine_amplitude = 0.0;
  double sine_freq_hz = 0.0;
  double t_sine = 0.0;

  double operator()(double t) const {
    double p = p0;
    if (t >= t_step) p += step;
    if (sine_amplitude != 0.0 && t >= t_sine) {
      p += sine_amplitude * std::sin(kTwoPi * sine_freq_hz * (t - t_sine));
    }
    return p;
  }
};

struct SimConfig {
  double dt = 1e-5;
  double t_end = 1.0;
  Integrator integrator = Integrator::RK4;
  std::size_t decimation = 10;
  double preamble = 0.02;         // run_step_experiment: time before the step
  double grid_resistance = 0.0;   // series grid resistance, p.u.
  double divergence_limit = 100.0;

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("sim dt must be positive");
    if (!(t_end > 0.0)) throw DomainError("sim t_end must be positive");
    if (decimation == 0) throw DomainError("sim decimation must be >= 1");
    if (preamble < 0.0 || grid_resistance < 0.0) throw DomainError("sim preamble/grid_resistance >= 0");
  }
};

struct SimState {
  cplx i_s;                 // stationary frame
  double theta = 0.0;       // absolute PSC angle
  cplx avc_integral;        // dq frame
  double t = 0.0;
};

struct TimeSeries {
  std::vector<double> t, p, e_d, e_q, i_d, i_q, theta;  // theta recorded as theta - w1 t

  std::size_t size() const { return t.size(); }
  double sample_interval() const { return size() > 1 ? t[1] - t[0] : 0.0; }
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(const std::string& what, SimState last_good, TimeSeries partial)
      : std::runtime_error(what), last_good_(last_good), partial_(std::move(partial)) {}
  const SimState& last_good() const noexcept { return last_good_; }
  const TimeSeries& partial() const noexcept { return partial_; }

 private:
  SimState last_good_;
  TimeSeries partial_;
};

class UnstableForScan : public std::runtime_error {
 public:
  UnstableForScan(const std::string& what, std::vector<cplx> poles)
      : std::runtime_error(what), poles_(std::move(poles)) {}
  const std::vector<cplx>& poles() const noexcept { return poles_; }

 private:
  std::vector<cplx> poles_;
};

// ---------------------------------------------------------------------------
// Algebraic part shared by the time-domain and linearized models.

struct Terminal {
  cplx v;  // converter voltage, dq
  cplx e;  // PCC voltage, dq
  double p = 0.0;
};

struct PlantModel {
  CircuitParams circuit;
  ControlParams ctrl;
  double r_g = 0.0;

  bool has_integrator() const { return ctrl.has_avc_integrator(); }
  double l_s() const { return circuit.dyn(circuit.l_total()); }

  Terminal terminal(cplx vg, cplx i, cplx x) const {
    const double kk = circuit.l_g / circuit.l_total();
    const double vr = ctrl.v_ref;
    cplx a;
    double b = 0.0;
    switch (ctrl.scheme) {
      case Scheme::Scheme1:
        a = vr;
        break;
      case Scheme::Scheme2:
        // v = V_ref + G_a (V_ref - E) + x
        a = vr * (1.0 + ctrl.g_a) + x;
        b = -ctrl.g_a;
        break;
      case Scheme::Scheme3P:
      case Scheme::Scheme3PI:
        // v = R_a (G_a (V_ref - E) + x - i) + ff E
        a = ctrl.r_a * (ctrl.g_a * vr + x - i);
        b = (ctrl.vff_enabled ? 1.0 : 0.0) - ctrl.r_a * ctrl.g_a;
        break;
    }
    const double rt = circuit.r + r_g;
    Terminal out;
    out.e = (vg + r_g * i + kk * (a - vg - rt * i)) / (1.0 - kk * b);
    out.v = a + b * out.e;
    out.p = (out.e * std::conj(i)).real();
    return out;
  }

  /// Rotating-frame derivatives at angle offset delta.
  struct DqRates {
    cplx di;
    double ddelta;
    cplx dx;
    Terminal term;
  };

  DqRates dq_rates(cplx i, double delta, cplx x, double p_ref) const {
    const double w = circuit.omega1;
    const cplx vg = std::polar(circuit.v_g, -delta);
    DqRates r;
    r.term = terminal(vg, i, x);
    const double dtheta = w + ctrl.k_p * (p_ref - r.term.p);
    r.di = (r.term.v - vg - (circuit.r + r_g) * i) / l_s() - cplx{0.0, dtheta} * i;
    r.ddelta = dtheta - w;
    r.dx = has_integrator() ? ctrl.k_i * (ctrl.v_ref - r.term.e) : cplx{0.0, 0.0};
    return r;
  }
};

/// Equilibrium of the dq model in the form (i, delta, x).
struct Equilibrium {
  cplx i;
  double delta = 0.0;
  cplx x;
  Terminal term;
  double residual = 0.0;
};

namespace detail {

inline Eigen::VectorXd numeric_jacobian_column(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                               const Eigen::VectorXd& s, int col, double h) {
  Eigen::VectorXd sp = s, sm = s;
  sp(col) += h;
  sm(col) -= h;
  return (f(sp) - f(sm)) / (2.0 * h);
}

inline Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& s, double h = 1e-6) {
  const Eigen::Index n = s.size();
  Eigen::MatrixXd j(f(s).size(), n);
  for (Eigen::Index c = 0; c < n; ++c) j.col(c) = numeric_jacobian_column(f, s, static_cast<int>(c), h);
  return j;
}

}  // namespace detail

/// Newton solve of the dq model for a steady state delivering p_ref, seeded
/// by the analytic controller steady state.
inline Equilibrium find_equilibrium(const PlantModel& m, double p_ref) {
  CircuitParams seed_circuit = m.circuit;
  seed_circuit.r += m.r_g;
  const OperatingPoint op =
      solve_operating_point(seed_circuit, m.ctrl, p_ref, OperatingMode::ControllerSteadyState);
  const bool hx = m.has_integrator();
  const int n = hx ? 5 : 3;
  Eigen::VectorXd s(n);
  s(0) = op.i0.real();
  s(1) = op.i0.imag();
  s(2) = op.theta0;
  if (hx) {
    // Integrator value that reproduces op's converter voltage.
    cplx x0;
    if (m.ctrl.scheme == Scheme::Scheme2) {
      x0 = op.v0 - (m.ctrl.v_ref * (1.0 + m.ctrl.g_a) - m.ctrl.g_a * op.e0);
    } else {
      const double ff = m.ctrl.vff_enabled ? 1.0 : 0.0;
      x0 = (op.v0 - ff * op.e0) / m.ctrl.r_a - m.ctrl.g_a * (m.ctrl.v_ref - op.e0) + op.i0;
    }
    s(3) = x0.real();
    s(4) = x0.imag();
  }
  auto f = [&](const Eigen::VectorXd& y) {
    const cplx x = hx ? cplx{y(3), y(4)} : cplx{0.0, 0.0};
    const auto r = m.dq_rates({y(0), y(1)}, y(2), x, p_ref);
    Eigen::VectorXd out(n);
    out(0) = r.di.real();
    out(1) = r.di.imag();
    out(2) = r.ddelta;
    if (hx) {
      out(3) = r.dx.real();
      out(4) = r.dx.imag();
    }
    return out;
  };
  Eigen::VectorXd fy = f(s);
  for (int it = 0; it < 30 && fy.norm() > 1e-13; ++it) {
    const Eigen::MatrixXd jac = detail::numeric_jacobian(f, s, 1e-7);
    s -= jac.fullPivLu().solve(fy);
    fy = f(s);
  }
  Equilibrium eq;
  eq.i = {s(0), s(1)};
  eq.delta = s(2);
  eq.x = hx ? cplx{s(3), s(4)} : cplx{0.0, 0.0};
  eq.term = m.terminal(std::polar(m.circuit.v_g, -eq.delta), eq.i, eq.x);
  eq.residual = fy.norm();
  if (!(eq.residual < 1e-9)) {
    throw InfeasibleOperatingPoint("simulator equilibrium did not converge", eq.residual);
  }
  return eq;
}

/// Eigenvalues of the linearized dq model (3 states, or 5 with an AVC
/// integrator), sorted by descending imaginary part.
inline std::vector<cplx> linearized_poles(const PlantModel& m, double p_ref) {
  const Equilibrium eq = find_equilibrium(m, p_ref);
  const bool hx = m.has_integrator();
  const int n = hx ? 5 : 3;
  Eigen::VectorXd s(n);
  s << eq.i.real(), eq.i.imag(), eq.delta, Eigen::VectorXd::Zero(n - 3);
  if (hx) {
    s(3) = eq.x.real();
    s(4) = eq.x.imag();
  }
  auto f = [&](const Eigen::VectorXd& y) {
    const cplx x = hx ? cplx{y(3), y(4)} : cplx{0.0, 0.0};
    const auto r = m.dq_rates({y(0), y(1)}, y(2), x, p_ref);
    Eigen::VectorXd out(n);
    out(0) = r.di.real();
    out(1) = r.di.imag();
    out(2) = r.ddelta;
    if (hx) {
      out(3) = r.dx.real();
      out(4) = r.dx.imag();
    }
    return out;
  };
  Eigen::EigenSolver<Eigen::MatrixXd> es(detail::numeric_jacobian(f, s));
  std::vector<cplx> out;
  for (Eigen::Index k = 0; k < n; ++k) out.push_back(es.eigenvalues()(k));
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    return a.imag() != b.imag() ? a.imag() > b.imag() : a.real() < b.real();
  });
  return out;
}

inline std::vector<cplx> linearized_poles(const CircuitParams& c, const ControlParams& ctrl,
                                          double p_ref, double grid_resistance = 0.0) {
  return linearized_poles(PlantModel{c, ctrl, grid_resistance}, p_ref);
}

// ---------------------------------------------------------------------------
// Time-domain simulator.

class Simulator {
 public:
  using Vec = std::array<double, 5>;  // Re i_s, Im i_s, delta, Re x, Im x

  Simulator(const CircuitParams& c, const ControlParams& ctrl, PowerSchedule schedule,
            SimConfig cfg, double t0 = 0.0)
      : model_{c, ctrl, cfg.grid_resistance}, schedule_(schedule), cfg_(cfg) {
    c.validate();
    ctrl.validate();
    cfg_.validate();
    const auto poles = linearized_poles(model_, schedule_.p0);
    double lam = 0.0;
    for (cplx p : poles) lam = std::max(lam, std::abs(p));
    bandwidth_ = lam + c.omega1;
    if (!(cfg_.dt * bandwidth_ < 0.1)) {
      throw DomainError("dt * bandwidth = " + std::to_string(cfg_.dt * bandwidth_) +
                        " exceeds 0.1; reduce dt");
    }
    const Equilibrium eq = find_equilibrium(model_, schedule_.p0);
    t_ = t0;
    const double theta = eq.delta + c.omega1 * t0;
    const cplx is = eq.i * std::polar(1.0, theta);
    y_ = {is.real(), is.imag(), eq.delta, eq.x.real(), eq.x.imag()};
  }

  double bandwidth() const { return bandwidth_; }
  double t() const { return t_; }
  const PlantModel& model() const { return model_; }

  SimState state() const {
    SimState s;
    s.i_s = {y_[0], y_[1]};
    s.theta = y_[2] + model_.circuit.omega1 * t_;
    s.avc_integral = {y_[3], y_[4]};
    s.t = t_;
    return s;
  }

  struct Sample {
    double t, p, theta_rel;
    cplx e, i;
  };

  Sample sample() const { return observe(t_, y_); }

  /// Adds di to the stationary-frame current (initial-condition experiments).
  void perturb_current(cplx di) {
    y_[0] += di.real();
    y_[1] += di.imag();
  }

  /// One fixed step of length h (defaults to cfg.dt).
  void step(double h = 0.0) {
    if (h <= 0.0) h = cfg_.dt;
    if (cfg_.integrator == Integrator::RK4) {
      const Vec k1 = rates(t_, y_);
      const Vec k2 = rates(t_ + 0.5 * h, axpy(y_, 0.5 * h, k1));
      const Vec k3 = rates(t_ + 0.5 * h, axpy(y_, 0.5 * h, k2));
      const Vec k4 = rates(t_ + h, axpy(y_, h, k3));
      for (int k = 0; k < 5; ++k) y_[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    } else {
      trapezoidal(h);
    }
    t_ += h;
  }

  /// Integrates n steps of size h, recording every `decimation` steps
  /// (including the initial sample). Throws SimulationDiverged.
  TimeSeries run(std::size_t n_steps, double h = 0.0, std::size_t decimation = 0) {
    if (h <= 0.0) h = cfg_.dt;
    if (decimation == 0) decimation = cfg_.decimation;
    TimeSeries ts;
    record(ts);
    const double t_start = t_;
    for (std::size_t k = 1; k <= n_steps; ++k) {
      const SimState good = state();
      const Vec before = y_;
      const double t_before = t_;
      step(h);
      t_ = t_start + static_cast<double>(k) * h;  // no accumulated rounding
      const double mag = std::hypot(y_[0], y_[1]);
      bool finite = true;
      for (double v : y_) finite = finite && std::isfinite(v);
      if (!finite || mag > cfg_.divergence_limit) {
        y_ = before;
        t_ = t_before;
        throw SimulationDiverged("|i_s| exceeded " + std::to_string(cfg_.divergence_limit) +
                                     " p.u. at t = " + std::to_string(t_before + h),
                                 good, std::move(ts));
      }
      if (k % decimation == 0) record(ts);
    }
    return ts;
  }

 private:
  PlantModel model_;
  PowerSchedule schedule_;
  SimConfig cfg_;
  double bandwidth_ = 0.0;
  double t_ = 0.0;
  Vec y_{};

  static Vec axpy(const Vec& y, double a, const Vec& k) {
    Vec out;
    for (int i = 0; i < 5; ++i) out[i] = y[i] + a * k[i];
    return out;
  }

  Vec rates(double t, const Vec& y) const {
    const auto& c = model_.circuit;
    const double theta = y[2] + c.omega1 * t;
    const cplx rot = std::polar(1.0, theta);
    const cplx is{y[0], y[1]};
    const cplx i = is * std::conj(rot);
    const cplx vg = std::polar(c.v_g, -y[2]);
    const cplx x{y[3], y[4]};
    const Terminal term = model_.terminal(vg, i, x);
    const cplx vs = term.v * rot;
    const cplx vgs = std::polar(c.v_g, c.omega1 * t);
    const cplx dis = (vs - vgs - (c.r + model_.r_g) * is) / model_.l_s();
    const double ddelta = model_.ctrl.k_p * (schedule_(t) - term.p);
    const cplx dx = model_.has_integrator() ? model_.ctrl.k_i * (model_.ctrl.v_ref - term.e)
                                            : cplx{0.0, 0.0};
    return {dis.real(), dis.imag(), ddelta, dx.real(), dx.imag()};
  }

  Sample observe(double t, const Vec& y) const {
    const auto& c = model_.circuit;
    const double theta = y[2] + c.omega1 * t;
    const cplx i = cplx{y[0], y[1]} * std::polar(1.0, -theta);
    const Terminal term = model_.terminal(std::polar(c.v_g, -y[2]), i, {y[3], y[4]});
    return {t, term.p, y[2], term.e, i};
  }

  void record(TimeSeries& ts) const {
    const Sample s = sample();
    ts.t.push_back(s.t);
    ts.p.push_back(s.p);
    ts.e_d.push_back(s.e.real());
    ts.e_q.push_back(s.e.imag());
    ts.i_d.push_back(s.i.real());
    ts.i_q.push_back(s.i.imag());
    ts.theta.push_back(s.theta_rel);
  }

  void trapezoidal(double h) {
    const Vec f0 = rates(t_, y_);
    Eigen::Matrix<double, 5, 1> y1;
    for (int k = 0; k < 5; ++k) y1(k) = y_[k] + h * f0[k];  // explicit Euler predictor
    auto residual = [&](const Eigen::Matrix<double, 5, 1>& z) {
      Vec zz;
      for (int k = 0; k < 5; ++k) zz[k] = z(k);
      const Vec f1 = rates(t_ + h, zz);
      Eigen::Matrix<double, 5, 1> r;
      for (int k = 0; k < 5; ++k) r(k) = z(k) - y_[k] - 0.5 * h * (f0[k] + f1[k]);
      return r;
    };
    for (int it = 0; it < 10; ++it) {
      const auto r = residual(y1);
      if (r.lpNorm<Eigen::Infinity>() < 1e-13) break;
      Eigen::Matrix<double, 5, 5> jac;
      for (int c = 0; c < 5; ++c) {
        const double d = 1e-7 * std::max(1.0, std::abs(y1(c)));
        auto yp = y1, ym = y1;
        yp(c) += d;
        ym(c) -= d;
        jac.col(c) = (residual(yp) - residual(ym)) / (2.0 * d);
      }
      y1 -= jac.partialPivLu().solve(r);
    }
    for (int k = 0; k < 5; ++k) y_[k] = y1(k);
  }
};

/// p_ref step of `step` p.u. applied at t = 0 after cfg.preamble seconds of
/// steady state; the series starts at t = -preamble.
inline TimeSeries run_step_experiment(const CircuitParams& c, const ControlParams& ctrl, double p0,
                                      double step, const SimConfig& cfg) {
  PowerSchedule sch;
  sch.p0 = p0;
  sch.step = step;
  sch.t_step = 0.0;
  Simulator sim(c, ctrl, sch, cfg, -cfg.preamble);
  const auto n = static_cast<std::size_t>(std::llround((cfg.t_end + cfg.preamble) / cfg.dt));
  return sim.run(n);
}

// ---------------------------------------------------------------------------
// Frequency scan by sinusoidal injection on p_ref.

struct ScanOptions {
  double min_settle = 0.5;      // s
  double settle_periods = 5.0;
  double slow_mode_factor = 5.0;  // settle >= factor / min |Re(lambda)|
  double max_settle = 30.0;     // s
  double min_window = 0.2;      // s
  int max_windows = 12;
  double accept_drift = 1e-3;
  double flag_drift = 0.05;
};

struct ScanPoint {
  double freq_hz = 0.0;
  cplx h;
  double drift = 0.0;
  bool flagged = false;
};

inline ScanPoint scan_one_frequency(const CircuitParams& c, const ControlParams& ctrl, double p0,
                                    double f, double amplitude, const SimConfig& cfg,
                                    double slowest_decay, const ScanOptions& opt = {}) {
  const double period = 1.0 / f;
  const auto per_period = static_cast<std::size_t>(std::ceil(period / cfg.dt));
  const double h = period / static_cast<double>(per_period);
  const double settle_target = std::min(
      opt.max_settle, std::max({opt.settle_periods * period, opt.min_settle,
                                slowest_decay > 0.0 ? opt.slow_mode_factor / slowest_decay : 0.0}));
  const auto settle_periods = static_cast<std::size_t>(std::ceil(settle_target / period));
  const auto window_periods = static_cast<std::size_t>(std::max(1.0, std::ceil(opt.min_window / period)));

  PowerSchedule sch;
  sch.p0 = p0;
  sch.sine_amplitude = amplitude;
  sch.sine_freq_hz = f;
  sch.t_sine = 0.0;
  SimConfig local = cfg;
  local.dt = h;
  Simulator sim(c, ctrl, sch, local, 0.0);
  sim.run(settle_periods * per_period, h, settle_periods * per_period + 1);

  const double w = kTwoPi * f;
  auto window = [&]() {
    cplx num{0.0, 0.0}, den{0.0, 0.0};
    const std::size_t n = window_periods * per_period;
    for (std::size_t k = 0; k < n; ++k) {
      const auto s = sim.sample();
      const cplx ph = std::polar(1.0, -w * s.t);
      num += (s.p - p0) * ph;
      den += amplitude * std::sin(w * s.t) * ph;
      sim.step(h);
    }
    return num / den;
  };

  ScanPoint pt;
  pt.freq_hz = f;
  cplx prev = window();
  pt.drift = INFINITY;
  for (int k = 1; k < opt.max_windows; ++k) {
    const cplx cur = window();
    pt.drift = std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
    prev = cur;
    if (pt.drift <= opt.accept_drift) break;
  }
  pt.h = prev;
  pt.flagged = pt.drift > opt.flag_drift;
  return pt;
}

/// Closed-loop dP/dP_ref measured on the nonlinear model. Throws
/// UnstableForScan when the linearization has a pole with Re >= 0.
inline FrequencyResponse frequency_scan(const CircuitParams& c, const ControlParams& ctrl,
                                        std::span<const double> freqs_hz, double amplitude,
                                        const SimConfig& cfg, double p0 = 0.0,
                                        const ScanOptions& opt = {}) {
  const auto poles = linearized_poles(c, ctrl, p0, cfg.grid_resistance);
  double slowest = INFINITY;
  for (cplx p : poles) {
    if (p.real() >= 0.0) throw UnstableForScan("closed loop is not stable at the scan point", poles);
    slowest = std::min(slowest, -p.real());
  }
  FrequencyResponse out;
  for (double f : freqs_hz) {
    const ScanPoint pt = scan_one_frequency(c, ctrl, p0, f, amplitude, cfg, slowest, opt);
    out.push_back(f, pt.h, pt.flagged);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Modal fit of a recorded transient (matrix pencil).

struct ModalFit {
  bool oscillatory = false;
  cplx pole;                 // dominant oscillatory pole (Im > 0), if any
  double real_pole = 0.0;    // dominant non-oscillatory pole
  std::vector<cplx> poles;   // all identified continuous-time poles
  std::vector<cplx> amplitude;  // complex residue of each pole at the window start
  std::vector<double> energy;

  /// Peak amplitude 2|a| of the oscillatory mode closest to `freq_hz`, or 0.
  double mode_amplitude_near(double freq_hz, double tol_hz) const {
    double best = 0.0;
    for (std::size_t k = 0; k < poles.size(); ++k) {
      if (poles[k].imag() > 0.0 && std::abs(poles[k].imag() / kTwoPi - freq_hz) <= tol_hz) {
        best = std::max(best, 2.0 * std::abs(amplitude[k]));
      }
    }
    return best;
  }

  PoleSet as_pole_set() const {
    PoleSet p;
    p.provenance = PoleProvenance::ExactOracle;
    if (oscillatory) {
      p.p1 = pole;
      p.p2 = std::conj(pole);
    } else {
      p.p1 = p.p2 = real_pole;
      p.overdamped = true;
    }
    p.p3 = real_pole;
    return p;
  }
};

struct FitOptions {
  double t_start = 0.0;
  double t_stop = std::numeric_limits<double>::infinity();
  std::size_t max_points = 600;
  int max_order = 10;
  double sv_threshold = 1e-7;  // relative singular-value cut
};

inline ModalFit fit_damped_sinusoids(std::span<const double> y, double ts, const FitOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (n < 8) throw DomainError("modal fit needs at least 8 samples");
  const Eigen::Index l = n / 3;
  Eigen::MatrixXd hank(n - l, l + 1);
  for (Eigen::Index r = 0; r < n - l; ++r)
    for (Eigen::Index c = 0; c <= l; ++c) hank(r, c) = y[static_cast<std::size_t>(r + c)];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hank, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int order = 0;
  while (order < std::min<int>(opt.max_order, static_cast<int>(sv.size())) &&
         sv(order) > opt.sv_threshold * sv(0))
    ++order;
  if (order == 0) throw DomainError("modal fit: signal is identically zero");
  const Eigen::MatrixXd v = svd.matrixV().leftCols(order);
  const Eigen::MatrixXd v1 = v.topRows(l);
  const Eigen::MatrixXd v2 = v.bottomRows(l);
  const Eigen::MatrixXd a = v1.completeOrthogonalDecomposition().pseudoInverse() * v2;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  Eigen::VectorXcd z = es.eigenvalues();

  // Amplitudes by least squares on the Vandermonde system.
  Eigen::MatrixXcd vand(n, order);
  for (Eigen::Index r = 0; r < n; ++r)
    for (int k = 0; k < order; ++k) vand(r, k) = std::pow(z(k), static_cast<double>(r));
  const Eigen::VectorXcd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), n).cast<cplx>();
  const Eigen::VectorXcd amp = vand.colPivHouseholderQr().solve(yy);

  ModalFit fit;
  double best_osc = -1.0, best_real = -1.0;
  for (int k = 0; k < order; ++k) {
    const cplx s = std::log(z(k)) / ts;
    double e = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) e += std::norm(amp(k) * std::pow(z(k), static_cast<double>(r)));
    fit.poles.push_back(s);
    fit.amplitude.push_back(amp(k));
    fit.energy.push_back(e);
    const bool dc = std::abs(s) < 1e-6 / ts;
    if (s.imag() > 1e-9) {
      if (e > best_osc) best_osc = e, fit.pole = s;
    } else if (std::abs(s.imag()) <= 1e-9 && !dc) {
      if (e > best_real) best_real = e, fit.real_pole = s.real();
    }
  }
  fit.oscillatory = best_osc >= 0.0;
  return fit;
}

/// Dominant poles of a step transient. The power column is resampled to at
/// most opt.max_points samples over [t_start, t_stop].
inline ModalFit fit_small_signal_poles(const TimeSeries& series, const FitOptions& opt = {}) {
  std::vector<double> y;
  std::size_t first = 0;
  while (first < series.size() && series.t[first] < opt.t_start) ++first;
  std::size_t last = first;
  while (last < series.size() && series.t[last] <= opt.t_stop) ++last;
  const std::size_t count = last - first;
  if (count < 8) throw DomainError("modal fit window holds fewer than 8 samples");
  const std::size_t stride = (count + opt.max_points - 1) / opt.max_points;
  for (std::size_t k = first; k < last; k += stride) y.push_back(series.p[k]);
  return fit_damped_sinusoids(y, series.sample_interval() * static_cast<double>(stride), opt);
}

}  // namespace gfm
