#pragma once

// Studies built from the analytic and simulation layers: pole sweeps with
// refined stability crossings, model-versus-scan Bode comparison, and seeded
// randomized checks of the design rules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gfm/analytic_schemes.hpp"
#include "gfm/cubic_factor.hpp"
#include "gfm/design_rules.hpp"
#include "gfm/emt_sim.hpp"

namespace gfm {

enum class SweepParam { Scr, KpPerOmega1, Ga, Ra, Ki, Pref };

inline std::string_view to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Scr: return "scr";
    case SweepParam::KpPerOmega1: return "k_p_per_omega1";
    case SweepParam::Ga: return "g_a";
    case SweepParam::Ra: return "r_a";
    case SweepParam::Ki: return "k_i";
    case SweepParam::Pref: return "p_ref";
  }
  return "?";
}

inline SweepParam sweep_param_from_string(std::string_view s) {
  for (SweepParam p : {SweepParam::Scr, SweepParam::KpPerOmega1, SweepParam::Ga, SweepParam::Ra,
                       SweepParam::Ki, SweepParam::Pref}) {
    if (s == to_string(p)) return p;
  }
  throw DomainError("unknown sweep parameter '" + std::string(s) + "'");
}

struct SweepSpec {
  CircuitParams circuit;
  ControlParams ctrl;
  OperatingMode mode = OperatingMode::LightLoad;
  double p_ref = 0.0;
  SweepParam param = SweepParam::Scr;
  std::vector<double> grid;
  double dominance = kDefaultDominance;

  void validate() const {
    if (grid.size() < 2) throw DomainError("sweep grid needs at least 2 points");
    const bool up = grid[1] > grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
        throw DomainError("sweep grid must be strictly monotone");
      }
    }
  }
};

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string error;
  PoleSet closed_form;
  PoleSet exact;
  FactorizationDiagnostics diagnostics;
  std::vector<GuidelineVerdict> verdicts;
  double pole_error = 0.0;  // max matched |closed form - exact|
};

struct Crossing {
  std::size_t index_lo = 0;  // grid[index_lo], grid[index_lo + 1] bracket the sign change
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double value = 0.0;        // refined parameter value
  bool into_rhp = true;      // stable -> unstable in grid order
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepPoint> points;
  std::vector<Crossing> crossings;
  double max_pole_error = 0.0;

  std::optional<double> first_crossing() const {
    if (crossings.empty()) return std::nullopt;
    return crossings.front().value;
  }
};

/// Circuit and controller with one parameter replaced.
inline std::pair<CircuitParams, ControlParams> apply_param(const CircuitParams& c, const ControlParams& k,
                                                           SweepParam p, double value) {
  CircuitParams cc = c;
  ControlParams kk = k;
  switch (p) {
    case SweepParam::Scr: cc.l_g = scr_to_lg(value); break;
    case SweepParam::KpPerOmega1: kk.k_p = value * c.omega1; break;
    case SweepParam::Ga: kk.g_a = value; break;
    case SweepParam::Ra: kk.r_a = value; break;
    case SweepParam::Ki: kk.k_i = value; break;
    case SweepParam::Pref: break;
  }
  return {cc, kk};
}

namespace detail {

struct Evaluated {
  OperatingPoint op;
  SchemeModel model;
  PoleSet exact;
};

inline Evaluated evaluate_point(const SweepSpec& s, double value) {
  const auto [c, k] = apply_param(s.circuit, s.ctrl, s.param, value);
  const double p = s.param == SweepParam::Pref ? value : s.p_ref;
  Evaluated e;
  e.op = solve_operating_point(c, k, p, s.mode);
  e.model = closed_loop_model(c, e.op, k);
  e.exact = exact_roots(e.model.derived.cubic);
  return e;
}

inline double max_re_exact(const SweepSpec& s, double value) {
  return evaluate_point(s, value).exact.max_real();
}

}  // namespace detail

/// Refines a sign change of max Re{exact roots} between a and b by
/// bisection to `rel_tol` relative.
inline double refine_crossing(const SweepSpec& s, double a, double b, double rel_tol = 1e-9) {
  double fa = detail::max_re_exact(s, a);
  for (int it = 0; it < 200 && std::abs(b - a) > rel_tol * std::max(std::abs(a), std::abs(b)); ++it) {
    const double m = 0.5 * (a + b);
    const double fm = detail::max_re_exact(s, m);
    if ((fm >= 0.0) == (fa >= 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

inline SweepResult run_pole_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepResult res;
  res.spec = spec;
  for (double v : spec.grid) {
    SweepPoint pt;
    pt.value = v;
    try {
      const auto e = detail::evaluate_point(spec, v);
      const auto [c, k] = apply_param(spec.circuit, spec.ctrl, spec.param, v);
      pt.closed_form = closed_form_poles(c, e.op, k);
      pt.exact = e.exact;
      if (e.model.derived.cubic.n0 > 0.0) {
        pt.diagnostics = check_conditions(e.model.derived.cubic, spec.dominance);
      }
      pt.verdicts = guideline_report(c, k, e.op);
      pt.pole_error = match_poles(pt.closed_form, pt.exact).max_distance();
      res.max_pole_error = std::max(res.max_pole_error, pt.pole_error);
      pt.ok = true;
    } catch (const std::exception& ex) {
      pt.error = ex.what();
    }
    res.points.push_back(std::move(pt));
  }
  for (std::size_t i = 0; i + 1 < res.points.size(); ++i) {
    const auto& a = res.points[i];
    const auto& b = res.points[i + 1];
    if (!a.ok || !b.ok) continue;
    const bool sa = a.exact.max_real() >= 0.0;
    const bool sb = b.exact.max_real() >= 0.0;
    if (sa == sb) continue;
    Crossing cr;
    cr.index_lo = i;
    cr.bracket_lo = a.value;
    cr.bracket_hi = b.value;
    cr.into_rhp = !sa;
    cr.value = refine_crossing(spec, a.value, b.value);
    res.crossings.push_back(cr);
  }
  return res;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n = 25) {
  return lin_space(lo, hi, n);
}

/// Standard pole-locus sweeps, 25 points each. Sweeps
/// that do not state an SCR use scr = 10.
inline SweepSpec standard_sweep(std::string_view name) {
  const CircuitParams c10 = CircuitParams::table_ii(10.0);
  const double w = c10.omega1;
  SweepSpec s;
  s.circuit = c10;
  s.mode = OperatingMode::LightLoad;
  if (name == "scheme1_scr") {
    s.ctrl = ControlParams::example1(w);
    s.param = SweepParam::Scr;
    s.grid = linear_grid(10.0, 1.5);
  } else if (name == "scheme1_kp") {
    s.ctrl = ControlParams::example1(w);
    s.param = SweepParam::KpPerOmega1;
    s.grid = linear_grid(0.01, 0.07);
  } else if (name == "scheme2_ga") {
    s.ctrl = ControlParams::example2(w);
    s.param = SweepParam::Ga;
    s.grid = linear_grid(0.1, 1.0);
  } else if (name == "scheme2_kp") {
    s.ctrl = ControlParams::example2(w);
    s.param = SweepParam::KpPerOmega1;
    s.grid = linear_grid(0.01, 0.07);
  } else if (name == "scheme3p_ra") {
    s.ctrl = ControlParams::example4(w);
    s.param = SweepParam::Ra;
    s.grid = linear_grid(0.1, 1.0);
  } else if (name == "scheme3p_ga") {
    s.ctrl = ControlParams::example4(w);
    s.param = SweepParam::Ga;
    s.grid = linear_grid(2.0, 7.0);
  } else if (name == "scheme3pi_scr") {
    s.ctrl = ControlParams::example5(w);
    s.param = SweepParam::Scr;
    s.grid = linear_grid(1.5, 20.0);
  } else if (name == "scheme3pi_ra") {
    s.ctrl = ControlParams::example5(w);
    s.param = SweepParam::Ra;
    s.grid = linear_grid(0.4, 1.0);
  } else if (name == "scheme3pi_ga") {
    s.ctrl = ControlParams::example5(w);
    s.param = SweepParam::Ga;
    s.grid = linear_grid(2.0, 4.0);
  } else {
    throw DomainError("unknown standard sweep '" + std::string(name) + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Model versus scan.

struct BodeComparison {
  FrequencyResponse model;
  FrequencyResponse scan;
  double band_lo_hz = 1.0;
  double band_hi_hz = 100.0;
  double max_db_error = 0.0;   // inside the validity band
  double rms_db_error = 0.0;
  double max_db_error_outside = 0.0;
  double model_peak_hz = 0.0;
  double scan_peak_hz = 0.0;
  std::size_t flagged = 0;
  bool skipped = false;    // closed loop unstable, no scan run
  std::string diagnostic;
};

/// Validity band of each analytic model.
inline std::pair<double, double> validity_band(Scheme s) {
  return s == Scheme::Scheme3PI ? std::pair{1.0, 25.0} : std::pair{1.0, 100.0};
}

/// Highest interior local maximum of a magnitude curve inside [lo, hi]
/// (the global maximum when the curve has none), refined by a parabola in
/// log frequency through the neighbouring samples.
inline double resonance_peak_hz(std::span<const double> f, std::span<const double> mag_db, double lo,
                                double hi) {
  std::size_t best = f.size();
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    if (f[i] < lo || f[i] > hi) continue;
    if (mag_db[i] >= mag_db[i - 1] && mag_db[i] >= mag_db[i + 1] &&
        (best == f.size() || mag_db[i] > mag_db[best])) {
      best = i;
    }
  }
  if (best == f.size()) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] >= lo && f[i] <= hi && (best == f.size() || mag_db[i] > mag_db[best])) best = i;
    }
    return best == f.size() ? std::nan("") : f[best];
  }
  const double x0 = std::log(f[best - 1]), x1 = std::log(f[best]), x2 = std::log(f[best + 1]);
  const double y0 = mag_db[best - 1], y1 = mag_db[best], y2 = mag_db[best + 1];
  const double d1 = (y1 - y0) / (x1 - x0), d2 = (y2 - y1) / (x2 - x1);
  const double curv = (d2 - d1) / (0.5 * (x2 - x0));
  if (!(curv < 0.0)) return f[best];
  const double xm = 0.5 * (x0 + x1) - d1 / curv;
  return std::exp(std::clamp(xm, x0, x2));
}

inline BodeComparison run_bode_compare(const CircuitParams& c, const ControlParams& ctrl,
                                       std::span<const double> freqs_hz, const SimConfig& cfg,
                                       double amplitude = 0.01, double p0 = 0.0,
                                       const ScanOptions& opt = {}) {
  BodeComparison out;
  const OperatingMode mode = p0 == 0.0 && ctrl.v_ref == c.v_g && !(ctrl.uses_cc() && !ctrl.vff_enabled)
                                 ? OperatingMode::LightLoad
                                 : OperatingMode::ControllerSteadyState;
  const OperatingPoint op = solve_operating_point(c, ctrl, p0, mode);
  out.model = eval_frequency_response(closed_loop_model(c, op, ctrl).closed_loop, freqs_hz);
  try {
    out.scan = frequency_scan(c, ctrl, freqs_hz, amplitude, cfg, p0, opt);
  } catch (const UnstableForScan& e) {
    out.skipped = true;
    out.diagnostic = e.what();
    return out;
  }
  std::tie(out.band_lo_hz, out.band_hi_hz) = validity_band(ctrl.scheme);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
    const double f = freqs_hz[i];
    const double err = std::abs(out.model.mag_db[i] - out.scan.mag_db[i]);
    if (out.scan.flagged[i]) ++out.flagged;
    if (f >= out.band_lo_hz && f <= out.band_hi_hz) {
      out.max_db_error = std::max(out.max_db_error, err);
      sq += err * err;
      ++n;
    } else {
      out.max_db_error_outside = std::max(out.max_db_error_outside, err);
    }
  }
  out.rms_db_error = n > 0 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
  out.model_peak_hz = resonance_peak_hz(freqs_hz, out.model.mag_db, out.band_lo_hz, out.band_hi_hz);
  out.scan_peak_hz = resonance_peak_hz(freqs_hz, out.scan.mag_db, out.band_lo_hz, out.band_hi_hz);
  return out;
}

// ---------------------------------------------------------------------------
// Randomized design-rule checks.

/// Uniform doubles from a 64-bit Mersenne twister, identical on every platform.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 gen_;
};

struct GuidelineSweepOptions {
  double kp_factor = 0.95;  // KpMax rules: k_p = factor * bound
};

struct GuidelineSweepReport {
  RuleId rule = RuleId::ScrSufficiency;
  std::size_t samples = 0;
  std::size_t counterexamples = 0;  // rule satisfied but the checked cubic is unstable
  std::size_t unstable = 0;         // exact cubic unstable, any verdict
  std::size_t full_model_unstable = 0;  // informational: dq linearization
  double min_margin = INFINITY;
  double max_margin = -INFINITY;
  double mean_margin = 0.0;
  double worst_max_real = -INFINITY;
};

inline GuidelineSweepReport run_guideline_sweep(RuleId rule, std::size_t samples, std::uint64_t seed,
                                                const GuidelineSweepOptions& opt = {}) {
  GuidelineSweepReport rep;
  rep.rule = rule;
  PortableRng rng(seed);
  const double w = CircuitParams{}.omega1;
  double margin_sum = 0.0;

  auto note = [&](const GuidelineVerdict& v, const PoleSet& ex) {
    ++rep.samples;
    rep.min_margin = std::min(rep.min_margin, v.margin);
    rep.max_margin = std::max(rep.max_margin, v.margin);
    margin_sum += v.margin;
    rep.worst_max_real = std::max(rep.worst_max_real, ex.max_real());
    const bool unstable = ex.max_real() >= 0.0;
    if (unstable) ++rep.unstable;
    if (unstable && v.satisfied) ++rep.counterexamples;
  };

  switch (rule) {
    case RuleId::KpMax1:
    case RuleId::KpMax2: {
      while (rep.samples < samples) {
        CircuitParams c;
        c.l_f = rng.uniform(0.1, 0.2);
        c.r = rng.uniform(0.005, 0.026);
        c.l_g = scr_to_lg(rng.uniform(1.5, 20.0));
        ControlParams k = rule == RuleId::KpMax1 ? ControlParams::example1(w) : ControlParams::example2(w);
        if (rule == RuleId::KpMax2) k.g_a = rng.uniform(0.0, 1.0);
        const auto op = solve_operating_point(c, k, 0.0, OperatingMode::LightLoad);
        const double bound = rule == RuleId::KpMax1 ? kp_max_scheme1(c, op) : kp_max_scheme2(c, op, k.g_a);
        k.k_p = opt.kp_factor * bound;
        const auto ex = exact_roots(closed_loop_model(c, op, k).derived.cubic);
        note(kp_rule(rule, k.k_p, bound), ex);
        if (linearized_poles(c, k, 0.0).front().real() >= 0.0) ++rep.full_model_unstable;
      }
      break;
    }
    case RuleId::ScrSufficiency: {
      while (rep.samples < samples) {
        CircuitParams c;
        c.l_f = rng.uniform(0.1, 0.2);
        c.r = rng.uniform(0.005, 0.026);
        ControlParams k = ControlParams::example5(w);
        k.k_p = rng.uniform(0.01, 0.05) * w;
        k.g_a = rng.uniform(1.0, 8.0);
        k.k_i = rng.uniform(0.0, 300.0);
        k.r_a = rng.uniform(0.3, 1.5);
        if (!(k.g_a - k.k_i / w > 0.0)) continue;
        c.l_g = 1.0;  // placeholder, replaced below
        const ScrBound b = scr_sufficiency_bound(c, k);
        const double hi = b.unbounded ? 20.0 : std::min(b.bound, 20.0);
        const double scr = rng.uniform(0.05, 1.0) * hi;
        c.l_g = scr_to_lg(scr);
        const ScrBound v = scr_sufficiency_bound(c, k);
        if (!v.verdict.satisfied) continue;
        const auto ex = exact_roots(plant_and_closed_loop_scheme3b(c, k).derived.cubic);
        note(v.verdict, ex);
        double worst = -INFINITY;
        for (cplx p : linearized_poles(c, k, 0.0)) worst = std::max(worst, p.real());
        if (worst >= 0.0) ++rep.full_model_unstable;
      }
      break;
    }
    case RuleId::SrDampingRule: {
      while (rep.samples < samples) {
        CircuitParams c;
        c.l_f = rng.uniform(0.1, 0.2);
        c.r = rng.uniform(0.005, 0.026);
        c.l_g = scr_to_lg(rng.uniform(1.5, 20.0));
        ControlParams k = ControlParams::example4(w);
        k.g_a = rng.uniform(0.5, 7.0);
        k.r_a = rng.uniform(0.1, 1.5);
        const auto v = sr_damping_rule(c, k.r_a, k.g_a);
        const auto op = solve_operating_point(c, k, 0.0, OperatingMode::LightLoad);
        const auto ex = exact_roots(closed_loop_model(c, op, k).derived.cubic);
        note(v, ex);
      }
      break;
    }
    case RuleId::SsrFreqBound: {
      while (rep.samples < samples) {
        CircuitParams c;
        c.l_f = rng.uniform(0.1, 0.2);
        c.r = rng.uniform(0.005, 0.026);
        c.l_g = scr_to_lg(rng.uniform(1.5, 20.0));
        ControlParams k = ControlParams::example5(w);
        k.k_p = rng.uniform(0.01, 0.05) * w;
        k.g_a = rng.uniform(1.0, 8.0);
        k.k_i = rng.uniform(1.0, 0.99 * w);
        k.r_a = rng.uniform(0.5, 1.5);
        const auto b = ssr_frequency_bound(c, k);
        // A counterexample here is a violated bound, not an unstable cubic.
        ++rep.samples;
        const auto& v = b.verdict;
        rep.min_margin = std::min(rep.min_margin, v.margin);
        rep.max_margin = std::max(rep.max_margin, v.margin);
        margin_sum += v.margin;
        if (!v.satisfied) ++rep.counterexamples;
      }
      break;
    }
  }
  rep.mean_margin = rep.samples > 0 ? margin_sum / static_cast<double>(rep.samples) : 0.0;
  return rep;
}

}  // namespace gfm
