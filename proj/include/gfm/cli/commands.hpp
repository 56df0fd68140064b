#pragma once

// Subcommand implementations. Each returns a process exit code and writes
// its artifacts under `out`.

#include <filesystem>
#include <iostream>
#include <string>

#include "gfm/analytic_schemes.hpp"
#include "gfm/cli/config.hpp"
#include "gfm/cli/output.hpp"
#include "gfm/design_rules.hpp"
#include "gfm/emt_sim.hpp"
#include "gfm/experiments.hpp"

namespace gfm::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kUnstableForScan = 3,
  kSimDiverged = 4,
  kGuidelineFailure = 5,
};

struct Context {
  RunConfig cfg;
  std::filesystem::path out = ".";
  std::uint64_t seed = 0;
  std::ostream* log = &std::cout;
  std::ostream* err = &std::cerr;
};

namespace detail {

inline OperatingPoint operating_point(const RunConfig& cfg) {
  try {
    return solve_operating_point(cfg.circuit, cfg.ctrl, cfg.p_ref, cfg.mode);
  } catch (const std::exception& e) {
    throw ConfigError("operating_point", e.what());
  }
}

inline json complex_json(cplx z) { return json{{"re", json_number(z.real())}, {"im", json_number(z.imag())}}; }

inline json poles_json(const PoleSet& p) {
  json a = json::array();
  for (cplx z : p.as_array()) a.push_back(complex_json(z));
  return a;
}

inline json op_json(const OperatingPoint& op) {
  return json{{"theta0", json_number(op.theta0)}, {"v0", complex_json(op.v0)}, {"e0", complex_json(op.e0)},
              {"i0", complex_json(op.i0)},         {"p0", json_number(op.p0)}};
}

inline json diagnostics_json(const FactorizationDiagnostics& d) {
  return json{{"threshold", json_number(d.threshold)},
              {"epsilon", json_number(d.epsilon)},
              {"conditions_met", d.conditions_met},
              {"sufficient_met", d.sufficient_met},
              {"overdamped", d.overdamped},
              {"ratios", json{{"n0_over_m1", json_number(d.ratio_n0_m1)},
                              {"n0_over_eps", json_number(d.ratio_n0_eps)},
                              {"n0_over_n1", json_number(d.ratio_n0_n1)},
                              {"n0_over_m0", json_number(d.ratio_n0_m0)},
                              {"n0_over_m2", json_number(d.ratio_n0_m2)}}}};
}

inline json verdict_json(const GuidelineVerdict& v) {
  json inputs = json::object();
  for (const auto& [k, x] : v.inputs) inputs[k] = json_number(x);
  json j{{"rule", std::string(to_string(v.id))}, {"applicable", v.applicable}};
  if (v.applicable) {
    j["satisfied"] = v.satisfied;
    j["margin"] = json_number(v.margin);
    j["inputs"] = inputs;
  } else {
    j["reason"] = v.reason;
  }
  return j;
}

inline json verdicts_json(const std::vector<GuidelineVerdict>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(verdict_json(v));
  return a;
}

struct Analysis {
  OperatingPoint op;
  SchemeModel model;
  PoleSet exact;
  std::optional<PoleSet> closed_form;
  std::string closed_form_error;
};

inline Analysis analyse(const CircuitParams& c, const ControlParams& k, const OperatingPoint& op) {
  Analysis a;
  a.op = op;
  a.model = closed_loop_model(c, op, k);
  a.exact = exact_roots(a.model.derived.cubic);
  try {
    a.closed_form = closed_form_poles(c, op, k);
  } catch (const std::exception& e) {
    a.closed_form_error = e.what();
  }
  return a;
}

inline std::filesystem::path prepare_out(const Context& ctx) {
  std::filesystem::create_directories(ctx.out);
  return ctx.out;
}

}  // namespace detail

inline int cmd_poles(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto op = detail::operating_point(cfg);
  const auto a = detail::analyse(cfg.circuit, cfg.ctrl, op);
  const std::string scheme{to_string(cfg.ctrl.scheme)};
  const double scr = cfg.circuit.scr();

  Csv csv{"scheme", "param_name", "param_value", "source", "re1", "im1", "re2", "im2", "re3", "im3"};
  if (a.closed_form) csv.cell(scheme).cell("scr").cell(scr).cell("closed_form").poles(*a.closed_form).end();
  csv.cell(scheme).cell("scr").cell(scr).cell("exact").poles(a.exact).end();

  json summary{{"scheme", scheme}, {"operating_mode", std::string(to_string(cfg.mode))},
               {"operating_point", detail::op_json(op)}};
  const auto& cub = a.model.derived.cubic;
  summary["cubic"] = json{{"n1", json_number(cub.n1)}, {"n0", json_number(cub.n0)}, {"m2", json_number(cub.m2)},
                          {"m1", json_number(cub.m1)}, {"m0", json_number(cub.m0)}};
  if (cub.n0 > 0.0) summary["diagnostics"] = detail::diagnostics_json(check_conditions(cub));
  else summary["diagnostics"] = nullptr;
  if (a.closed_form) {
    summary["closed_form_error"] = json_number(match_poles(*a.closed_form, a.exact).max_distance());
  } else {
    summary["closed_form_error"] = nullptr;
    summary["closed_form_unavailable"] = a.closed_form_error;
  }
  summary["verdicts"] = detail::verdicts_json(guideline_report(cfg.circuit, cfg.ctrl, op));

  const auto dir = detail::prepare_out(ctx);
  write_atomic(dir / "poles.csv", csv.str());
  write_json(dir / "summary.json", summary);
  *ctx.log << "max Re(exact) = " << format_double(a.exact.max_real()) << " rad/s\n";
  return kOk;
}

struct FreqRespOptions {
  std::optional<std::pair<double, double>> band;
  std::size_t points = 200;
  bool with_scan = false;
};

inline int cmd_freqresp(const Context& ctx, const FreqRespOptions& opt) {
  const RunConfig& cfg = ctx.cfg;
  if (opt.points < 2) throw ConfigError("--points", "need at least 2 points");
  std::vector<double> freqs;
  if (opt.band) {
    const auto [lo, hi] = *opt.band;
    if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("--band", "need 0 < lo < hi");
    freqs = log_space(lo, hi, opt.points);
  } else {
    freqs = default_frequency_grid(cfg.ctrl.scheme, opt.points);
  }
  const auto op = detail::operating_point(cfg);
  const auto model = closed_loop_model(cfg.circuit, op, cfg.ctrl);
  const auto fr = eval_frequency_response(model.closed_loop, freqs);

  FrequencyResponse scan;
  if (opt.with_scan) {
    try {
      scan = frequency_scan(cfg.circuit, cfg.ctrl, freqs, cfg.scan_amplitude, cfg.sim, cfg.p_ref);
    } catch (const UnstableForScan& e) {
      *ctx.err << "error: " << e.what() << "\n";
      for (cplx p : e.poles()) {
        *ctx.err << "  pole " << format_double(p.real()) << (p.imag() < 0 ? " - " : " + ")
                 << format_double(std::abs(p.imag())) << "j\n";
      }
      const auto a = detail::analyse(cfg.circuit, cfg.ctrl, op);
      *ctx.err << "  analytic max Re = " << format_double(a.exact.max_real()) << "\n";
      return kUnstableForScan;
    }
  }
  Csv csv{"freq_hz", "source", "mag_db", "phase_deg"};
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    csv.cell(freqs[i]).cell("model").cell(fr.mag_db[i]).cell(fr.phase_deg[i]).end();
    if (opt.with_scan) csv.cell(freqs[i]).cell("scan").cell(scan.mag_db[i]).cell(scan.phase_deg[i]).end();
  }
  write_atomic(detail::prepare_out(ctx) / "bode.csv", csv.str());
  return kOk;
}

inline std::string timeseries_csv(const TimeSeries& ts) {
  Csv csv{"t_s", "p_pu", "e_d_pu", "e_q_pu", "i_d_pu", "i_q_pu", "theta_rad"};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    csv.cell(ts.t[i]).cell(ts.p[i]).cell(ts.e_d[i]).cell(ts.e_q[i]).cell(ts.i_d[i]).cell(ts.i_q[i]);
    csv.cell(ts.theta[i]).end();
  }
  return csv.str();
}

inline int cmd_simulate(const Context& ctx, std::optional<double> step_override) {
  const RunConfig& cfg = ctx.cfg;
  const double step = step_override.value_or(cfg.step);
  const auto dir = detail::prepare_out(ctx);
  TimeSeries ts;
  try {
    ts = run_step_experiment(cfg.circuit, cfg.ctrl, cfg.p_ref, step, cfg.sim);
  } catch (const SimulationDiverged& e) {
    write_atomic(dir / "timeseries.csv.aborted", timeseries_csv(e.partial()));
    *ctx.err << "error: " << e.what() << " (partial series in timeseries.csv.aborted)\n";
    return kSimDiverged;
  } catch (const InfeasibleOperatingPoint& e) {
    throw ConfigError("operating_point", e.what());
  }
  write_atomic(dir / "timeseries.csv", timeseries_csv(ts));
  if (step != 0.0) {
    try {
      const auto fit = fit_small_signal_poles(ts);
      if (fit.oscillatory) {
        *ctx.log << "dominant oscillation " << format_double(fit.pole.imag() / kTwoPi) << " Hz, sigma "
                 << format_double(fit.pole.real()) << " 1/s\n";
      }
    } catch (const DomainError&) {
    }
  }
  return kOk;
}

inline int cmd_sweep(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  if (!cfg.sweep) throw ConfigError("sweep", "missing [sweep] section");
  SweepSpec spec;
  spec.circuit = cfg.circuit;
  spec.ctrl = cfg.ctrl;
  spec.mode = cfg.mode;
  spec.p_ref = cfg.p_ref;
  spec.param = cfg.sweep->param;
  spec.grid = cfg.sweep->grid;
  const auto res = run_pole_sweep(spec);
  const std::string scheme{to_string(cfg.ctrl.scheme)};
  const std::string pname{to_string(spec.param)};

  Csv csv{"index", "scheme", "param_name", "param_value", "source", "re1", "im1", "re2", "im2", "re3", "im3"};
  json failures = json::array();
  json margins = json::array();
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const auto& pt = res.points[i];
    if (!pt.ok) {
      failures.push_back(json{{"index", i}, {"param_value", json_number(pt.value)}, {"error", pt.error}});
      continue;
    }
    csv.cell(i).cell(scheme).cell(pname).cell(pt.value).cell("closed_form").poles(pt.closed_form).end();
    csv.cell(i).cell(scheme).cell(pname).cell(pt.value).cell("exact").poles(pt.exact).end();
    json m = json::object();
    for (const auto& v : pt.verdicts) {
      if (v.applicable) m[std::string(to_string(v.id))] = json_number(v.margin);
    }
    margins.push_back(json{{"index", i}, {"param_value", json_number(pt.value)}, {"margins", m}});
  }
  json crossings = json::array();
  for (const auto& c : res.crossings) {
    crossings.push_back(json{{"value", json_number(c.value)},
                             {"bracket", json::array({json_number(c.bracket_lo), json_number(c.bracket_hi)})},
                             {"index_lo", c.index_lo},
                             {"direction", c.into_rhp ? "into_rhp" : "into_lhp"}});
  }
  const json out{{"scheme", scheme},
                 {"param_name", pname},
                 {"crossings", crossings},
                 {"max_closed_form_error", json_number(res.max_pole_error)},
                 {"guideline_margins", margins},
                 {"failures", failures}};
  const auto dir = detail::prepare_out(ctx);
  write_atomic(dir / "sweep.csv", csv.str());
  write_json(dir / "crossings.json", out);
  if (const auto x = res.first_crossing()) *ctx.log << "first crossing at " << pname << " = " << format_double(*x) << "\n";
  else *ctx.log << "no crossing\n";
  return kOk;
}

inline int cmd_check(const Context& ctx, std::size_t samples) {
  const RunConfig& cfg = ctx.cfg;
  const auto op = detail::operating_point(cfg);
  const auto report = guideline_report(cfg.circuit, cfg.ctrl, op);
  const bool pass = all_applicable_satisfied(report);
  json j{{"scheme", std::string(to_string(cfg.ctrl.scheme))},
         {"scr", json_number(cfg.circuit.scr())},
         {"pass", pass},
         {"verdicts", detail::verdicts_json(report)}};
  if (samples > 0) {
    json rnd = json::array();
    for (const auto& v : report) {
      if (!v.applicable) continue;
      const auto r = run_guideline_sweep(v.id, samples, ctx.seed);
      rnd.push_back(json{{"rule", std::string(to_string(v.id))},
                         {"seed", ctx.seed},
                         {"samples", r.samples},
                         {"counterexamples", r.counterexamples},
                         {"min_margin", json_number(r.min_margin)},
                         {"mean_margin", json_number(r.mean_margin)},
                         {"max_margin", json_number(r.max_margin)}});
    }
    j["randomized"] = rnd;
  }
  write_json(detail::prepare_out(ctx) / "report.json", j);
  for (const auto& v : report) {
    if (!v.applicable) continue;
    *ctx.log << to_string(v.id) << ": " << (v.satisfied ? "pass" : "FAIL") << " (margin "
             << format_double(v.margin) << ")\n";
  }
  return pass ? kOk : kGuidelineFailure;
}

}  // namespace gfm::cli
