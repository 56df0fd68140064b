#pragma once

// Design inequalities and the per-scheme guideline report.
//
// Every verdict carries a margin normalized by the rule's right-hand side,
// positive exactly when the rule is satisfied.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gfm/analytic_schemes.hpp"
#include "gfm/core_model.hpp"

namespace gfm {

enum class RuleId { KpMax1, KpMax2, SrDampingRule, ScrSufficiency, SsrFreqBound };

inline std::string_view to_string(RuleId r) {
  switch (r) {
    case RuleId::KpMax1: return "KpMax1";
    case RuleId::KpMax2: return "KpMax2";
    case RuleId::SrDampingRule: return "SrDampingRule";
    case RuleId::ScrSufficiency: return "ScrSufficiency";
    case RuleId::SsrFreqBound: return "SsrFreqBound";
  }
  return "?";
}

inline RuleId rule_from_string(std::string_view s) {
  for (RuleId r : {RuleId::KpMax1, RuleId::KpMax2, RuleId::SrDampingRule, RuleId::ScrSufficiency,
                   RuleId::SsrFreqBound}) {
    if (s == to_string(r)) return r;
  }
  throw DomainError("unknown rule '" + std::string(s) + "'");
}

struct GuidelineVerdict {
  RuleId id = RuleId::KpMax1;
  bool applicable = true;
  bool satisfied = false;
  double margin = 0.0;
  std::string reason;  // why a rule is inapplicable
  std::vector<std::pair<std::string, double>> inputs;
};

namespace detail {
inline GuidelineVerdict inapplicable(RuleId id, std::string reason) {
  GuidelineVerdict v;
  v.id = id;
  v.applicable = false;
  v.margin = std::nan("");
  v.reason = std::move(reason);
  return v;
}
}  // namespace detail

// --- k_p bounds -------------------------------------------------------------

/// 2 R w1 / (V E_d0).
inline double kp_max_scheme1(const CircuitParams& c, const OperatingPoint& op) {
  const double v = op.v();
  if (!(v > 0.0) || !(op.e_d0() > 0.0)) throw DomainError("kp_max needs V > 0 and E_d0 > 0");
  return 2.0 * c.r * c.omega1 / (v * op.e_d0());
}

/// 2 R w1 / (V E_d0 + G_a |E0|^2).
inline double kp_max_scheme2(const CircuitParams& c, const OperatingPoint& op, double g_a) {
  const double v = op.v();
  if (!(v > 0.0) || !(op.e_d0() > 0.0)) throw DomainError("kp_max needs V > 0 and E_d0 > 0");
  return 2.0 * c.r * c.omega1 / ((std::conj(op.e0) * op.v0).real() + g_a * std::norm(op.e0));
}

/// Light-load estimate 2 R w1 / (1 + G_a).
inline double kp_max_scheme2_estimate(const CircuitParams& c, double g_a) {
  return 2.0 * c.r * c.omega1 / (1.0 + g_a);
}

inline GuidelineVerdict kp_rule(RuleId id, double k_p, double bound) {
  GuidelineVerdict v;
  v.id = id;
  v.margin = (bound - k_p) / bound;
  v.satisfied = v.margin > 0.0;
  v.inputs = {{"k_p", k_p}, {"k_p_max", bound}};
  return v;
}

// --- scheme 3a ---------------------------------------------------------------

/// (1 - G_a/SCR) R_a >= w1 L_f, all in p.u.
inline GuidelineVerdict sr_damping_rule(const CircuitParams& c, double r_a, double g_a) {
  const double scr = c.scr();
  GuidelineVerdict v;
  v.id = RuleId::SrDampingRule;
  const double lhs = (1.0 - g_a / scr) * r_a;
  const double rhs = c.l_f;
  v.margin = (lhs - rhs) / rhs;
  v.satisfied = lhs >= rhs;
  v.inputs = {{"scr", scr}, {"r_a", r_a}, {"g_a", g_a}, {"lhs", lhs}, {"rhs", rhs}};
  return v;
}

// --- scheme 3b ---------------------------------------------------------------

struct ScrBound {
  double bound = 0.0;      // +inf when w1 L_f >= R_a
  bool unbounded = false;
  GuidelineVerdict verdict;
  double rho1 = 0.0;
  double rho2 = 0.0;
  bool rho2_above_one = false;  // rho2 > 1, the direct sufficient condition
};

/// SCR < (G_a - k_i/w1) / (1 - w1 L_f / R_a) guarantees a stable light-load
/// scheme 3b cubic.
inline ScrBound scr_sufficiency_bound(const CircuitParams& c, const ControlParams& ctrl) {
  ScrBound out;
  const double head = ctrl.g_a - ctrl.k_i / c.omega1;
  if (!(head > 0.0) || !(ctrl.r_a > 0.0)) {
    out.verdict = detail::inapplicable(RuleId::ScrSufficiency,
                                       "needs G_a - k_i/w1 > 0 and R_a > 0");
    out.bound = std::nan("");
    return out;
  }
  const double den = 1.0 - c.l_f / ctrl.r_a;
  const double scr = c.scr();
  GuidelineVerdict& v = out.verdict;
  v.id = RuleId::ScrSufficiency;
  if (den <= 0.0) {
    out.unbounded = true;
    out.bound = std::numeric_limits<double>::infinity();
    v.margin = 1.0;
    v.satisfied = true;
  } else {
    out.bound = head / den;
    v.margin = (out.bound - scr) / out.bound;
    v.satisfied = scr < out.bound;
  }
  if (ctrl.scheme == Scheme::Scheme3PI && ctrl.vff_enabled) {
    const Scheme3bTerms t = detail::scheme3b_terms(c, ctrl);
    out.rho1 = t.rho1;
    out.rho2 = t.rho2;
    out.rho2_above_one = t.rho2 > 1.0;
  }
  v.inputs = {{"scr", scr},       {"scr_bound", out.bound}, {"g_a", ctrl.g_a},
              {"k_i", ctrl.k_i},  {"r_a", ctrl.r_a},        {"rho2", out.rho2}};
  return out;
}

struct SsrBound {
  double bound = 0.0;   // sqrt(0.25 k_i w1 V^2), rad/s
  double coarse = 0.0;  // 0.5 w1
  GuidelineVerdict verdict;
};

/// Upper bound on the SSR frequency Im{p1,2c}. Premises: k_p <= 0.05 w1,
/// R_a in [0.5, 1.5], k_i < w1.
inline SsrBound ssr_frequency_bound(const CircuitParams& c, const ControlParams& ctrl) {
  SsrBound out;
  const double v = ctrl.v_ref;
  out.bound = std::sqrt(0.25 * ctrl.k_i * c.omega1 * v * v);
  out.coarse = 0.5 * c.omega1;
  const bool premises = ctrl.scheme == Scheme::Scheme3PI && ctrl.vff_enabled &&
                        ctrl.k_p <= 0.05 * c.omega1 && ctrl.r_a >= 0.5 && ctrl.r_a <= 1.5 &&
                        ctrl.k_i < c.omega1;
  if (!premises) {
    out.verdict = detail::inapplicable(
        RuleId::SsrFreqBound, "needs scheme 3b with k_p <= 0.05 w1, R_a in [0.5, 1.5], k_i < w1");
    return out;
  }
  const PoleSet p = poles_scheme3b_closed_form(c, ctrl);
  const double im = p.overdamped ? 0.0 : std::abs(p.p1.imag());
  GuidelineVerdict& g = out.verdict;
  g.id = RuleId::SsrFreqBound;
  if (out.bound > 0.0) {
    g.margin = (out.bound - im) / out.bound;
    g.satisfied = im < out.bound || (im == 0.0);
  } else {
    g.margin = im == 0.0 ? 1.0 : -1.0;
    g.satisfied = im == 0.0;
  }
  g.inputs = {{"im_p12c", im}, {"bound", out.bound}, {"coarse_bound", out.coarse},
              {"k_i", ctrl.k_i}};
  return out;
}

// --- report -----------------------------------------------------------------

/// All five rules, evaluated where the scheme makes them applicable.
inline std::vector<GuidelineVerdict> guideline_report(const CircuitParams& c,
                                                      const ControlParams& ctrl,
                                                      const OperatingPoint& op) {
  std::vector<GuidelineVerdict> out;
  const auto other = [&](RuleId id) {
    return detail::inapplicable(id, "not a rule for " + std::string(to_string(ctrl.scheme)));
  };
  const auto guarded = [&](RuleId id, auto&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return detail::inapplicable(id, e.what());
    }
  };

  out.push_back(ctrl.scheme == Scheme::Scheme1
                    ? guarded(RuleId::KpMax1,
                              [&] { return kp_rule(RuleId::KpMax1, ctrl.k_p, kp_max_scheme1(c, op)); })
                    : other(RuleId::KpMax1));
  out.push_back(ctrl.scheme == Scheme::Scheme2
                    ? guarded(RuleId::KpMax2,
                              [&] {
                                return kp_rule(RuleId::KpMax2, ctrl.k_p,
                                               kp_max_scheme2(c, op, ctrl.g_a));
                              })
                    : other(RuleId::KpMax2));
  out.push_back(ctrl.scheme == Scheme::Scheme3P
                    ? guarded(RuleId::SrDampingRule,
                              [&] { return sr_damping_rule(c, ctrl.r_a, ctrl.g_a); })
                    : other(RuleId::SrDampingRule));
  out.push_back(ctrl.scheme == Scheme::Scheme3PI
                    ? guarded(RuleId::ScrSufficiency,
                              [&] { return scr_sufficiency_bound(c, ctrl).verdict; })
                    : other(RuleId::ScrSufficiency));
  out.push_back(ctrl.scheme == Scheme::Scheme3PI
                    ? guarded(RuleId::SsrFreqBound,
                              [&] { return ssr_frequency_bound(c, ctrl).verdict; })
                    : other(RuleId::SsrFreqBound));
  return out;
}

inline bool all_applicable_satisfied(const std::vector<GuidelineVerdict>& report) {
  for (const auto& v : report) {
    if (v.applicable && !v.satisfied) return false;
  }
  return true;
}

}  // namespace gfm
