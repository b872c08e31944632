#pragma once

// Secure key rate of vacuum+weak decoy BB84 with a multi-mode source, under
// two analyses of the same photon statistics: the mode-aware worst case and
// the conventional mode-blind (single-mode) decoy bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmqkd/adversary_bounds.hpp"
#include "mmqkd/channel_model.hpp"
#include "mmqkd/error.hpp"
#include "mmqkd/pdc_source.hpp"

namespace mmqkd {

inline double binary_entropy(double x) {
  detail::require(detail::is_probability(x), "binary_entropy: argument must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

struct ProtocolParams {
  double q = 0.5;     // sifting factor
  double f = 1.22;    // error-correction inefficiency
  double mu_d = 0.1;  // weak decoy mean photon number
  double mu_min = 0.02;
  double mu_max = 1.5;
  double mu_step = 0.02;
  double refine_tol = 1e-4;

  void validate() const {
    detail::require(q > 0.0 && q <= 1.0, "protocol: q must lie in (0, 1]");
    detail::require(std::isfinite(f) && f >= 1.0, "protocol: f must be >= 1");
    detail::require(std::isfinite(mu_d) && mu_d > 0.0, "protocol: mu_d must be positive");
    detail::require(mu_min > 0.0 && mu_max >= mu_min && mu_step > 0.0, "protocol: invalid signal mean grid");
    detail::require(refine_tol > 0.0, "protocol: refine_tol must be positive");
  }

  std::vector<double> mu_grid() const {
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(std::floor((mu_max - mu_min) / mu_step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) grid.push_back(mu_min + static_cast<double>(i) * mu_step);
    return grid;
  }
};

/// Lower bound on bits per pulse; negative values are reported as 0.
inline double secure_key_rate(const ProtocolParams& pp, double y1_lb, double p1_s, double e1_ub, double q_s,
                              double e_s) {
  detail::require(detail::is_probability(y1_lb) && detail::is_probability(p1_s) && detail::is_probability(e1_ub) &&
                      detail::is_probability(q_s) && detail::is_probability(e_s),
                  "secure_key_rate: arguments must lie in [0, 1]");
  const double privacy = 1.0 - binary_entropy(std::min(e1_ub, 0.5));
  const double rate = pp.q * (y1_lb * p1_s * privacy - q_s * pp.f * binary_entropy(e_s));
  return std::max(0.0, rate);
}

struct NumericOptions {
  DistributionOptions dist;
  double eps_enum = 1e-12;
  std::size_t event_budget = kDefaultEventBudget;
  IterationOptions iter;
};

enum class RateModel { multi_mode, single_mode };

inline const char* to_string(RateModel m) { return m == RateModel::multi_mode ? "mm" : "sm"; }

struct KeyRateScenario {
  ModeWeights weights;
  DetectorParams detector;
  ProtocolParams protocol;
  NumericOptions numerics;
};

/// Source statistics for one (signal, decoy) intensity pair. The greedy
/// context is only built for the multi-mode model.
struct SourcePair {
  double mu_s = 0.0;
  double mu_d = 0.0;
  PhotonClassProbs probs_s;
  PhotonClassProbs probs_d;
  std::optional<BoundContext> context;

  static SourcePair build(const KeyRateScenario& sc, double mu_s, bool with_context) {
    SourcePair out;
    out.mu_s = mu_s;
    out.mu_d = sc.protocol.mu_d;
    const SourceState sig = solve_squeezing(sc.weights, mu_s);
    const SourceState dec = solve_squeezing(sc.weights, sc.protocol.mu_d);
    out.probs_s = class_probabilities(sig, sc.numerics.dist);
    out.probs_d = class_probabilities(dec, sc.numerics.dist);
    if (with_context) {
      out.context.emplace(out.probs_s, out.probs_d, mode_occupations(sig), mode_occupations(dec),
                          enumerate_multiphoton(sig, dec, sc.numerics.eps_enum, sc.numerics.event_budget));
    }
    return out;
  }
};

struct RateEvaluation {
  double rate = 0.0;
  double y1_lb = 0.0;
  double e1_ub = 1.0;
  ChannelObservables obs;
  BoundResult bounds;     // multi-mode model only
  bool yrel_ok = true;    // mode-blind precondition on the distribution pair
  bool failed = false;
  std::string diagnostic;
};

/// Full pipeline for one source pair and attenuation.
inline RateEvaluation evaluate_rate(const KeyRateScenario& sc, const SourcePair& pair, const ChannelParams& ch,
                                    RateModel model) {
  RateEvaluation ev;
  if (!(pair.mu_s > pair.mu_d)) {
    ev.failed = true;
    ev.diagnostic = "signal mean photon number must exceed the decoy's";
    return ev;
  }
  try {
    ev.obs = honest_observables(pair.probs_s, pair.probs_d, ch, sc.detector);
    ev.yrel_ok = check_yrel_condition(pair.probs_s, pair.probs_d);
    if (model == RateModel::multi_mode) {
      detail::require(pair.context.has_value(), "evaluate_rate: multi-mode model needs a bound context");
      ev.bounds = compute_bounds(ev.obs, *pair.context, sc.numerics.iter, sc.detector.e0);
      ev.y1_lb = ev.bounds.y1_lb_s;
      ev.e1_ub = ev.bounds.e1_ub_s;
    } else {
      ev.y1_lb = single_mode_y1_lb(pair.probs_s, pair.probs_d, ev.obs);
      ev.e1_ub = e1_ub_decoy(ev.obs, pair.probs_d, ev.y1_lb, sc.detector.e0).value;
    }
    ev.rate = secure_key_rate(sc.protocol, ev.y1_lb, pair.probs_s.p1, ev.e1_ub, ev.obs.q_s, ev.obs.e_s);
  } catch (const InconsistentObservablesError& e) {
    ev = RateEvaluation{};
    ev.failed = true;
    ev.diagnostic = e.what();
  } catch (const DegenerateSourceError& e) {
    ev = RateEvaluation{};
    ev.failed = true;
    ev.diagnostic = e.what();
  } catch (const ArgumentError& e) {
    ev = RateEvaluation{};
    ev.failed = true;
    ev.diagnostic = e.what();
  }
  return ev;
}

inline RateEvaluation evaluate_rate(const KeyRateScenario& sc, double mu_s, const ChannelParams& ch,
                                    RateModel model) {
  if (!(mu_s > sc.protocol.mu_d)) {
    SourcePair stub;
    stub.mu_s = mu_s;
    stub.mu_d = sc.protocol.mu_d;
    return evaluate_rate(sc, stub, ch, model);
  }
  return evaluate_rate(sc, SourcePair::build(sc, mu_s, model == RateModel::multi_mode), ch, model);
}

namespace detail {

/// Golden-section search for the maximum of `f` on [a, b].
template <typename F>
double golden_section_maximize(F&& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - (b - a) * inv_phi;
  double d = a + (b - a) * inv_phi;
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * inv_phi;
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * inv_phi;
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

}  // namespace detail

struct OptimizationResult {
  double mu_opt = 0.0;
  double rate = 0.0;
  RateEvaluation eval;
  bool all_zero = false;
};

/// Refines the best grid point of `grid_rates` (aligned with the protocol
/// grid) by golden-section search over its neighbouring grid cells.
inline OptimizationResult refine_signal_mu(const KeyRateScenario& sc, const ChannelParams& ch, RateModel model,
                                           const std::vector<double>& grid, const std::vector<double>& grid_rates) {
  detail::require(!grid.empty() && grid.size() == grid_rates.size(), "optimize_signal_mu: empty grid");
  const auto best = static_cast<std::size_t>(std::max_element(grid_rates.begin(), grid_rates.end()) -
                                             grid_rates.begin());
  OptimizationResult out;
  if (!(grid_rates[best] > 0.0)) {
    out.mu_opt = grid.front();
    out.eval = evaluate_rate(sc, out.mu_opt, ch, model);
    out.eval.failed = true;
    out.eval.diagnostic = "no positive rate on the signal grid";
    out.rate = 0.0;
    out.all_zero = true;
    return out;
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  const auto rate_at = [&](double mu) { return evaluate_rate(sc, mu, ch, model).rate; };
  const double mu_ref = detail::golden_section_maximize(rate_at, lo, hi, sc.protocol.refine_tol);
  RateEvaluation ref = evaluate_rate(sc, mu_ref, ch, model);
  if (ref.rate >= grid_rates[best]) {
    out.mu_opt = mu_ref;
    out.eval = std::move(ref);
  } else {
    out.mu_opt = grid[best];
    out.eval = evaluate_rate(sc, grid[best], ch, model);
  }
  out.rate = out.eval.rate;
  return out;
}

/// Signal mean photon number maximizing the key rate at one attenuation.
inline OptimizationResult optimize_signal_mu(const KeyRateScenario& sc, const ChannelParams& ch, RateModel model) {
  sc.protocol.validate();
  const auto grid = sc.protocol.mu_grid();
  std::vector<double> rates;
  rates.reserve(grid.size());
  for (double mu : grid) rates.push_back(evaluate_rate(sc, mu, ch, model).rate);
  return refine_signal_mu(sc, ch, model, grid, rates);
}

struct RatePoint {
  double alpha_db = 0.0;
  double rate_mm = std::numeric_limits<double>::quiet_NaN();
  double rate_sm = std::numeric_limits<double>::quiet_NaN();
  double mu_opt_mm = std::numeric_limits<double>::quiet_NaN();
  double mu_opt_sm = std::numeric_limits<double>::quiet_NaN();
  double y1_lb_s = std::numeric_limits<double>::quiet_NaN();
  double e1_ub_s = std::numeric_limits<double>::quiet_NaN();
  bool yrel_ok = true;  // mode-blind precondition at the baseline optimum
  std::string diagnostic;

  /// rate_mm / rate_sm, NaN when the baseline rate is zero or missing.
  double ratio() const { return rate_sm > 0.0 ? rate_mm / rate_sm : std::numeric_limits<double>::quiet_NaN(); }
};

struct SweepModels {
  bool multi_mode = true;
  bool single_mode = true;
};

/// One rate point per attenuation, each with its own optimized signal mean.
/// Grid evaluations share one source pair across all attenuations.
inline std::vector<RatePoint> sweep_attenuation(const KeyRateScenario& sc, const std::vector<double>& alphas,
                                                SweepModels models = {}) {
  sc.protocol.validate();
  detail::require(std::is_sorted(alphas.begin(), alphas.end()), "sweep_attenuation: alphas must be ascending");
  for (double a : alphas) ChannelParams{a}.validate();
  const auto grid = sc.protocol.mu_grid();
  const std::size_t n_alpha = alphas.size();
  std::vector<std::vector<double>> rates_mm(n_alpha, std::vector<double>(grid.size(), 0.0));
  std::vector<std::vector<double>> rates_sm = rates_mm;

  for (std::size_t g = 0; g < grid.size() && n_alpha > 0; ++g) {
    if (!(grid[g] > sc.protocol.mu_d)) continue;
    const SourcePair pair = SourcePair::build(sc, grid[g], models.multi_mode);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      const ChannelParams ch{alphas[a]};
      if (models.multi_mode) rates_mm[a][g] = evaluate_rate(sc, pair, ch, RateModel::multi_mode).rate;
      if (models.single_mode) rates_sm[a][g] = evaluate_rate(sc, pair, ch, RateModel::single_mode).rate;
    }
  }

  std::vector<RatePoint> out;
  out.reserve(n_alpha);
  for (std::size_t a = 0; a < n_alpha; ++a) {
    const ChannelParams ch{alphas[a]};
    RatePoint pt;
    pt.alpha_db = alphas[a];
    if (models.multi_mode) {
      const auto opt = refine_signal_mu(sc, ch, RateModel::multi_mode, grid, rates_mm[a]);
      pt.rate_mm = opt.rate;
      pt.mu_opt_mm = opt.mu_opt;
      pt.y1_lb_s = opt.eval.y1_lb;
      pt.e1_ub_s = opt.eval.e1_ub;
      if (opt.eval.failed) pt.diagnostic += std::string("mm: ") + opt.eval.diagnostic + "; ";
    }
    if (models.single_mode) {
      const auto opt = refine_signal_mu(sc, ch, RateModel::single_mode, grid, rates_sm[a]);
      pt.rate_sm = opt.rate;
      pt.mu_opt_sm = opt.mu_opt;
      pt.yrel_ok = opt.eval.yrel_ok;
      if (opt.eval.failed) pt.diagnostic += std::string("sm: ") + opt.eval.diagnostic + "; ";
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace mmqkd
