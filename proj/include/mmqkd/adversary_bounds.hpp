#pragma once

// Worst-case yield and error-rate bounds against an eavesdropper who can
// read the spectral mode (and per-mode photon numbers) of every pulse and
// block or corrupt pulses selectively.
//
// Each of the three greedy mappings is a fractional knapsack over items with
// a signal weight and a decoy weight: sort the items by weight ratio, take
// whole items in order, and a fraction of the first item that does not fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmqkd/error.hpp"
#include "mmqkd/pdc_source.hpp"

namespace mmqkd {

/// Gains, QBERs and vacuum yield as measured by Alice and Bob.
struct ChannelObservables {
  double q_s = 0.0;
  double q_d = 0.0;
  double e_s = 0.0;
  double e_d = 0.0;
  double y0 = 0.0;

  void validate() const {
    detail::require(detail::is_probability(q_s) && detail::is_probability(q_d) && detail::is_probability(e_s) &&
                        detail::is_probability(e_d) && detail::is_probability(y0),
                    "observables: gains, QBERs and Y0 must lie in [0, 1]");
  }
};

/// Sorted fractional-knapsack frontier. Items are (cost, gain) pairs ordered
/// by gain/cost descending; zero-cost items come first.
class GreedyFrontier {
 public:
  GreedyFrontier() = default;

  GreedyFrontier(std::span<const double> cost, std::span<const double> gain) {
    detail::require(cost.size() == gain.size(), "greedy frontier: cost and gain lengths differ");
    std::vector<std::size_t> order;
    order.reserve(cost.size());
    for (std::size_t i = 0; i < cost.size(); ++i) {
      if (cost[i] > 0.0 || gain[i] > 0.0) order.push_back(i);
    }
    // Ratio keys make the sort a plain double comparison.
    std::vector<double> key(cost.size());
    for (std::size_t i : order) key[i] = cost[i] > 0.0 ? gain[i] / cost[i] : HUGE_VAL;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });

    cost_.reserve(order.size());
    gain_.reserve(order.size());
    cum_cost_.assign(1, 0.0);
    cum_gain_.assign(1, 0.0);
    long double c = 0.0L;
    long double g = 0.0L;
    for (std::size_t i : order) {
      cost_.push_back(cost[i]);
      gain_.push_back(gain[i]);
      c += cost[i];
      g += gain[i];
      cum_cost_.push_back(static_cast<double>(c));
      cum_gain_.push_back(static_cast<double>(g));
    }
  }

  std::size_t size() const { return cost_.size(); }
  double total_cost() const { return cum_cost_.back(); }
  double total_gain() const { return cum_gain_.back(); }

  /// Largest gain collectable with total cost `budget`.
  double max_gain(double budget) const {
    const auto it = std::upper_bound(cum_cost_.begin(), cum_cost_.end(), budget);
    const std::size_t k = static_cast<std::size_t>(it - cum_cost_.begin());  // items [0, k-1) fit whole
    if (k >= cum_cost_.size()) return total_gain();
    const std::size_t item = k - 1;
    return cum_gain_[item] + (budget - cum_cost_[item]) / cost_[item] * gain_[item];
  }

  /// Smallest cost needed to collect gain `target`.
  double min_cost(double target) const {
    const auto it = std::upper_bound(cum_gain_.begin(), cum_gain_.end(), target);
    const std::size_t k = static_cast<std::size_t>(it - cum_gain_.begin());
    if (k >= cum_gain_.size()) {
      // Trailing zero-gain items are never needed.
      return *(cum_cost_.begin() + (std::lower_bound(cum_gain_.begin(), cum_gain_.end(), total_gain()) -
                                    cum_gain_.begin()));
    }
    const std::size_t item = k - 1;
    return cum_cost_[item] + (target - cum_gain_[item]) / gain_[item] * cost_[item];
  }

 private:
  std::vector<double> cost_;
  std::vector<double> gain_;
  std::vector<double> cum_cost_{0.0};
  std::vector<double> cum_gain_{0.0};
};

namespace detail {

inline void require_same_modes(const ModeOccupation& m_s, const ModeOccupation& m_d, const char* op) {
  require(m_s.size() == m_d.size() && m_s.size() > 0, std::string(op) + ": occupation vectors differ in length");
}

// Items with the largest m_d/m_s ratio are passed first.
inline GreedyFrontier single_photon_blocking(const ModeOccupation& m_s, const ModeOccupation& m_d) {
  return GreedyFrontier(m_s.m, m_d.m);
}

// Errors go to the modes with the largest m_s/m_d ratio.
inline GreedyFrontier single_photon_errors(const ModeOccupation& m_s, const ModeOccupation& m_d) {
  return GreedyFrontier(m_d.m, m_s.m);
}

// The decoy tail rides along at no signal cost; the signal tail is an item
// with no decoy gain.
inline GreedyFrontier multiphoton_blocking(const MultiphotonEnsemble& ens) {
  std::vector<double> cost(ens.hs().begin(), ens.hs().end());
  std::vector<double> gain(ens.hd().begin(), ens.hd().end());
  cost.push_back(0.0);
  gain.push_back(ens.tail_d());
  cost.push_back(ens.tail_s());
  gain.push_back(0.0);
  return GreedyFrontier(cost, gain);
}

}  // namespace detail

/// Lowest signal single-photon yield compatible with decoy yield `y1_d`.
inline double y1_lb_signal_given_decoy(const ModeOccupation& m_s, const ModeOccupation& m_d, double y1_d) {
  detail::require_same_modes(m_s, m_d, "y1_lb_signal_given_decoy");
  detail::require(detail::is_probability(y1_d), "y1_lb_signal_given_decoy: yield must lie in [0, 1]");
  return detail::clamp01(detail::single_photon_blocking(m_s, m_d).min_cost(y1_d));
}

/// Highest decoy multiphoton yield compatible with signal yield `ym_s`.
inline double ym_ub_decoy_given_signal(const MultiphotonEnsemble& ens, double ym_s) {
  detail::require(detail::is_probability(ym_s), "ym_ub_decoy_given_signal: yield must lie in [0, 1]");
  detail::require(ens.size() > 0 || ens.tail_s() > 0.0 || ens.tail_d() > 0.0,
                  "ym_ub_decoy_given_signal: empty ensemble");
  return detail::clamp01(detail::multiphoton_blocking(ens).max_gain(ym_s));
}

/// Highest signal single-photon error rate compatible with decoy rate `e1_d`.
inline double e1_ub_signal(const ModeOccupation& m_s, const ModeOccupation& m_d, double e1_d) {
  detail::require_same_modes(m_s, m_d, "e1_ub_signal");
  detail::require(detail::is_probability(e1_d), "e1_ub_signal: error rate must lie in [0, 1]");
  return detail::clamp01(detail::single_photon_errors(m_s, m_d).max_gain(e1_d));
}

struct IterationOptions {
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  /// Absolute slack before an out-of-range yield counts as inconsistent.
  double slack = 1e-9;
  bool record_trace = false;
};

struct BoundResult {
  double y1_lb_s = 0.0;
  double y1_lb_d = 0.0;
  double ym_ub_s = 1.0;
  double ym_ub_d = 1.0;
  double e1_ub_s = 1.0;
  double e1_ub_d = 1.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Y1_LB^(s) after each cycle, when requested.
  std::vector<double> trace;
};

/// Precomputed greedy frontiers for one signal/decoy source pair.
struct BoundContext {
  PhotonClassProbs probs_s;
  PhotonClassProbs probs_d;
  ModeOccupation m_s;
  ModeOccupation m_d;
  GreedyFrontier step1;
  GreedyFrontier step2;
  GreedyFrontier errors;

  BoundContext(PhotonClassProbs ps, PhotonClassProbs pd, ModeOccupation ms, ModeOccupation md,
               const MultiphotonEnsemble& ens)
      : probs_s(std::move(ps)),
        probs_d(std::move(pd)),
        m_s(std::move(ms)),
        m_d(std::move(md)),
        step1(detail::single_photon_blocking(m_s, m_d)),
        step2(detail::multiphoton_blocking(ens)),
        errors(detail::single_photon_errors(m_s, m_d)) {
    detail::require_same_modes(m_s, m_d, "bound context");
  }
};

/// Iterates the four-step cycle (signal multiphoton UB, decoy multiphoton UB,
/// decoy single-photon LB, signal single-photon LB) from Y1_LB^(s) = 0.
/// Error-rate fields are left at their vacuous values; see e1_ub_decoy.
inline BoundResult iterate_y1_bound(const ChannelObservables& obs, const BoundContext& ctx,
                                    const IterationOptions& opt = {}) {
  obs.validate();
  detail::require(opt.tol > 0.0, "iterate_y1_bound: tol must be positive");
  const PhotonClassProbs& ps = ctx.probs_s;
  const PhotonClassProbs& pd = ctx.probs_d;
  if (!(ps.pm > 0.0) || !(pd.p1 > 0.0)) {
    throw DegenerateSourceError("iterate_y1_bound: need signal multiphoton and decoy single-photon support");
  }

  BoundResult res;
  double y1s = 0.0;
  for (res.iterations = 1; res.iterations <= opt.max_iter; ++res.iterations) {
    const double yms_raw = (obs.q_s - ps.p0 * obs.y0 - ps.p1 * y1s) / ps.pm;
    if (yms_raw < -opt.slack) {
      throw InconsistentObservablesError("signal gain " + std::to_string(obs.q_s) +
                                         " is below what vacuum and certified single photons already explain");
    }
    res.ym_ub_s = detail::clamp01(yms_raw);
    res.ym_ub_d = detail::clamp01(ctx.step2.max_gain(res.ym_ub_s));
    const double y1d_raw = (obs.q_d - pd.p0 * obs.y0 - pd.pm * res.ym_ub_d) / pd.p1;
    if (y1d_raw > 1.0 + opt.slack) {
      throw InconsistentObservablesError("decoy gain " + std::to_string(obs.q_d) +
                                         " requires a single-photon yield above 1");
    }
    res.y1_lb_d = detail::clamp01(y1d_raw);
    const double next = detail::clamp01(ctx.step1.min_cost(res.y1_lb_d));
    const double increment = next - y1s;
    y1s = std::max(y1s, next);
    if (opt.record_trace) res.trace.push_back(y1s);
    if (increment < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, opt.max_iter);
  res.y1_lb_s = y1s;
  return res;
}

inline BoundResult iterate_y1_bound(const ChannelObservables& obs, const PhotonClassProbs& probs_s,
                                    const PhotonClassProbs& probs_d, const ModeOccupation& m_s,
                                    const ModeOccupation& m_d, const MultiphotonEnsemble& ens,
                                    const IterationOptions& opt = {}) {
  return iterate_y1_bound(obs, BoundContext(probs_s, probs_d, m_s, m_d, ens), opt);
}

struct ErrorBound {
  double value = 1.0;
  /// Set when no single-photon yield is certified and the bound is trivial.
  bool vacuous = false;
};

/// Decoy single-photon error-rate bound from the decoy QBER.
inline ErrorBound e1_ub_decoy(const ChannelObservables& obs, const PhotonClassProbs& probs_d, double y1_lb_d,
                              double e0 = 0.5) {
  obs.validate();
  detail::require(detail::is_probability(y1_lb_d) && detail::is_probability(e0),
                  "e1_ub_decoy: yield and e0 must lie in [0, 1]");
  const double denom = probs_d.p1 * y1_lb_d;
  if (!(denom > 0.0)) return ErrorBound{1.0, true};
  const double numer = obs.e_d * obs.q_d - e0 * obs.y0 * probs_d.p0;
  return ErrorBound{detail::clamp01(numer / denom), false};
}

/// Runs the yield iteration and both error-rate bounds.
inline BoundResult compute_bounds(const ChannelObservables& obs, const BoundContext& ctx,
                                  const IterationOptions& opt = {}, double e0 = 0.5) {
  BoundResult res = iterate_y1_bound(obs, ctx, opt);
  res.e1_ub_d = e1_ub_decoy(obs, ctx.probs_d, res.y1_lb_d, e0).value;
  res.e1_ub_s = detail::clamp01(ctx.errors.max_gain(res.e1_ub_d));
  return res;
}

/// Vacuum+weak decoy lower bound on Y1 under mode-blind (single-mode)
/// statistics, using P_0..P_2 of the convolved distributions.
inline double single_mode_y1_lb(const PhotonClassProbs& probs_s, const PhotonClassProbs& probs_d,
                                const ChannelObservables& obs) {
  obs.validate();
  const double p0s = probs_s.at(0), p1s = probs_s.at(1), p2s = probs_s.at(2);
  const double p0d = probs_d.at(0), p1d = probs_d.at(1), p2d = probs_d.at(2);
  const double denom = p2s * p1d - p1s * p2d;
  if (denom == 0.0 || p2s == 0.0) {
    throw ArgumentError("single_mode_y1_lb: signal and decoy one- and two-photon terms are degenerate");
  }
  const double bracket = obs.q_d - (p2d / p2s) * obs.q_s - (p2s * p0d - p0s * p2d) / p2s * obs.y0;
  return detail::clamp01(p2s / denom * bracket);
}

/// Whether Y_M^(d)/Y_M^(s) <= (P2^(d)/PM^(d)) / (P2^(s)/PM^(s)) holds for every
/// non-negative assignment of n-photon yields. That is the case exactly when
/// P_n^(d)/P_2^(d) <= P_n^(s)/P_2^(s) for all n >= 2.
inline bool check_yrel_condition(const PhotonClassProbs& probs_s, const PhotonClassProbs& probs_d) {
  const double p2s = probs_s.at(2);
  const double p2d = probs_d.at(2);
  if (!(p2s > 0.0) || !(p2d > 0.0)) return false;
  const std::size_t cap = std::max(probs_s.pn.size(), probs_d.pn.size());
  for (std::size_t n = 3; n < cap; ++n) {
    const double lhs = probs_d.at(n) * p2s;
    const double rhs = probs_s.at(n) * p2d;
    if (lhs > rhs * (1.0 + 1e-12) + 1e-300) return false;
  }
  return true;
}

}  // namespace mmqkd
