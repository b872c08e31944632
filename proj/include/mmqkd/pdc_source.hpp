#pragma once

// Photon statistics of a multi-mode parametric down-conversion source after
// the idler arm has been traced out. Every spectral mode k carries an
// independent thermal distribution with squeezing r_k = s * lambda_k, where
// lambda_k are the Schmidt weights and s is a common scale set by the pump.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmqkd/error.hpp"

namespace mmqkd {

/// Photon-number distribution of one thermal mode, sech^2(r) tanh^(2n)(r).
inline double thermal_pmf(double r, long n) {
  detail::require(r >= 0.0, "thermal_pmf: squeezing parameter must be >= 0");
  detail::require(n >= 0, "thermal_pmf: photon number must be >= 0");
  const double t = std::tanh(r);
  const double sech2 = 1.0 / (std::cosh(r) * std::cosh(r));
  return sech2 * std::pow(t * t, static_cast<double>(n));
}

/// Schmidt weights of the source, sorted descending and normalized so that
/// sum(lambda^2) = 1.
class ModeWeights {
 public:
  /// Relative deviation of the raw squared norm from 1 accepted by the
  /// checked constructor.
  static constexpr double kNormTolerance = 0.05;

  /// Validating constructor for user-supplied weights (e.g. table rows with
  /// rounding error). Rejects raw norms more than 5% away from 1.
  explicit ModeWeights(std::vector<double> raw) : ModeWeights(std::move(raw), true) {}

  /// Normalizes any positive weight vector without the norm gate.
  static ModeWeights normalized(std::vector<double> raw) { return ModeWeights(std::move(raw), false); }

  std::span<const double> values() const { return lambda_; }
  std::size_t size() const { return lambda_.size(); }
  double operator[](std::size_t k) const { return lambda_[k]; }
  /// sum(lambda^2) of the input before renormalization.
  double raw_norm_squared() const { return raw_norm2_; }

 private:
  ModeWeights(std::vector<double> raw, bool gate) : lambda_(std::move(raw)) {
    detail::require(!lambda_.empty(), "mode weights: need at least one mode");
    for (double v : lambda_) {
      detail::require(std::isfinite(v) && v > 0.0, "mode weights: every lambda_k must be positive");
    }
    std::stable_sort(lambda_.begin(), lambda_.end(), std::greater<>());
    raw_norm2_ = 0.0;
    for (double v : lambda_) raw_norm2_ += v * v;
    if (gate && std::abs(raw_norm2_ - 1.0) > kNormTolerance) {
      throw ArgumentError("mode weights: sum(lambda^2) = " + std::to_string(raw_norm2_) +
                          " deviates from 1 by more than 5%");
    }
    const double norm = std::sqrt(raw_norm2_);
    for (double& v : lambda_) v /= norm;
  }

  std::vector<double> lambda_;
  double raw_norm2_ = 0.0;
};

/// Per-mode squeezing parameters for one pump intensity.
class SourceState {
 public:
  SourceState(const ModeWeights& weights, double scale) : scale_(scale) {
    detail::require(std::isfinite(scale) && scale >= 0.0, "source state: scale must be finite and >= 0");
    r_.reserve(weights.size());
    tanh2_.reserve(weights.size());
    for (double l : weights.values()) {
      const double r = scale * l;
      const double t = std::tanh(r);
      r_.push_back(r);
      tanh2_.push_back(t * t);
    }
  }

  std::span<const double> squeezing() const { return r_; }
  /// tanh^2(r_k), the geometric ratio of mode k's photon-number distribution.
  std::span<const double> tanh2() const { return tanh2_; }
  std::size_t size() const { return r_.size(); }
  double scale() const { return scale_; }

  /// p(k, n) for mode k.
  double pmf(std::size_t k, long n) const { return (1.0 - tanh2_[k]) * std::pow(tanh2_[k], static_cast<double>(n)); }

 private:
  double scale_;
  std::vector<double> r_;
  std::vector<double> tanh2_;
};

/// Mean total photon number, sum_k sinh^2(r_k).
inline double mean_photon_number(const SourceState& state) {
  double mean = 0.0;
  for (double r : state.squeezing()) {
    const double s = std::sinh(r);
    mean += s * s;
  }
  return mean;
}

/// Finds the pump scale whose state has mean photon number `mu`.
inline SourceState solve_squeezing(const ModeWeights& weights, double mu) {
  detail::require(std::isfinite(mu) && mu >= 0.0, "solve_squeezing: mean photon number must be >= 0");
  if (mu == 0.0) return SourceState(weights, 0.0);
  const auto mean_at = [&](double s) { return mean_photon_number(SourceState(weights, s)); };
  double lo = 0.0;
  double hi = 1.0;
  while (mean_at(hi) < mu) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw ResourceError("solve_squeezing: mean photon number out of reach");
  }
  // Bisect until the bracket collapses to machine precision.
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) < mu ? lo : hi) = mid;
  }
  const double s_lo = mean_at(lo);
  const double s_hi = mean_at(hi);
  return SourceState(weights, (mu - s_lo <= s_hi - mu) ? lo : hi);
}

/// Vacuum, single- and multi-photon probabilities plus the convolved
/// total photon-number distribution P_n, n = 0..pn.size()-1.
struct PhotonClassProbs {
  double p0 = 1.0;
  double p1 = 0.0;
  double pm = 0.0;
  std::vector<double> pn;
  double tail = 0.0;

  double at(std::size_t n) const { return n < pn.size() ? pn[n] : 0.0; }

  /// Wraps an explicit distribution (e.g. a Poissonian reference). Entries
  /// must be non-negative and sum to at most 1; the deficit becomes the tail.
  static PhotonClassProbs from_distribution(std::vector<double> dist) {
    detail::require(dist.size() >= 3, "distribution: need entries for n = 0, 1, 2");
    long double sum = 0.0L;
    for (double v : dist) {
      detail::require(std::isfinite(v) && v >= 0.0, "distribution: entries must be non-negative");
      sum += v;
    }
    detail::require(sum <= 1.0L + 1e-12L, "distribution: total mass exceeds 1");
    PhotonClassProbs out;
    out.p0 = dist[0];
    out.p1 = dist[1];
    out.pm = 1.0 - out.p0 - out.p1;
    out.tail = std::max(0.0, static_cast<double>(1.0L - sum));
    out.pn = std::move(dist);
    return out;
  }
};

struct DistributionOptions {
  double eps = 1e-10;    // tail mass target
  std::size_t n_cap = 16;  // initial truncation, raised as needed
  std::size_t hard_limit = 10000;
};

namespace detail {

// P_n for n <= cap; exact for every retained entry.
inline std::vector<double> convolve_modes(const SourceState& state, std::size_t cap) {
  std::vector<double> acc(cap + 1, 0.0);
  acc[0] = 1.0;
  std::vector<double> mode(cap + 1);
  std::vector<double> next(cap + 1);
  for (std::size_t k = 0; k < state.size(); ++k) {
    const double t = state.tanh2()[k];
    double p = 1.0 - t;
    for (std::size_t n = 0; n <= cap; ++n) {
      mode[n] = p;
      p *= t;
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i <= cap; ++i) {
      if (acc[i] == 0.0) continue;
      for (std::size_t j = 0; i + j <= cap; ++j) next[i + j] += acc[i] * mode[j];
    }
    acc.swap(next);
  }
  return acc;
}

}  // namespace detail

inline PhotonClassProbs class_probabilities(const SourceState& state, const DistributionOptions& opt = {}) {
  detail::require(opt.n_cap >= 2, "class_probabilities: n_cap must be >= 2");
  detail::require(opt.eps > 0.0, "class_probabilities: eps must be positive");
  PhotonClassProbs out;
  const std::size_t n_modes = state.size();

  out.p0 = 1.0;
  for (std::size_t k = 0; k < n_modes; ++k) out.p0 *= state.pmf(k, 0);
  out.p1 = 0.0;
  for (std::size_t k = 0; k < n_modes; ++k) {
    double term = state.pmf(k, 1);
    for (std::size_t i = 0; i < n_modes; ++i) {
      if (i != k) term *= state.pmf(i, 0);
    }
    out.p1 += term;
  }
  out.pm = 1.0 - out.p0 - out.p1;

  for (std::size_t cap = opt.n_cap;; cap *= 2) {
    cap = std::min(cap, opt.hard_limit);
    auto pn = detail::convolve_modes(state, cap);
    long double sum = 0.0L;
    for (double v : pn) sum += v;
    const double tail = std::max(0.0, static_cast<double>(1.0L - sum));
    if (tail < opt.eps) {
      out.pn = std::move(pn);
      out.tail = tail;
      return out;
    }
    if (cap >= opt.hard_limit) {
      throw ResourceError("class_probabilities: tail " + std::to_string(tail) + " above eps at the hard cap of " +
                          std::to_string(opt.hard_limit) + " photons");
    }
  }
}

/// Probabilities m_k that a single emitted photon sits in mode k.
struct ModeOccupation {
  std::vector<double> m;
  std::size_t size() const { return m.size(); }
};

inline ModeOccupation mode_occupations(const SourceState& state) {
  const std::size_t n_modes = state.size();
  std::vector<double> terms(n_modes);
  double p1 = 0.0;
  for (std::size_t k = 0; k < n_modes; ++k) {
    double term = state.pmf(k, 1);
    for (std::size_t i = 0; i < n_modes; ++i) {
      if (i != k) term *= state.pmf(i, 0);
    }
    terms[k] = term;
    p1 += term;
  }
  if (!(p1 > 0.0)) throw DegenerateSourceError("mode_occupations: source emits no single photons");
  for (double& t : terms) t /= p1;
  return ModeOccupation{std::move(terms)};
}

/// Multiphoton events l (sum l_k >= 2) with their conditional probabilities
/// h_l under signal and decoy, plus the mass left un-enumerated.
class MultiphotonEnsemble {
 public:
  struct Event {
    std::span<const std::uint16_t> occupation;
    double hs;
    double hd;
  };

  MultiphotonEnsemble() = default;

  /// Direct construction from conditional probabilities; used for synthetic
  /// instances. Occupations are left empty.
  static MultiphotonEnsemble from_probabilities(std::vector<double> hs, std::vector<double> hd, double tail_s,
                                                double tail_d) {
    detail::require(hs.size() == hd.size(), "ensemble: hs and hd must have equal length");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      detail::require(detail::is_probability(hs[i]) && detail::is_probability(hd[i]),
                      "ensemble: event probabilities must lie in [0, 1]");
    }
    detail::require(detail::is_probability(tail_s) && detail::is_probability(tail_d),
                    "ensemble: tails must lie in [0, 1]");
    MultiphotonEnsemble out;
    out.hs_ = std::move(hs);
    out.hd_ = std::move(hd);
    out.tail_s_ = tail_s;
    out.tail_d_ = tail_d;
    return out;
  }

  std::size_t size() const { return hs_.size(); }
  std::size_t modes() const { return modes_; }
  std::span<const double> hs() const { return hs_; }
  std::span<const double> hd() const { return hd_; }
  double tail_s() const { return tail_s_; }
  double tail_d() const { return tail_d_; }

  Event event(std::size_t i) const {
    std::span<const std::uint16_t> occ;
    if (!occupations_.empty()) occ = std::span<const std::uint16_t>(occupations_).subspan(i * modes_, modes_);
    return Event{occ, hs_[i], hd_[i]};
  }

 private:
  friend MultiphotonEnsemble enumerate_multiphoton(const SourceState&, const SourceState&, double, std::size_t);

  std::size_t modes_ = 0;
  std::vector<std::uint16_t> occupations_;
  std::vector<double> hs_;
  std::vector<double> hd_;
  double tail_s_ = 0.0;
  double tail_d_ = 0.0;
};

inline constexpr std::size_t kDefaultEventBudget = 10'000'000;

/// Depth-first enumeration of multiphoton occupation vectors. A partial
/// assignment is dropped when the conditional mass of its whole subtree is
/// below `eps_enum` under both signal and decoy.
inline MultiphotonEnsemble enumerate_multiphoton(const SourceState& signal, const SourceState& decoy,
                                                 double eps_enum = 1e-12,
                                                 std::size_t event_budget = kDefaultEventBudget) {
  detail::require(signal.size() == decoy.size(), "enumerate_multiphoton: signal and decoy mode counts differ");
  detail::require(eps_enum > 0.0, "enumerate_multiphoton: eps_enum must be positive");
  const auto pm_of = [](const SourceState& st) {
    double p0 = 1.0;
    double sum_t = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) {
      p0 *= st.pmf(k, 0);
      sum_t += st.tanh2()[k];
    }
    // P1 = P0 * sum_k tanh^2 r_k for thermal modes.
    return 1.0 - p0 - p0 * sum_t;
  };
  const double pm_s = pm_of(signal);
  const double pm_d = pm_of(decoy);
  if (!(pm_s > 0.0) || !(pm_d > 0.0)) {
    throw DegenerateSourceError("enumerate_multiphoton: both states need multiphoton support");
  }

  const std::size_t n_modes = signal.size();
  MultiphotonEnsemble out;
  out.modes_ = n_modes;
  std::vector<std::uint16_t> current(n_modes, 0);
  long double sum_s = 0.0L;
  long double sum_d = 0.0L;

  // Subtree mass with modes [0, k) fixed is the running product, since the
  // remaining modes each sum to one.
  const auto visit = [&](auto&& self, std::size_t k, double mass_s, double mass_d, unsigned photons) -> void {
    if (k == n_modes) {
      if (photons < 2) return;
      if (out.hs_.size() >= event_budget) {
        throw ResourceError("enumerate_multiphoton: event budget of " + std::to_string(event_budget) +
                            " exceeded; increase eps_enum");
      }
      const double hs = mass_s / pm_s;
      const double hd = mass_d / pm_d;
      out.occupations_.insert(out.occupations_.end(), current.begin(), current.end());
      out.hs_.push_back(hs);
      out.hd_.push_back(hd);
      sum_s += hs;
      sum_d += hd;
      return;
    }
    const double ts = signal.tanh2()[k];
    const double td = decoy.tanh2()[k];
    double ms = mass_s * (1.0 - ts);
    double md = mass_d * (1.0 - td);
    for (std::uint16_t n = 0;; ++n) {
      if (ms / pm_s < eps_enum && md / pm_d < eps_enum) break;
      if (n == UINT16_MAX) throw ResourceError("enumerate_multiphoton: occupation overflow");
      current[k] = n;
      self(self, k + 1, ms, md, photons + n);
      ms *= ts;
      md *= td;
    }
    current[k] = 0;
  };
  visit(visit, 0, 1.0, 1.0, 0);

  out.tail_s_ = std::max(0.0, static_cast<double>(1.0L - sum_s));
  out.tail_d_ = std::max(0.0, static_cast<double>(1.0L - sum_d));
  return out;
}

struct DistributionMoments {
  double mean = 0.0;
  double g2 = 0.0;
};

/// Mean and second-order correlation g2 = <n(n-1)> / <n>^2 of P_n.
inline DistributionMoments distribution_moments(const PhotonClassProbs& probs) {
  long double mean = 0.0L;
  long double factorial2 = 0.0L;
  for (std::size_t n = 0; n < probs.pn.size(); ++n) {
    const long double nn = static_cast<long double>(n);
    mean += nn * probs.pn[n];
    factorial2 += nn * (nn - 1.0L) * probs.pn[n];
  }
  if (!(mean > 0.0L)) throw DegenerateSourceError("distribution_moments: zero mean photon number");
  return DistributionMoments{static_cast<double>(mean), static_cast<double>(factorial2 / (mean * mean))};
}

/// Poisson distribution with mean `mu`, truncated once the tail is below eps.
inline PhotonClassProbs poisson_distribution(double mu, double eps = 1e-10) {
  detail::require(std::isfinite(mu) && mu >= 0.0, "poisson_distribution: mean must be >= 0");
  std::vector<double> pn;
  double p = std::exp(-mu);
  long double sum = 0.0L;
  for (std::size_t n = 0; n < 10000; ++n) {
    pn.push_back(p);
    sum += p;
    if (pn.size() >= 3 && 1.0L - sum < eps) break;
    p *= mu / static_cast<double>(n + 1);
  }
  return PhotonClassProbs::from_distribution(std::move(pn));
}

/// Mean photon number at which mode 0 holds single-photon occupation `m0`.
/// m_0 falls from lambda_0^2 / sum(lambda^2) at zero intensity towards
/// 1/N at saturation, so targets outside that range are rejected.
inline double mean_for_leading_occupation(const ModeWeights& weights, double m0) {
  detail::require(weights.size() >= 2, "mean_for_leading_occupation: need at least two modes");
  const auto occ_at = [&](double s) { return mode_occupations(SourceState(weights, s)).m[0]; };
  double lo = 1e-6;
  double hi = 1.0;
  detail::require(m0 < occ_at(lo), "mean_for_leading_occupation: target above the low-intensity limit");
  while (occ_at(hi) > m0) {
    lo = hi;
    hi *= 2.0;
    detail::require(hi < 50.0, "mean_for_leading_occupation: target below the saturation limit");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (occ_at(mid) > m0 ? lo : hi) = mid;
  }
  return mean_photon_number(SourceState(weights, 0.5 * (lo + hi)));
}

}  // namespace mmqkd
