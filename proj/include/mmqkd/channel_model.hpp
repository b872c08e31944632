#pragma once

// Honest channel: fiber loss plus a threshold detector with dark counts and
// a misalignment error. Produces the gains and QBERs Alice and Bob expect
// when nobody interferes.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mmqkd/adversary_bounds.hpp"
#include "mmqkd/error.hpp"
#include "mmqkd/pdc_source.hpp"

namespace mmqkd {

struct DetectorParams {
  double p_dark = 0.0;
  double e_det = 0.0;
  double eta_det = 1.0;
  double e0 = 0.5;  // error rate of a dark count

  void validate() const {
    detail::require(detail::is_probability(p_dark) && detail::is_probability(e_det) &&
                        detail::is_probability(eta_det) && detail::is_probability(e0),
                    "detector: parameters must lie in [0, 1]");
    detail::require(eta_det > 0.0, "detector: eta_det must be positive");
  }

  /// Detector of Gobby, Yuan and Shields (2004).
  static DetectorParams gobby2004() { return DetectorParams{1.7e-6, 0.033, 0.045, 0.5}; }
};

struct ChannelParams {
  double alpha_db = 0.0;

  void validate() const {
    detail::require(std::isfinite(alpha_db) && alpha_db >= 0.0, "channel: attenuation must be >= 0 dB");
  }
};

/// Single-photon transmission times detector efficiency.
inline double detection_prob(const ChannelParams& ch, const DetectorParams& det) {
  ch.validate();
  det.validate();
  return std::pow(10.0, -ch.alpha_db / 10.0) * det.eta_det;
}

namespace detail {

// Probability that at least one of n photons is detected.
inline double eta_n(double eta, long n) { return -std::expm1(static_cast<double>(n) * std::log1p(-eta)); }

inline void require_eta(double eta, long n) {
  require(is_probability(eta), "channel: detection probability must lie in [0, 1]");
  require(n >= 0, "channel: photon number must be >= 0");
}

}  // namespace detail

/// Y_n ~ eta_n + p_dark, without the eta_n * p_dark cross term.
inline double yield_n(double eta, const DetectorParams& det, long n) {
  detail::require_eta(eta, n);
  if (n > 0 && eta == 1.0) return 1.0;
  return std::min(1.0, detail::eta_n(eta, n) + det.p_dark);
}

inline double error_n(double eta, const DetectorParams& det, long n) {
  const double y = yield_n(eta, det, n);
  if (!(y > 0.0)) throw DegenerateSourceError("error_n: zero yield");
  const double eta_n = (n > 0 && eta == 1.0) ? 1.0 : detail::eta_n(eta, n);
  return detail::clamp01((det.e_det * eta_n + det.e0 * det.p_dark) / y);
}

struct GainQber {
  double q = 0.0;
  double e = 0.0;
};

/// Expected gain and QBER of one state. Mass beyond the truncation counts
/// as a click in the gain.
inline GainQber expected_statistics(const PhotonClassProbs& probs, const ChannelParams& ch,
                                    const DetectorParams& det) {
  detail::require(probs.tail < 1e-9, "expected_statistics: distribution tail must be below 1e-9");
  const double eta = detection_prob(ch, det);
  long double q = 0.0L;
  long double qe = 0.0L;
  for (std::size_t n = 0; n < probs.pn.size(); ++n) {
    const long nn = static_cast<long>(n);
    const double y = yield_n(eta, det, nn);
    q += static_cast<long double>(y) * probs.pn[n];
    if (y > 0.0) qe += static_cast<long double>(error_n(eta, det, nn)) * y * probs.pn[n];
  }
  q += probs.tail;
  if (!(q > 0.0L)) throw DegenerateSourceError("expected_statistics: zero gain");
  return GainQber{static_cast<double>(q), static_cast<double>(qe / q)};
}

/// Signal and decoy observables for the honest channel.
inline ChannelObservables honest_observables(const PhotonClassProbs& probs_s, const PhotonClassProbs& probs_d,
                                             const ChannelParams& ch, const DetectorParams& det) {
  const GainQber s = expected_statistics(probs_s, ch, det);
  const GainQber d = expected_statistics(probs_d, ch, det);
  return ChannelObservables{s.q, d.q, s.e, d.e, yield_n(detection_prob(ch, det), det, 0)};
}

}  // namespace mmqkd
