#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmqkd/adversary_bounds.hpp"
#include "mmqkd/channel_model.hpp"
#include "mmqkd/cli/scenario.hpp"
#include "mmqkd/keyrate.hpp"
#include "mmqkd/pdc_source.hpp"

namespace mmqkd::cli {

/// Shortest-safe CSV number: 17 significant digits, '.' separator.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kSweepHeader = "alpha_db,rate_mm,rate_sm,mu_opt_mm,mu_opt_sm,y1_lb_s,e1_ub_s,ratio_mm_sm";

inline void write_sweep_csv(std::ostream& out, const std::vector<RatePoint>& points) {
  out << kSweepHeader << '\n';
  for (const auto& p : points) {
    out << format_number(p.alpha_db) << ',' << format_number(p.rate_mm) << ',' << format_number(p.rate_sm) << ','
        << format_number(p.mu_opt_mm) << ',' << format_number(p.mu_opt_sm) << ',' << format_number(p.y1_lb_s)
        << ',' << format_number(p.e1_ub_s) << ',' << format_number(p.ratio()) << '\n';
  }
}

/// Sweeps the scenario's attenuation grid and writes one CSV row per point.
/// Diagnostics (failed points, violated mode-blind precondition) go to `log`.
inline std::vector<RatePoint> cmd_sweep(const Scenario& sc, SweepModels models, std::ostream& out,
                                        std::ostream* log = nullptr) {
  const auto points = sweep_attenuation(sc.key_rate_scenario(), sc.alphas, models);
  write_sweep_csv(out, points);
  if (log != nullptr) {
    for (const auto& p : points) {
      if (!p.diagnostic.empty()) *log << "alpha " << p.alpha_db << " dB: " << p.diagnostic << '\n';
      if (models.single_mode && !p.yrel_ok) {
        *log << "alpha " << p.alpha_db << " dB: mode-blind yield-ratio precondition fails; baseline rate is flagged\n";
      }
    }
  }
  return points;
}

struct BoundsReport {
  ChannelObservables obs;
  BoundResult mm;
  double y1_lb_sm = 0.0;
  double e1_ub_sm = 1.0;
  bool yrel_ok = true;
};

/// Bounds at one (attenuation, signal mean). Observables come from the
/// honest channel unless `observed` is given.
inline BoundsReport cmd_bounds(const Scenario& sc, double alpha_db, double mu_s, std::ostream& out,
                               const std::optional<ChannelObservables>& observed = std::nullopt) {
  const KeyRateScenario krs = sc.key_rate_scenario();
  const ChannelParams ch{alpha_db};
  ch.validate();
  const SourcePair pair = SourcePair::build(krs, mu_s, true);

  BoundsReport rep;
  rep.obs = observed ? *observed : honest_observables(pair.probs_s, pair.probs_d, ch, sc.detector);
  rep.mm = compute_bounds(rep.obs, *pair.context, sc.numerics.iter, sc.detector.e0);
  rep.yrel_ok = check_yrel_condition(pair.probs_s, pair.probs_d);
  try {
    rep.y1_lb_sm = single_mode_y1_lb(pair.probs_s, pair.probs_d, rep.obs);
    rep.e1_ub_sm = e1_ub_decoy(rep.obs, pair.probs_d, rep.y1_lb_sm, sc.detector.e0).value;
  } catch (const ArgumentError&) {
    rep.y1_lb_sm = std::nan("");
    rep.e1_ub_sm = std::nan("");
  }

  const auto row = [&](const char* key, double v) { out << key << ',' << format_number(v) << '\n'; };
  out << "quantity,value\n";
  row("alpha_db", alpha_db);
  row("mu_s", mu_s);
  row("mu_d", pair.mu_d);
  row("q_s", rep.obs.q_s);
  row("q_d", rep.obs.q_d);
  row("e_s", rep.obs.e_s);
  row("e_d", rep.obs.e_d);
  row("y0", rep.obs.y0);
  row("y1_lb_s", rep.mm.y1_lb_s);
  row("y1_lb_d", rep.mm.y1_lb_d);
  row("ym_ub_s", rep.mm.ym_ub_s);
  row("ym_ub_d", rep.mm.ym_ub_d);
  row("e1_ub_d", rep.mm.e1_ub_d);
  row("e1_ub_s", rep.mm.e1_ub_s);
  out << "iterations," << rep.mm.iterations << '\n';
  out << "converged," << (rep.mm.converged ? 1 : 0) << '\n';
  row("y1_lb_sm", rep.y1_lb_sm);
  row("e1_ub_sm", rep.e1_ub_sm);
  out << "yrel_ok," << (rep.yrel_ok ? 1 : 0) << '\n';
  return rep;
}

/// Photon-number distribution at mean `mu` with a mean/g2 footer.
inline PhotonClassProbs cmd_dist(const Scenario& sc, double mu, bool poisson_reference, std::ostream& out) {
  const SourceState state = solve_squeezing(sc.weights(), mu);
  PhotonClassProbs probs = class_probabilities(state, sc.numerics.dist);
  std::optional<PhotonClassProbs> ref;
  if (poisson_reference) ref = poisson_distribution(mu, sc.numerics.dist.eps);

  std::size_t rows = probs.pn.size();
  if (ref) rows = std::max(rows, ref->pn.size());
  out << "n,P_n" << (ref ? ",P_poisson" : "") << '\n';
  for (std::size_t n = 0; n < rows; ++n) {
    out << n << ',' << format_number(probs.at(n));
    if (ref) out << ',' << format_number(ref->at(n));
    out << '\n';
  }
  double mean = 0.0;
  double g2 = std::nan("");
  try {
    const auto m = distribution_moments(probs);
    mean = m.mean;
    g2 = m.g2;
  } catch (const DegenerateSourceError&) {
  }
  out << "mean,g2\n" << format_number(mean) << ',' << format_number(g2) << '\n';
  return probs;
}

}  // namespace mmqkd::cli
