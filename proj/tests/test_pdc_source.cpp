#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mmqkd/cli/scenario.hpp"
#include "mmqkd/pdc_source.hpp"
#include "oracles.hpp"

namespace mmqkd {
namespace {

ModeWeights preset(const char* id) { return ModeWeights(cli::source_presets().at(id)); }

TEST(ThermalPmf, VacuumState) {
  EXPECT_DOUBLE_EQ(thermal_pmf(0.0, 0), 1.0);
  EXPECT_DOUBLE_EQ(thermal_pmf(0.0, 3), 0.0);
}

TEST(ThermalPmf, HalfTanhSquaredIsGeometric) {
  const double r = std::atanh(std::sqrt(0.5));
  for (long n = 0; n < 10; ++n) EXPECT_NEAR(thermal_pmf(r, n), std::pow(0.5, n + 1), 1e-15);
}

TEST(ThermalPmf, SumsToOne) {
  for (double r : {0.1, 0.5, 1.0, 1.5, 2.0}) {
    double sum = 0.0;
    for (long n = 0; n <= 200; ++n) sum += thermal_pmf(r, n);
    // At r = 2 the remainder tanh^2(r)^201 is ~4e-7.
    const double t = std::tanh(r) * std::tanh(r);
    EXPECT_NEAR(sum, 1.0 - std::pow(t, 201), 1e-10) << "r = " << r;
    if (r <= 1.5) {
      EXPECT_NEAR(sum, 1.0, 1e-10);
    }
  }
}

TEST(ThermalPmf, RejectsNegativeArguments) {
  EXPECT_THROW(thermal_pmf(-0.1, 0), ArgumentError);
  EXPECT_THROW(thermal_pmf(0.1, -1), ArgumentError);
}

TEST(ModeWeights, SortsAndNormalizes) {
  const ModeWeights w({0.6, 0.8001});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_GT(w[0], w[1]);
  EXPECT_NEAR(w[0] * w[0] + w[1] * w[1], 1.0, 1e-15);
}

TEST(ModeWeights, RejectsBadNorm) {
  EXPECT_THROW(ModeWeights({0.5, 0.5}), ArgumentError);  // sum of squares 0.5
  EXPECT_THROW(ModeWeights({1.1, 0.3}), ArgumentError);
  EXPECT_THROW(ModeWeights({1.0, 0.0}), ArgumentError);
  EXPECT_THROW(ModeWeights(std::vector<double>{}), ArgumentError);
  EXPECT_NO_THROW(ModeWeights::normalized({0.5, 0.5}));
}

TEST(ModeWeights, TablePresetsPassTheNormGate) {
  for (const char* id : {"sigma-1nm", "sigma-2nm", "sigma-4nm", "sigma-8nm"}) {
    const ModeWeights w = preset(id);
    EXPECT_NEAR(w.raw_norm_squared(), 1.0, 1e-2) << id;
    double s = 0.0;
    for (double l : w.values()) s += l * l;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SolveSqueezing, SingleMode) {
  const ModeWeights w({1.0});
  EXPECT_EQ(solve_squeezing(w, 0.0).squeezing()[0], 0.0);
  for (double mu : {0.1, 0.6, 1.0, 2.0}) {
    EXPECT_NEAR(solve_squeezing(w, mu).squeezing()[0], std::asinh(std::sqrt(mu)), 1e-12);
  }
}

TEST(SolveSqueezing, TablePresetHitsTarget) {
  const SourceState st = solve_squeezing(preset("sigma-4nm"), 0.6);
  double mean = 0.0;
  for (double r : st.squeezing()) mean += std::sinh(r) * std::sinh(r);
  EXPECT_NEAR(mean, 0.6, 1e-10);
  // One common scale.
  const ModeWeights w = preset("sigma-4nm");
  for (std::size_t k = 1; k < w.size(); ++k) {
    EXPECT_NEAR(st.squeezing()[k] / st.squeezing()[0], w[k] / w[0], 1e-12);
  }
}

TEST(SolveSqueezing, RoundTripsMeanPhotonNumber) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mu_dist(0.0, 2.0);
  for (const char* id : {"sigma-1nm", "sigma-8nm", "two-mode", "single-mode"}) {
    const ModeWeights w = preset(id);
    for (int i = 0; i < 25; ++i) {
      const double mu = mu_dist(rng);
      EXPECT_NEAR(mean_photon_number(solve_squeezing(w, mu)), mu, 1e-8) << id << " mu = " << mu;
    }
  }
  EXPECT_THROW(solve_squeezing(preset("sigma-1nm"), -0.1), ArgumentError);
}

TEST(MeanPhotonNumber, Basics) {
  const ModeWeights w({1.0});
  EXPECT_EQ(mean_photon_number(SourceState(w, 0.0)), 0.0);
  EXPECT_NEAR(mean_photon_number(SourceState(w, std::asinh(1.0))), 1.0, 1e-14);
}

TEST(ClassProbabilities, SingleModeMatchesThermal) {
  const ModeWeights w({1.0});
  const SourceState st = solve_squeezing(w, 0.6);
  const PhotonClassProbs p = class_probabilities(st);
  const double r = st.squeezing()[0];
  for (std::size_t n = 0; n < p.pn.size(); ++n) EXPECT_NEAR(p.pn[n], thermal_pmf(r, static_cast<long>(n)), 1e-15);
  EXPECT_LT(p.tail, 1e-10);
}

TEST(ClassProbabilities, VacuumSource) {
  const PhotonClassProbs p = class_probabilities(SourceState(preset("sigma-4nm"), 0.0));
  EXPECT_EQ(p.p0, 1.0);
  EXPECT_EQ(p.p1, 0.0);
  EXPECT_EQ(p.pm, 0.0);
}

TEST(ClassProbabilities, ConvolutionAgreesWithClassFormulas) {
  for (const char* id : {"sigma-1nm", "sigma-2nm", "sigma-4nm", "sigma-8nm"}) {
    for (double mu : {0.1, 0.6, 1.5}) {
      const PhotonClassProbs p = class_probabilities(solve_squeezing(preset(id), mu));
      EXPECT_NEAR(p.pn[0], p.p0, 1e-12);
      EXPECT_NEAR(p.pn[1], p.p1, 1e-12);
      EXPECT_NEAR(p.p0 + p.p1 + p.pm, 1.0, 1e-12);
      double sum = p.tail;
      for (double v : p.pn) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_LT(p.tail, 1e-10);
    }
  }
}

TEST(ClassProbabilities, RaisesCapAndReportsResourceLimit) {
  const SourceState hot = solve_squeezing(ModeWeights({1.0}), 30.0);
  DistributionOptions opt;
  opt.n_cap = 2;
  const PhotonClassProbs p = class_probabilities(hot, opt);
  EXPECT_GT(p.pn.size(), 100u);
  EXPECT_LT(p.tail, opt.eps);

  opt.hard_limit = 64;
  EXPECT_THROW(class_probabilities(hot, opt), ResourceError);
  opt.n_cap = 1;
  EXPECT_THROW(class_probabilities(hot, opt), ArgumentError);
}

TEST(ModeOccupations, PaperTwoModeRatio) {
  // tanh^2 r1 : tanh^2 r2 = 7 : 3
  const double r1 = std::atanh(std::sqrt(0.35));
  const double r2 = std::atanh(std::sqrt(0.15));
  const double norm = std::hypot(r1, r2);
  const SourceState st(ModeWeights::normalized({r1, r2}), norm);
  const ModeOccupation m = mode_occupations(st);
  EXPECT_NEAR(m.m[0], 0.7, 1e-12);
  EXPECT_NEAR(m.m[1], 0.3, 1e-12);
}

TEST(ModeOccupations, SingleModeAndDegenerate) {
  const ModeOccupation m = mode_occupations(solve_squeezing(ModeWeights({1.0}), 0.3));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.m[0], 1.0);
  EXPECT_THROW(mode_occupations(SourceState(preset("sigma-2nm"), 0.0)), DegenerateSourceError);
}

TEST(ModeOccupations, MatchesBruteForceFromRawPmfs) {
  for (const char* id : {"sigma-1nm", "sigma-4nm", "sigma-8nm"}) {
    for (double mu : {0.05, 0.6, 1.4}) {
      const SourceState st = solve_squeezing(preset(id), mu);
      const ModeOccupation m = mode_occupations(st);
      const auto r = st.squeezing();
      std::vector<double> raw(r.size());
      double p1 = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        raw[k] = thermal_pmf(r[k], 1);
        for (std::size_t i = 0; i < r.size(); ++i) {
          if (i != k) raw[k] *= thermal_pmf(r[i], 0);
        }
        p1 += raw[k];
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        EXPECT_NEAR(m.m[k], raw[k] / p1, 1e-12);
        // Thermal closed form.
        const double t = std::tanh(r[k]);
        double tsum = 0.0;
        for (double rr : r) tsum += std::tanh(rr) * std::tanh(rr);
        EXPECT_NEAR(m.m[k], t * t / tsum, 1e-12);
        sum += m.m[k];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(MeanForLeadingOccupation, TwoModeDemo) {
  const ModeWeights w({std::sqrt(0.75), std::sqrt(0.25)});
  const double mu_d = mean_for_leading_occupation(w, 0.7);
  const double mu_s = mean_for_leading_occupation(w, 0.6);
  EXPECT_LT(mu_d, mu_s);
  EXPECT_NEAR(mode_occupations(solve_squeezing(w, mu_d)).m[0], 0.7, 1e-9);
  EXPECT_NEAR(mode_occupations(solve_squeezing(w, mu_s)).m[0], 0.6, 1e-9);
  EXPECT_THROW(mean_for_leading_occupation(w, 0.8), ArgumentError);
}

TEST(EnumerateMultiphoton, SingleModeEventsAreThermalTail) {
  const ModeWeights w({1.0});
  const SourceState sig = solve_squeezing(w, 0.6);
  const SourceState dec = solve_squeezing(w, 0.1);
  const auto ens = enumerate_multiphoton(sig, dec, 1e-14);
  const PhotonClassProbs ps = class_probabilities(sig);
  ASSERT_GT(ens.size(), 10u);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto ev = ens.event(i);
    ASSERT_EQ(ev.occupation.size(), 1u);
    EXPECT_EQ(ev.occupation[0], i + 2);
    EXPECT_NEAR(ev.hs, thermal_pmf(sig.squeezing()[0], static_cast<long>(i + 2)) / ps.pm, 1e-13);
  }
}

TEST(EnumerateMultiphoton, IdenticalStatesGiveIdenticalH) {
  const SourceState st = solve_squeezing(preset("sigma-2nm"), 0.4);
  const auto ens = enumerate_multiphoton(st, st, 1e-12);
  for (std::size_t i = 0; i < ens.size(); ++i) EXPECT_EQ(ens.hs()[i], ens.hd()[i]);
  EXPECT_EQ(ens.tail_s(), ens.tail_d());
}

TEST(EnumerateMultiphoton, MassBalanceAndUniqueness) {
  const ModeWeights w = ModeWeights::normalized({0.8, 0.6});
  const auto ens = enumerate_multiphoton(solve_squeezing(w, 0.9), solve_squeezing(w, 0.1), 1e-13);
  double ss = ens.tail_s(), sd = ens.tail_d();
  std::map<std::vector<std::uint16_t>, int> seen;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto ev = ens.event(i);
    EXPECT_GE(ev.occupation[0] + ev.occupation[1], 2);
    ++seen[std::vector<std::uint16_t>(ev.occupation.begin(), ev.occupation.end())];
    ss += ev.hs;
    sd += ev.hd;
  }
  for (const auto& [occ, count] : seen) EXPECT_EQ(count, 1);
  EXPECT_NEAR(ss, 1.0, 1e-9);
  EXPECT_NEAR(sd, 1.0, 1e-9);
  EXPECT_LT(ens.tail_s(), 1e-9);
}

TEST(EnumerateMultiphoton, MatchesExhaustiveGrid) {
  // N <= 3, per-mode cap 6: every grid vector with positive mass appears
  // with the exact product probability.
  for (const std::vector<double>& lam : {std::vector<double>{1.0}, std::vector<double>{0.8, 0.6},
                                        std::vector<double>{0.7, 0.6, 0.387}}) {
    const ModeWeights w = ModeWeights::normalized(lam);
    const SourceState sig = solve_squeezing(w, 0.8);
    const SourceState dec = solve_squeezing(w, 0.15);
    const auto ens = enumerate_multiphoton(sig, dec, 1e-16);
    std::map<std::vector<std::uint16_t>, std::pair<double, double>> got;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const auto ev = ens.event(i);
      got[std::vector<std::uint16_t>(ev.occupation.begin(), ev.occupation.end())] = {ev.hs, ev.hd};
    }
    const PhotonClassProbs ps = class_probabilities(sig);
    const PhotonClassProbs pd = class_probabilities(dec);
    const std::size_t n = w.size();
    std::vector<std::uint16_t> l(n, 0);
    testing::for_each_grid_point(n, 6, [&](const std::vector<double>& t) {
      unsigned total = 0;
      double hs = 1.0 / ps.pm, hd = 1.0 / pd.pm;
      for (std::size_t k = 0; k < n; ++k) {
        l[k] = static_cast<std::uint16_t>(std::lround(t[k] * 6));
        total += l[k];
        hs *= thermal_pmf(sig.squeezing()[k], l[k]);
        hd *= thermal_pmf(dec.squeezing()[k], l[k]);
      }
      if (total < 2) return;
      const auto it = got.find(l);
      ASSERT_NE(it, got.end());
      EXPECT_NEAR(it->second.first, hs, 1e-12);
      EXPECT_NEAR(it->second.second, hd, 1e-12);
    });
  }
}

TEST(EnumerateMultiphoton, ErrorPaths) {
  const SourceState a = solve_squeezing(preset("sigma-4nm"), 0.6);
  const SourceState b = solve_squeezing(preset("sigma-2nm"), 0.1);
  EXPECT_THROW(enumerate_multiphoton(a, b), ArgumentError);
  const SourceState vac(preset("sigma-4nm"), 0.0);
  EXPECT_THROW(enumerate_multiphoton(a, vac), DegenerateSourceError);
  const SourceState dec = solve_squeezing(preset("sigma-4nm"), 0.1);
  EXPECT_THROW(enumerate_multiphoton(a, dec, 1e-12, 100), ResourceError);
}

TEST(DistributionMoments, ThermalAndPoisson) {
  const PhotonClassProbs thermal = class_probabilities(solve_squeezing(ModeWeights({1.0}), 0.6));
  // Brute-force g2 over the truncated distribution.
  double mean = 0.0, fact2 = 0.0;
  for (std::size_t n = 0; n < thermal.pn.size(); ++n) {
    mean += n * thermal.pn[n];
    fact2 += n * (n - 1.0) * thermal.pn[n];
  }
  EXPECT_NEAR(fact2 / (mean * mean), 2.0, 1e-6);
  EXPECT_NEAR(distribution_moments(thermal).g2, 2.0, 1e-6);
  EXPECT_NEAR(distribution_moments(thermal).mean, 0.6, 1e-8);
  EXPECT_NEAR(distribution_moments(poisson_distribution(0.6)).g2, 1.0, 1e-7);
  EXPECT_THROW(distribution_moments(class_probabilities(SourceState(ModeWeights({1.0}), 0.0))),
               DegenerateSourceError);
}

TEST(DistributionMoments, BroaderPumpIsMorePoissonian) {
  const auto g2 = [](const char* id) {
    return distribution_moments(class_probabilities(solve_squeezing(preset(id), 0.6))).g2;
  };
  const double g1 = g2("sigma-1nm"), g2nm = g2("sigma-2nm"), g4 = g2("sigma-4nm"), g8 = g2("sigma-8nm");
  EXPECT_LT(1.0, g8);
  EXPECT_LT(g8, g4);
  EXPECT_LT(g4, g2nm);
  EXPECT_LT(g2nm, g1);
  EXPECT_LE(g1, 2.0 + 1e-6);
}

}  // namespace
}  // namespace mmqkd
