#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pmred/pm.hpp"

using namespace pmred;

namespace {

constexpr double kPi = std::numbers::pi;

ModelParams fig1(double sigma = 3.0) {
  ModelParams p;
  p.lambda = 1.7 * p.lambda_c();
  p.sigma.assign(10, sigma);
  return p;
}

double rel_diff(const ModalVector& a, const ModalVector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    num += (a[j] - b[j]) * (a[j] - b[j]);
    den += b[j] * b[j];
  }
  return std::sqrt(num / den);
}

/// Wraps a path and overrides a single increment.
struct Perturbed {
  const WienerPath* base;
  int i;
  std::int64_t k;
  double delta;
  double increment(int c, std::int64_t q) const { return base->increment(c, q) + (c == i && q == k ? delta : 0.0); }
  double dt() const { return base->dt(); }
  int n_components() const { return base->n_components(); }
};

}  // namespace

TEST(BackwardLeg, NoiselessIsExactExponential) {
  const Model model(fig1(0.0));
  const WienerPath path(1, 10, 0.01);
  const ModalVector xi{0.8, -1.1};
  const auto h = backward_leg(model, xi, 500, 200, path);
  for (std::int64_t j = 0; j <= 200; ++j)
    for (int i = 1; i <= 2; ++i) {
      const double s_minus_t = (j - 200) * 0.01;
      const double exact = std::exp(model.beta(i) * s_minus_t) * xi[i - 1];
      EXPECT_NEAR(h.at(j, i), exact, 1e-13 * std::abs(exact));
    }
}

TEST(BackwardLeg, TerminalValueAndForwardRoundTrip) {
  const Model model(fig1());
  const WienerPath path(4, 10, 0.01);
  const ModalVector xi{1.7, -0.3};
  const std::int64_t anchor = 1234, K = 300;
  const auto h = backward_leg(model, xi, anchor, K, path);
  EXPECT_EQ(h.at(K, 1), xi[0]);
  EXPECT_EQ(h.at(K, 2), xi[1]);
  // Re-run the forward exponential step from y(t - T).
  for (int i = 1; i <= 2; ++i) {
    double y = h.at(0, i);
    const double f = std::exp(model.beta(i) * 0.01);
    for (std::int64_t j = 0; j < K; ++j) {
      y = f * y + model.sigma(i) * path.increment(i, anchor - K + j);
      EXPECT_NEAR(y, h.at(j + 1, i), 1e-12 * std::max(1.0, std::abs(y)));
    }
    EXPECT_NEAR(y, xi[i - 1], 1e-12);
  }
}

TEST(BackwardLeg, EndpointVarianceMatchesDiscreteClosedForm) {
  ModelParams p = fig1(1.0);
  p.lambda = 0.0;  // beta_1, beta_2 < 0
  const Model model(p);
  const double dt = 0.01;
  const std::int64_t K = 200;
  const ModalVector xi{0.0, 0.0};
  double s1 = 0.0, s2 = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) {
    const auto h = backward_leg(model, xi, 0, K, WienerPath(1000 + s, 10, dt));
    s1 += h.at(0, 1) * h.at(0, 1);
    s2 += h.at(0, 2) * h.at(0, 2);
  }
  for (int i = 1; i <= 2; ++i) {
    const double f2 = std::exp(-2.0 * model.beta(i) * dt);
    const double oracle = dt * f2 * (std::pow(f2, K) - 1.0) / (f2 - 1.0);
    EXPECT_NEAR((i == 1 ? s1 : s2) / seeds, oracle, 0.05 * oracle) << "mode " << i;
  }
}

TEST(ForwardLeg, ZeroHistoryNoNoiseGivesZero) {
  const Model model(fig1(0.0));
  const LowModeHistory history(2, 200);
  for (double v : forward_leg(model, history, 0, WienerPath(1, 10, 0.01))) EXPECT_EQ(v, 0.0);
}

TEST(ForwardLeg, OnlyModesThreeAndFourAreForced) {
  const Model model(fig1());
  const auto& p = model.params();
  const auto forcing = low_mode_forcing(model);
  double c3 = 0.0, c4 = 0.0;
  for (const auto& t : forcing) {
    ASSERT_TRUE(t.n == 3 || t.n == 4);
    (t.n == 3 ? c3 : c4) += t.coefficient;
  }
  const double l15 = std::pow(p.length, 1.5);
  EXPECT_DOUBLE_EQ(c3, -3.0 * p.gamma * kPi / (std::numbers::sqrt2 * l15));
  EXPECT_DOUBLE_EQ(c4, -std::numbers::sqrt2 * p.gamma * kPi / l15);

  // Modes 5..N ignore the history entirely.
  const WienerPath path(2, 10, 0.01);
  LowModeHistory a(2, 200), b(2, 200);
  for (std::int64_t j = 0; j <= 200; ++j) {
    b.row(j)[0] = std::sin(0.1 * j);
    b.row(j)[1] = 2.0;
  }
  const auto ya = forward_leg(model, a, 700, path);
  const auto yb = forward_leg(model, b, 700, path);
  for (int n = 5; n <= 10; ++n) EXPECT_EQ(ya[n - 3], yb[n - 3]);
  EXPECT_NE(ya[0], yb[0]);
  EXPECT_NE(ya[1], yb[1]);
}

TEST(Averaged, QuotedValuesAndHomogeneity) {
  const Model model(fig1());
  const ModalVector xi{1.0, 1.0};
  const auto h = averaged_h1(model, xi);
  EXPECT_NEAR(h[0], -0.13888, 1e-5);
  EXPECT_NEAR(h[1], -0.054408, 1e-6);
  for (std::size_t q = 2; q < h.size(); ++q) EXPECT_EQ(h[q], 0.0);

  // Closed forms through D = 1 / gap.
  const auto& p = model.params();
  const double l15 = std::pow(p.length, 1.5);
  EXPECT_DOUBLE_EQ(h[0], -(3.0 * p.gamma * kPi / (std::numbers::sqrt2 * l15)) /
                             (model.beta(1) + model.beta(2) - model.beta(3)));
  EXPECT_NEAR(h[1], -(std::numbers::sqrt2 * p.gamma * kPi / l15) / (2 * model.beta(2) - model.beta(4)), 1e-15);

  for (double v : averaged_h1(model, ModalVector{0.0, 0.0})) EXPECT_EQ(v, 0.0);
  const ModalVector x{0.7, -1.9};
  const auto hx = averaged_h1(model, x);
  const auto hc = averaged_h1(model, ModalVector{-2.5 * x[0], -2.5 * x[1]});
  for (std::size_t q = 0; q < hx.size(); ++q) EXPECT_NEAR(hc[q], 6.25 * hx[q], 1e-15);
}

TEST(Averaged, RequiresNonResonance) {
  ModelParams p = fig1();
  p.lambda = -20.0 * p.lambda_c();
  EXPECT_THROW(AveragedManifold{Model(p)}, NRViolation);
}

TEST(Pullback, NoiselessLimitApproachesAveragedManifold) {
  const Model model(fig1(0.0));
  const WienerPath path(1, 10, 0.01);
  const ModalVector xi{1.0, 1.0};
  const auto avg = averaged_h1(model, xi);
  double prev = INFINITY;
  for (std::int64_t K : {500, 1000, 2000, 8000}) {
    const auto h = pullback_hs(model, xi, 0, K, path);
    const double e = std::abs(h[0] - avg[0]) / std::abs(avg[0]);
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Pullback, SuccessiveDoublingsShrink) {
  const Model model(fig1());
  const WienerPath path(9, 10, 0.01);
  const ModalVector xi{1.0, -0.5};
  const auto h2 = pullback_hs(model, xi, 0, 200, path);
  const auto h4 = pullback_hs(model, xi, 0, 400, path);
  const auto h8 = pullback_hs(model, xi, 0, 800, path);
  const auto h16 = pullback_hs(model, xi, 0, 1600, path);
  const auto dist = [](const ModalVector& a, const ModalVector& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };
  EXPECT_GT(dist(h2, h4), dist(h8, h16));
}

TEST(Pullback, IntegratorReuseMatchesFreeFunction) {
  const Model model(fig1());
  const WienerPath path(3, 10, 0.01);
  PullbackIntegrator integ(model, 0.01, 200);
  for (std::int64_t anchor : {0, 17, 5000}) {
    const ModalVector xi{0.1 * anchor, 1.0};
    EXPECT_EQ(integ.evaluate(xi, anchor, path), pullback_hs(model, xi, anchor, 200, path));
  }
}

TEST(Pullback, DependsOnHistoryInsideTheWindowOnly) {
  const Model model(fig1());
  const WienerPath path(3, 10, 0.01);
  const ModalVector xi{0.5, 0.5};
  const auto base = pullback_hs(model, xi, 1000, 200, path);
  EXPECT_NE(pullback_hs(model, xi, 1000, 200, Perturbed{&path, 1, 850, 0.1}), base);
  EXPECT_NE(pullback_hs(model, xi, 1000, 200, Perturbed{&path, 3, 999, 0.1}), base);
  EXPECT_EQ(pullback_hs(model, xi, 1000, 200, Perturbed{&path, 1, 1000, 0.1}), base);
  EXPECT_EQ(pullback_hs(model, xi, 1000, 200, Perturbed{&path, 3, 799, 0.1}), base);
}

TEST(Analytic, NoiselessReducesToDeterministicTerm) {
  const Model model(fig1(0.0));
  const WienerPath path(1, 10, 0.01);
  const auto c = analytic_coefficients(model, path, 4900, Truncation::kImproper);
  for (double z : c.z) EXPECT_EQ(z, 0.0);
  for (const auto& t : c.triples)
    for (double mj : t.mcoef) EXPECT_EQ(mj, 0.0);
  const ModalVector xi{1.3, -0.4};
  const auto h = c.evaluate(xi);
  const auto avg = averaged_h1(model, xi);
  for (std::size_t q = 0; q < h.size(); ++q) EXPECT_NEAR(h[q], avg[q], 1e-15);

  const auto w = analytic_coefficients(model, path, 4900, Truncation::kFiniteWindow);
  for (const auto& t : w.triples) {
    const double gap = model.beta(t.i1) + model.beta(t.i2) - model.beta(t.n);
    EXPECT_DOUBLE_EQ(t.d, 1.0 / gap);
    EXPECT_NEAR(t.d_window, (1.0 - std::exp(-gap * 49.0)) / gap, 1e-12);
  }
}

TEST(Analytic, ZeroXiKeepsOnlyConstantPart) {
  const Model model(fig1());
  const WienerPath path(5, 10, 0.01);
  const auto c = analytic_coefficients(model, path, 800);
  auto expected = c.z;
  for (const auto& t : c.triples) expected[t.n - 3] += t.a() * t.interaction;
  const auto h = c.evaluate(ModalVector{0.0, 0.0});
  for (std::size_t q = 0; q < h.size(); ++q) EXPECT_NEAR(h[q], expected[q], 1e-15);
}

TEST(Analytic, AgreesWithPullbackOnMatchedWindow) {
  const Model model(fig1());
  const WienerPath fine(31, 10, 0.005);
  const auto coarse = fine.coarsened(2);
  const ModalVector xi{0.9, -1.2};
  const double e_coarse = rel_diff(pullback_hs(model, xi, 0, 800, coarse), analytic_h1(model, xi, coarse, 800));
  const double e_fine = rel_diff(pullback_hs(model, xi, 0, 1600, fine), analytic_h1(model, xi, fine, 1600));
  EXPECT_LT(e_coarse, 5e-2);
  EXPECT_LT(e_fine, e_coarse);
}

TEST(Analytic, ThrowsOnClosedGapOrUnstableMode) {
  ModelParams p = fig1();
  p.lambda = -20.0 * p.lambda_c();
  const WienerPath path(1, 10, 0.01);
  EXPECT_THROW(analytic_coefficients(Model(p), path, 100), NRViolation);
  p.lambda = 10.0 * p.lambda_c();
  EXPECT_THROW(analytic_coefficients(Model(p), path, 100), StabilityViolation);
}

TEST(Analytic, StationaryVarianceOfZ) {
  const Model model(fig1());
  const double dt = 0.01;
  const auto J = static_cast<std::int64_t>(std::ceil(8.0 / std::abs(model.beta(3)) / dt));
  std::vector<double> sq(8, 0.0);
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) {
    const WienerPath path(50000 + s, 10, dt);
    const auto c = analytic_coefficients(model, path, J);
    for (int q = 0; q < 8; ++q) sq[q] += c.z[q] * c.z[q];
  }
  for (int n = 3; n <= 10; ++n) {
    const double expected = model.sigma(n) * model.sigma(n) / (2.0 * std::abs(model.beta(n)));
    EXPECT_NEAR(sq[n - 3] / seeds, expected, 0.05 * expected) << "Z_" << n;
  }
}

TEST(Analytic, RandomPartMeanMatchesSecondMomentOracle) {
  // Mixed-index and Z terms average out. The (2,2) -> 4 constant term does not: with
  // Y = -int_tau^0 e^{beta (tau - s)} dW_s one has E[Y^2] = (e^{2 beta tau} - 1) / (-2 beta),
  // so E[A^{4,2,2}] = sigma^2 / (-2 beta_2) (1 / (2 beta_2 - beta_4) + 1 / beta_4).
  const Model model(fig1());
  const auto& p = model.params();
  const double dt = 0.01;
  const auto J = static_cast<std::int64_t>(std::llround(default_t_past(model, 2.0) / dt));
  const double b2 = model.beta(2), b4 = model.beta(4);
  const double ea = p.sigma[1] * p.sigma[1] / (-2.0 * b2) * (1.0 / (2.0 * b2 - b4) + 1.0 / b4);
  const double oracle4 = ea * interaction_coefficient(p, 2, 2, 4);
  const std::vector<ModalVector> points{{1.0, 1.0}, {-0.5, 2.0}, {1.5, -1.0}};
  const int seeds = 1000;
  std::vector<std::vector<double>> sum(points.size(), std::vector<double>(8, 0.0)), sq = sum;
  for (int s = 0; s < seeds; ++s) {
    const auto c = analytic_coefficients(model, WienerPath(9000 + s, 10, dt), J);
    for (std::size_t a = 0; a < points.size(); ++a) {
      const auto h = c.evaluate(points[a]);
      const auto avg = averaged_h1(model, points[a]);
      for (int q = 0; q < 8; ++q) {
        const double d = h[q] - avg[q];
        sum[a][q] += d;
        sq[a][q] += d * d;
      }
    }
  }
  for (std::size_t a = 0; a < points.size(); ++a)
    for (int q = 0; q < 8; ++q) {
      const double mean = sum[a][q] / seeds;
      const double se = std::sqrt((sq[a][q] / seeds - mean * mean) / seeds);
      const double expected = q == 1 ? oracle4 : 0.0;
      // 2% covers the O(dt) bias of the discrete quadrature.
      EXPECT_LT(std::abs(mean - expected), 3.0 * se + 0.02 * std::abs(expected) + 1e-9)
          << "point " << a << " mode " << q + 3 << " mean " << mean << " expected " << expected;
    }
}

TEST(DefaultTPast, IsTenOverSlowestGap) {
  const Model model(fig1());
  EXPECT_NEAR(default_t_past(model, 2.0), 10.0 / (model.beta(2) - model.beta(3)), 1e-12);
  EXPECT_EQ(default_t_past(model, 100.0), 100.0);
}
