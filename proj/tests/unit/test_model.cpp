#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pmred/model.hpp"

using namespace pmred;

namespace {

constexpr double kPi = std::numbers::pi;

ModelParams fig1() {
  ModelParams p;
  p.length = 7.0 * kPi;
  p.lambda = 1.7 * p.lambda_c();
  return p;
}

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int j = 1; j < n; ++j) s += (j % 2 ? 4.0 : 2.0) * f(a + j * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Eigenvalue, ThirdModeMagnitudeMatchesQuotedValue) {
  const auto p = fig1();
  EXPECT_NEAR(eigenvalue(p, 3), -0.2980, 5e-4);
  EXPECT_NEAR(std::abs(eigenvalue(p, 3)), 0.29, 0.01);
}

TEST(Eigenvalue, FirstModeIsSevenTenthsOfCritical) {
  const auto p = fig1();
  EXPECT_NEAR(eigenvalue(p, 1), 0.7 * p.lambda_c(), 1e-15);
  EXPECT_NEAR(eigenvalue(p, 1), 0.028571, 1e-6);
}

TEST(Eigenvalue, VanishesAtCriticalParameter) {
  auto p = fig1();
  p.lambda = p.lambda_c();
  EXPECT_NEAR(eigenvalue(p, 1), 0.0, 1e-16);
}

TEST(Eigenvalue, StrictlyDecreasingAndExactFormula) {
  const Model model(fig1());
  const auto& p = model.params();
  for (int n = 1; n <= model.n_galerkin(); ++n) {
    EXPECT_DOUBLE_EQ(model.beta(n), p.lambda - p.nu * n * n * kPi * kPi / (p.length * p.length));
    if (n > 1) EXPECT_LT(model.beta(n), model.beta(n - 1));
  }
}

TEST(Eigenfunction, DirichletBoundaryAndMidpoint) {
  const auto p = fig1();
  for (int n = 1; n <= 10; ++n) EXPECT_EQ(eigenfunction_value(p, n, 0.0), 0.0);
  EXPECT_NEAR(eigenfunction_value(p, 1, p.length / 2), std::sqrt(2.0 / (7.0 * kPi)), 1e-15);
}

TEST(Eigenfunction, UnitNormBySimpson) {
  const auto p = fig1();
  for (int n : {1, 2, 5, 13, 32}) {
    const double norm = simpson([&](double x) { return std::pow(eigenfunction_value(p, n, x), 2); }, 0.0, p.length, 4000);
    EXPECT_NEAR(norm, 1.0, 1e-8) << "n=" << n;
  }
}

TEST(Interaction, QuotedValues) {
  const auto p = fig1();
  EXPECT_EQ(interaction_coefficient(p, 1, 2, 5), 0.0);
  EXPECT_NEAR(interaction_coefficient(p, 1, 2, 3), -0.021541, 1e-6);
  EXPECT_NEAR(interaction_coefficient(p, 2, 1, 1), -0.010771, 1e-6);
  const double c = p.gamma * kPi / (std::numbers::sqrt2 * std::pow(p.length, 1.5));
  EXPECT_DOUBLE_EQ(interaction_coefficient(p, 1, 2, 3), -2.0 * c);
  EXPECT_DOUBLE_EQ(interaction_coefficient(p, 2, 1, 1), -c);
  EXPECT_DOUBLE_EQ(interaction_coefficient(p, 1, 2, 1), 2.0 * c);  // sgn(1 - 2) = -1
}

TEST(Interaction, EqualIndicesOnlyFeedTheSum) {
  const auto p = fig1();
  for (int i = 1; i <= 6; ++i)
    for (int n = 1; n <= 12; ++n)
      if (n != 2 * i) EXPECT_EQ(interaction_coefficient(p, i, i, n), 0.0);
}

TEST(Interaction, MatchesQuadratureOracle) {
  // B^n_{i1 i2} = -gamma * int e_i1 (e_i2)' e_n dx, with the derivative taken analytically.
  auto p = fig1();
  p.gamma = 0.7;
  const double l = p.length;
  for (int i1 = 1; i1 <= 7; ++i1)
    for (int i2 = 1; i2 <= 7; ++i2)
      for (int n = 1; n <= 14; ++n) {
        const auto integrand = [&](double x) {
          const double de = std::sqrt(2.0 / l) * (i2 * kPi / l) * std::cos(i2 * kPi * x / l);
          return eigenfunction_value(p, i1, x) * de * eigenfunction_value(p, n, x);
        };
        const double oracle = -p.gamma * simpson(integrand, 0.0, l, 6000);
        EXPECT_NEAR(interaction_coefficient(p, i1, i2, n), oracle, 1e-8) << i1 << "," << i2 << "->" << n;
      }
}

TEST(InteractionTable, SparsityAndLookup) {
  const auto p = fig1();
  const InteractionTable table(p, 32);
  for (int n = 1; n <= 32; ++n)
    for (const auto& t : table.terms(n)) {
      EXPECT_TRUE(n == t.i1 + t.i2 || n == std::abs(t.i1 - t.i2));
      EXPECT_DOUBLE_EQ(t.coefficient, interaction_coefficient(p, t.i1, t.i2, n));
    }
  for (int n = 5; n <= 32; ++n)
    for (int i1 = 1; i1 <= 2; ++i1)
      for (int i2 = 1; i2 <= 2; ++i2) EXPECT_EQ(table.coefficient(i1, i2, n), 0.0);
  EXPECT_DOUBLE_EQ(table.coefficient(1, 2, 3), interaction_coefficient(p, 1, 2, 3));
  EXPECT_EQ(table.coefficient(1, 40, 39), 0.0);  // outside the truncation
}

TEST(NonResonance, Fig1GapValues) {
  const Model model(fig1());
  const auto r = check_non_resonance(model);
  ASSERT_TRUE(r.satisfied);
  EXPECT_NEAR(model.beta(1) - model.beta(3), 0.33, 0.01);
  EXPECT_NEAR(model.beta(1) + model.beta(2) - model.beta(3), 0.2327, 1e-4);
  EXPECT_NEAR(2 * model.beta(2) - model.beta(4), 0.3959, 1e-4);
  EXPECT_NEAR(model.beta(2) - model.beta(3), 0.2041, 1e-4);
  EXPECT_NEAR(model.beta(2) - model.beta(4), 0.4898, 1e-4);
  EXPECT_NEAR(r.min_of(GapKind::kSum), 0.2327, 1e-4);
  EXPECT_NEAR(r.min_gap, 0.2041, 1e-4);
  for (const auto& g : r.gaps) {
    EXPECT_GT(g.value, 0.0);
    EXPECT_LE(g.n, 4);  // (1,2), (2,1) -> 3 and (2,2) -> 4 only
  }
  EXPECT_EQ(r.gaps.size(), 9u);
}

TEST(NonResonance, NoiselessModesDropSingleIndexGaps) {
  auto p = fig1();
  p.sigma.assign(10, 0.0);
  const auto r = check_non_resonance(Model(p));
  for (const auto& g : r.gaps) EXPECT_EQ(g.kind, GapKind::kSum);
  EXPECT_EQ(r.gaps.size(), 3u);
}

TEST(NonResonance, UnstableHighModeThrows) {
  auto p = fig1();
  p.lambda = 1.01 * 9.0 * p.lambda_c();  // beta_3 > 0
  EXPECT_THROW(check_non_resonance(Model(p)), StabilityViolation);
}

TEST(NonResonance, ViolatedWhenSumGapCloses) {
  // With lambda well below lambda_c the sum gap beta_1 + beta_2 - beta_3 turns negative.
  auto p = fig1();
  p.lambda = -20.0 * p.lambda_c();
  const auto r = check_non_resonance(Model(p));
  EXPECT_FALSE(r.satisfied);
  EXPECT_LT(r.min_of(GapKind::kSum), 0.0);
}

TEST(ModelParams, ValidationNamesTheField) {
  auto p = fig1();
  p.nu = 0.0;
  try {
    p.validate();
    FAIL();
  } catch (const ConfigInvalid& e) {
    EXPECT_EQ(e.field(), "model.nu");
  }
  p = fig1();
  p.n_noise = 2;
  EXPECT_THROW(p.validate(), ConfigInvalid);
  p = fig1();
  p.sigma.resize(9);
  EXPECT_THROW(p.validate(), ConfigInvalid);
  p = fig1();
  p.n_galerkin = 8;
  EXPECT_THROW(p.validate(), ConfigInvalid);
}

TEST(NormWeight, AlphaZeroIsPlainL2) {
  const auto p = fig1();
  for (int n = 1; n <= 10; ++n) EXPECT_EQ(norm_weight(p, n, 0.0), 1.0);
  EXPECT_NEAR(norm_weight(p, 7, 1.0), 1.0 + std::pow(7 * kPi / p.length, 2), 1e-15);
}
