#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "naslab/errors.hpp"
#include "naslab/stats.hpp"
#include "support/oracles.hpp"

using namespace naslab;
using namespace naslab::stats;
using naslab::testing::binned;
using naslab::testing::cond_entropy_oracle;

TEST(Ranks, AverageTies) {
  const std::vector<double> v{10, 20, 20, 5};
  EXPECT_EQ(fractional_ranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, MonotoneAndReversed) {
  const std::vector<double> a{0.3, 1.5, -2, 7, 4};
  std::vector<double> b, c;
  for (double x : a) b.push_back(std::exp(x));
  for (double x : a) c.push_back(-x * x * x);
  EXPECT_DOUBLE_EQ(spearman_rho(a, b), 1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(a, c), -1.0);
}

TEST(Spearman, HandExampleMatchesClosedForm) {
  // d = (-2, 1, 1, -1, 1), sum d^2 = 8, rho = 1 - 6*8 / (5*24) = 0.6
  EXPECT_NEAR(spearman_rho(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{3, 1, 2, 5, 4}), 0.6, 1e-15);
}

TEST(Spearman, SymmetricAndTransformInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  std::vector<double> a(50), b(50), ta(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = d(rng);
    b[i] = a[i] + d(rng);
    ta[i] = std::atan(3 * a[i]) + 5;
  }
  EXPECT_DOUBLE_EQ(spearman_rho(a, b), spearman_rho(b, a));
  EXPECT_NEAR(spearman_rho(ta, b), spearman_rho(a, b), 1e-15);
}

TEST(Spearman, ZeroVarianceIsUndefined) {
  EXPECT_THROW(spearman_rho(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelation);
}

TEST(Spearman, ExcludesUnusableRowsPairwise) {
  ScoreVector a{{"a", "b", "c", "d", "e"}, {1, 2, 3, NAN, 5}, {false, false, false, false, true}};
  ScoreVector b{{"a", "b", "c", "d", "e"}, {2, 4, 6, 8, -1}, {}};
  auto c = spearman_rho(a, b);
  EXPECT_EQ(c.used, 3u);
  EXPECT_EQ(c.excluded, 2u);
  EXPECT_DOUBLE_EQ(c.value, 1.0);
  ScoreVector misaligned{{"a", "b", "c", "x", "e"}, {1, 2, 3, 4, 5}, {}};
  EXPECT_THROW(spearman_rho(a, misaligned), StructuralError);
}

TEST(Pearson, LinearAndTextbook) {
  const std::vector<double> a{1, 2, 4, 7, 11};
  std::vector<double> b, nb;
  for (double x : a) b.push_back(2 * x + 1);
  for (double x : a) nb.push_back(-x);
  EXPECT_DOUBLE_EQ(pearson_r(a, b), 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(a, nb), -1.0);
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 7};
  // n sum xy - sum x sum y over sqrt(...) with sums 15, 17, 63, 55, 79
  const double num = 5 * 63.0 - 15.0 * 17.0;
  const double den = std::sqrt((5 * 55.0 - 225.0) * (5 * 79.0 - 289.0));
  EXPECT_NEAR(pearson_r(x, y), num / den, 1e-15);
}

TEST(Sturges, RuleUsesLog10) {
  EXPECT_EQ(sturges_bins(1000), 11);
  EXPECT_EQ(sturges_bins(10), 4);
  EXPECT_EQ(sturges_bins(1), 1);
}

TEST(Sturges, EqualWidthWithMaxInTopBin) {
  std::vector<double> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 10};
  auto b = bin_sturges(v);
  EXPECT_EQ(b.n_bins, 4);
  EXPECT_EQ(b.bins.back(), 3);
  EXPECT_EQ(b.bins.front(), 0);
  EXPECT_EQ(b.edges.size(), 5u);
  EXPECT_EQ(b.bins[2], 0);  // 2 < 2.5
  EXPECT_EQ(b.bins[3], 1);
}

TEST(Sturges, ConstantVectorSingleFlaggedBin) {
  auto b = bin_sturges(std::vector<double>(7, 3.0));
  EXPECT_TRUE(b.constant);
  EXPECT_EQ(b.n_bins, 1);
  for (int x : b.bins) EXPECT_EQ(x, 0);
}

TEST(Sturges, PermutationEquivariant) {
  std::vector<double> v{5, -1, 3, 3, 9, 0.5, 2, 8};
  std::vector<std::size_t> perm{3, 0, 7, 1, 6, 2, 5, 4};
  std::vector<double> pv;
  for (auto i : perm) pv.push_back(v[i]);
  auto a = bin_sturges(v), b = bin_sturges(pv);
  for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(b.bins[k], a.bins[perm[k]]);
}

TEST(Entropy, DeterminedIsZero) {
  auto z = binned({0, 1, 2, 3, 1, 2});
  auto y = binned({0, 0, 1, 1, 0, 1});
  EXPECT_EQ(conditional_entropy(y, z), 0.0);
  EXPECT_EQ(conditional_entropy(z, z), 0.0);
}

TEST(Entropy, IndependentEqualsMarginal) {
  // Exact product table: every (y, z) pair once.
  auto y = binned({0, 0, 0, 1, 1, 1});
  auto z = binned({0, 1, 2, 0, 1, 2});
  EXPECT_NEAR(conditional_entropy(y, z), entropy(y), 1e-15);
  EXPECT_NEAR(entropy(y), std::log(2.0), 1e-15);
}

TEST(Entropy, UniformTwoByTwo) {
  EXPECT_NEAR(conditional_entropy(binned({0, 0, 1, 1}), binned({0, 1, 0, 1})), std::log(2.0), 1e-15);
}

TEST(Entropy, MisalignedIsStructural) {
  EXPECT_THROW(conditional_entropy(binned({0, 1}), binned({0, 1, 1})), StructuralError);
  auto a = binned({0, 1}), b = binned({1, 0});
  a.ids = {"x", "y"};
  b.ids = {"y", "x"};
  EXPECT_THROW(conditional_entropy(a, b), StructuralError);
}

TEST(InformationGain, Identities) {
  auto y = binned({0, 1, 2, 0, 1, 2, 2, 1});
  auto zi = binned({0, 1, 1, 0, 0, 1, 1, 0});
  EXPECT_EQ(information_gain(y, zi, zi), 0.0);
  auto c = binned({0, 0, 0, 0, 0, 0, 0, 0});
  EXPECT_NEAR(information_gain(y, c, y), entropy(y), 1e-15);
}

TEST(InformationGain, RandomTablesMatchOracle) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 5 + rng() % 40;
    std::vector<int> y(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 4);
      a[i] = static_cast<int>(rng() % 3);
      b[i] = static_cast<int>(rng() % 5);
    }
    auto by = binned(y), ba = binned(a), bb = binned(b);
    const double h1 = cond_entropy_oracle(y, {a});
    const double h2 = cond_entropy_oracle(y, {a, b});
    EXPECT_NEAR(conditional_entropy(by, ba), h1, 1e-12);
    EXPECT_NEAR(conditional_entropy(by, ba, bb), h2, 1e-12);
    EXPECT_NEAR(information_gain(by, ba, bb), h1 - h2, 1e-12);
    EXPECT_LE(conditional_entropy(by, ba, bb), conditional_entropy(by, ba) + 1e-12);
  }
}

TEST(Bias, ParamsAndAntiParams) {
  const std::vector<double> params{100, 250, 30, 4000, 75};
  std::vector<double> anti;
  for (double p : params) anti.push_back(1.0 / p);
  EXPECT_DOUBLE_EQ(bias_of(params, params), 1.0);
  EXPECT_DOUBLE_EQ(bias_of(anti, params), -1.0);
  // ranks (3,4,1,5,2) against (1,2,3,4,5): centred dot -1 over 10
  EXPECT_NEAR(bias_of(std::vector<double>{1, 2, 3, 4, 5}, params), -0.1, 1e-15);
}

TEST(Entropy, FunctionOfConditionIsExactlyZero) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 3 + rng() % 50;
    std::vector<int> z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = static_cast<int>(rng() % 6);
      y[i] = (z[i] * 5 + 1) % 3;
    }
    EXPECT_EQ(conditional_entropy(binned(y), binned(z)), 0.0);
    EXPECT_EQ(conditional_entropy(binned(y), binned(z), binned(z)), 0.0);
  }
}
