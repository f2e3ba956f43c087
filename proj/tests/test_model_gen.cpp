#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "tlsbp/model_gen.hpp"

using namespace tlsbp;

namespace {

// log-ratio of a pairwise Ising table: values are exp(+J) on agreement.
double coupling_of(const FactorTable& f) { return 0.5 * std::log(f.values[0] / f.values[1]); }

// P(child on | parents) for a noisy-OR, written out directly.
double noisy_or_on(std::size_t cfg, std::size_t n, const std::vector<double>& probs) {
  double off = 1.0 - probs[0];
  for (std::size_t p = 0; p < n; ++p) {
    if ((cfg >> p) & 1U) off *= 1.0 - probs[p + 1];
  }
  return 1.0 - off;
}

}  // namespace

TEST(SplitMix64, KnownSequence) {
  // Reference outputs of the published SplitMix64 for state 0.
  SplitMix64 r(0);
  EXPECT_EQ(r.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(r.next(), 0x06C45D188009454FULL);
}

TEST(SplitMix64, StreamsAreIndependentOfDrawOrder) {
  auto a = SplitMix64::stream(42, 3);
  auto b = SplitMix64::stream(42, 3);
  auto c = SplitMix64::stream(42, 4);
  auto d = SplitMix64::stream(43, 3);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, d.next());
}

TEST(SplitMix64, UniformAndBelow) {
  SplitMix64 r(9);
  std::vector<int> hist(7, 0);
  for (int k = 0; k < 70000; ++k) {
    const double u = r.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hist[r.below(7)];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(NormalQuantile, MatchesErfInverse) {
  for (double p : {1e-12, 1e-6, 0.01, 0.02425, 0.2, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-9}) {
    const double x = normal_quantile(p);
    EXPECT_NEAR(0.5 * std::erfc(-x / std::sqrt(2.0)), p, 1e-15 + 1e-13 * p) << p;
  }
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_THROW(normal_quantile(0.0), std::domain_error);
  EXPECT_THROW(normal_quantile(1.0), std::domain_error);
}

TEST(NormalDraws, MomentsAreStandard) {
  SplitMix64 r(123);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(IsingGrid, LayoutAndCounts) {
  const auto g = ising_grid(3, {CouplingFamily::spin_glass, 1.0, 0.0, 0.05, 7});
  EXPECT_EQ(g.num_variables(), 9u);
  EXPECT_EQ(g.num_factors(), 12u + 9u);
  // right neighbor before down neighbor, by lower endpoint
  EXPECT_EQ(g.factor(0).scope, (std::vector<VariableId>{0, 1}));
  EXPECT_EQ(g.factor(1).scope, (std::vector<VariableId>{0, 3}));
  EXPECT_EQ(g.factor(2).scope, (std::vector<VariableId>{1, 2}));
  EXPECT_EQ(g.factor(11).scope, (std::vector<VariableId>{7, 8}));
  for (VariableId i = 0; i < 9; ++i) EXPECT_EQ(g.factor(12 + i).scope, (std::vector<VariableId>{i}));
  for (FactorId a = 0; a < 12; ++a) {
    const auto& v = g.factor(a).values;
    EXPECT_DOUBLE_EQ(v[0], v[3]);
    EXPECT_DOUBLE_EQ(v[1], v[2]);
    EXPECT_NEAR(v[0] * v[1], 1.0, 1e-12);
  }
}

TEST(IsingGrid, DeterministicPerSeed) {
  const CouplingSpec spec{CouplingFamily::spin_glass, 0.5, 0.0, 0.05, 11};
  EXPECT_EQ(ising_grid(5, spec), ising_grid(5, spec));
  CouplingSpec other = spec;
  other.seed = 12;
  EXPECT_FALSE(ising_grid(5, spec) == ising_grid(5, other));
}

TEST(IsingGrid, CouplingDistributions) {
  double sg = 0, sg2 = 0, fe_min = 1e9;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = ising_grid(6, {CouplingFamily::spin_glass, 0.5, 0.0, 0.05, seed});
    const auto f = ising_grid(6, {CouplingFamily::ferromagnetic, 0.5, 0.0, 0.05, seed});
    for (FactorId a = 0; a < 60; ++a) {
      const double j = coupling_of(s.factor(a));
      sg += j;
      sg2 += j * j;
      ++n;
      fe_min = std::min(fe_min, coupling_of(f.factor(a)));
    }
  }
  EXPECT_NEAR(sg / n, 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(sg2 / n), 0.5, 0.05);
  EXPECT_GT(fe_min, 0.0);
}

TEST(IsingGrid, ZeroSigmaGivesFlatCouplings) {
  const auto g = ising_grid(3, {CouplingFamily::spin_glass, 0.0, 0.0, 0.0, 1});
  for (const auto& f : g.factors()) {
    for (double v : f.values) EXPECT_DOUBLE_EQ(v, 1.0);
  }
}

TEST(IsingGrid, RejectsBadArguments) {
  EXPECT_THROW(ising_grid(1, {}), std::invalid_argument);
  EXPECT_THROW(parse_family("antiferro"), std::invalid_argument);
  EXPECT_EQ(parse_family(to_string(CouplingFamily::ferromagnetic)),
            CouplingFamily::ferromagnetic);
}

TEST(RandomRegular, SimpleAndRegular) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_regular(16, 3, {CouplingFamily::spin_glass, 1.0, 0.0, 0.05, seed});
    std::set<std::pair<VariableId, VariableId>> seen;
    std::vector<int> deg(16, 0);
    std::size_t pairwise = 0;
    for (const auto& f : g.factors()) {
      if (f.arity() != 2) continue;
      ++pairwise;
      EXPECT_LT(f.scope[0], f.scope[1]);
      EXPECT_TRUE(seen.insert({f.scope[0], f.scope[1]}).second);
      ++deg[f.scope[0]];
      ++deg[f.scope[1]];
    }
    EXPECT_EQ(pairwise, 24u);
    for (int d : deg) EXPECT_EQ(d, 3);
    EXPECT_EQ(g.num_factors(), 24u + 16u);
  }
  const CouplingSpec spec{CouplingFamily::spin_glass, 1.0, 0.0, 0.05, 5};
  EXPECT_EQ(random_regular(20, 3, spec), random_regular(20, 3, spec));
  EXPECT_THROW(random_regular(5, 3, spec), std::invalid_argument);
  EXPECT_THROW(random_regular(4, 4, spec), std::invalid_argument);
}

TEST(NoisyOr, MonolithicTable) {
  const std::vector<VariableId> parents{0, 1};
  const std::vector<double> probs{0.1, 0.6, 0.3};
  const auto t = noisy_or_table(parents, 2, probs);
  ASSERT_EQ(t.values.size(), 8u);
  // index bits: parent 0, parent 1, child (child fastest)
  EXPECT_NEAR(t.values[0b001], 0.1, 1e-15);
  EXPECT_NEAR(t.values[0b101], 1 - 0.9 * 0.4, 1e-15);
  EXPECT_NEAR(t.values[0b111], 1 - 0.9 * 0.4 * 0.7, 1e-15);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(t.values[2 * c] + t.values[2 * c + 1], 1.0, 1e-15);
  EXPECT_THROW(noisy_or_table(parents, 2, std::vector<double>{0.1, 0.2}), std::invalid_argument);
  EXPECT_THROW(noisy_or_table(parents, 2, std::vector<double>{0.1, 1.2, 0.3}),
               std::invalid_argument);
}

// Summing the chain over every dummy state must reproduce P(child | parents).
TEST(NoisyOr, DecompositionMatchesMonolithicTable) {
  SplitMix64 rng(77);
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<double> probs(n + 1);
    for (auto& p : probs) p = rng.uniform_open();
    probs[0] *= 0.2;
    const auto d = noisy_or_decompose(n, probs);
    EXPECT_EQ(d.child, n);
    EXPECT_EQ(d.dummies.size(), n >= 3 ? n - 2 : 0);
    EXPECT_EQ(d.factors.size(), n >= 3 ? n - 1 : 1);
    for (const auto& f : d.factors) {
      EXPECT_LE(f.arity(), 3u);
      for (VariableId v : f.scope) EXPECT_LT(v, d.num_variables());
    }
    const std::size_t nv = d.num_variables();
    std::map<std::pair<std::size_t, int>, double> sum;  // (parent cfg, child) -> mass
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << nv); ++s) {
      double w = 1.0;
      for (const auto& f : d.factors) {
        std::size_t x = 0;
        for (VariableId v : f.scope) x = 2 * x + ((s >> v) & 1U);
        w *= f.values[x];
      }
      const std::size_t cfg = s & ((std::size_t{1} << n) - 1);
      sum[{cfg, static_cast<int>((s >> n) & 1U)}] += w;
    }
    for (std::size_t cfg = 0; cfg < (std::size_t{1} << n); ++cfg) {
      const double on = noisy_or_on(cfg, n, probs);
      EXPECT_NEAR((sum[{cfg, 1}]), on, 1e-12) << "n=" << n << " cfg=" << cfg;
      EXPECT_NEAR((sum[{cfg, 0}]), 1.0 - on, 1e-12) << "n=" << n << " cfg=" << cfg;
    }
  }
}
