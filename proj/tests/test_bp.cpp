#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "tlsbp/bp.hpp"
#include "tlsbp/model_gen.hpp"

using namespace tlsbp;

namespace {

constexpr ScheduleKind kAll[] = {ScheduleKind::fixed_sequential, ScheduleKind::random_sequential,
                                 ScheduleKind::parallel, ScheduleKind::residual};

BPOptions with(ScheduleKind kind, double tol = 1e-15, std::uint64_t seed = 1) {
  BPOptions o;
  o.schedule = {kind, seed};
  o.tol = tol;
  return o;
}

FactorGraph uniform_model() {
  std::vector<FactorTable> fs = {{{0, 1}, {1, 1, 1, 1}}, {{1, 2}, {1, 1, 1, 1}},
                                 {{0, 2}, {1, 1, 1, 1}}, {{0, 1, 2}, {1, 1, 1, 1, 1, 1, 1, 1}}};
  return FactorGraph(3, fs);
}

}  // namespace

TEST(Schedule, NamesRoundTrip) {
  for (auto k : kAll) EXPECT_EQ(parse_schedule(to_string(k)), k);
  EXPECT_THROW(parse_schedule("damped"), std::invalid_argument);
}

TEST(BP, ExactOnTreesForEverySchedule) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = oracle::random_tree(3 + seed % 10, seed, 1.2);
    const auto ex = oracle::brute(g);
    for (auto k : kAll) {
      const BPResult r = run_bp(g, with(k, 1e-17));
      EXPECT_TRUE(r.converged) << to_string(k) << " seed " << seed;
      EXPECT_NEAR(r.log_z_bp(), ex.log_z, 1e-10);
      for (VariableId i = 0; i < g.num_variables(); ++i) {
        EXPECT_NEAR(r.beliefs_var[i][1], ex.marginals[i][1], 1e-10);
        EXPECT_NEAR(r.magnetizations[i], ex.marginals[i][1] - ex.marginals[i][0], 1e-10);
      }
    }
  }
}

TEST(BP, ExactOnTreesWithHigherOrderFactors) {
  // chain of triple factors sharing one variable each: still a tree
  std::vector<FactorTable> fs;
  SplitMix64 rng(3);
  for (VariableId a = 0; a + 2 < 9; a += 2) {
    FactorTable t{{a, a + 1, a + 2}, {}};
    for (int x = 0; x < 8; ++x) t.values.push_back(std::exp(rng.normal()));
    fs.push_back(t);
  }
  fs.push_back({{4}, {0.3, 1.7}});
  const FactorGraph g(9, fs);
  const auto ex = oracle::brute(g);
  const BPResult r = run_bp(g, with(ScheduleKind::fixed_sequential, 1e-17));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.log_z_bp(), ex.log_z, 1e-10);
  for (VariableId i = 0; i < 9; ++i) EXPECT_NEAR(r.beliefs_var[i][1], ex.marginals[i][1], 1e-10);
}

TEST(BP, UniformModelConvergesImmediately) {
  const auto g = uniform_model();
  for (auto k : kAll) {
    const BPResult r = run_bp(g, with(k, 1e-17));
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 2u);
    for (double m : r.magnetizations) EXPECT_EQ(m, 0.0);
  }
  MessageState state(g);
  ResidualQueue q(state);
  EXPECT_EQ(q.top_residual(), 0.0);
}

TEST(BP, BeliefsNormalized) {
  const auto g = ising_grid(4, {CouplingFamily::spin_glass, 0.5, 0.0, 0.05, 3});
  for (auto k : kAll) {
    const BPResult r = run_bp(g, with(k));
    for (const auto& b : r.beliefs_var) EXPECT_NEAR(b[0] + b[1], 1.0, 1e-12);
    for (const auto& b : r.beliefs_fac) {
      double s = 0;
      for (double v : b) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(BP, SchedulesAgreeWhenTheyConverge) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = ising_grid(4, {CouplingFamily::spin_glass, 0.5, 0.0, 0.05, seed});
    const BPResult ref = run_bp(g, with(ScheduleKind::parallel));
    if (!ref.converged) continue;
    for (auto k : kAll) {
      const BPResult r = run_bp(g, with(k));
      if (!r.converged) continue;
      for (VariableId i = 0; i < g.num_variables(); ++i) {
        EXPECT_NEAR(r.beliefs_var[i][1], ref.beliefs_var[i][1], 1e-8);
      }
      EXPECT_NEAR(r.log_z_bp(), ref.log_z_bp(), 1e-8);
    }
  }
}

TEST(BP, GlobalSpinFlipNegatesMagnetizations) {
  const CouplingSpec spec{CouplingFamily::spin_glass, 0.4, 0.2, 0.3, 8};
  const auto g = ising_grid(4, spec);
  std::vector<FactorTable> flipped = g.factors();
  for (auto& f : flipped) {
    if (f.arity() == 1) std::swap(f.values[0], f.values[1]);
  }
  const FactorGraph h(g.num_variables(), flipped);
  const BPResult a = run_bp(g, with(ScheduleKind::fixed_sequential));
  const BPResult b = run_bp(h, with(ScheduleKind::fixed_sequential));
  for (VariableId i = 0; i < g.num_variables(); ++i) {
    EXPECT_NEAR(a.magnetizations[i], -b.magnetizations[i], 1e-9);
  }
  EXPECT_NEAR(a.log_z_bp(), b.log_z_bp(), 1e-9);
}

TEST(BP, RandomScheduleIsSeedDeterministic) {
  const auto g = ising_grid(4, {CouplingFamily::spin_glass, 0.8, 0.0, 0.05, 4});
  const BPResult a = run_bp(g, with(ScheduleKind::random_sequential, 1e-15, 9));
  const BPResult b = run_bp(g, with(ScheduleKind::random_sequential, 1e-15, 9));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.beliefs_var, b.beliefs_var);
}

TEST(BP, NonConvergenceIsReportedNotThrown) {
  const auto g = ising_grid(4, {CouplingFamily::spin_glass, 2.0, 0.0, 0.05, 1});
  BPOptions o = with(ScheduleKind::parallel, 1e-17);
  o.max_iter = 3;
  const BPResult r = run_bp(g, o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_GT(r.final_max_update, 0.0);
  o.tol = 0.0;
  EXPECT_THROW(run_bp(g, o), std::invalid_argument);
}

TEST(BP, ZeroMessageNamesTheEdge) {
  // x1 = +1 is forced, while the pair factor only allows x0 = x1 = -1
  const FactorGraph g(2, {{{1}, {0, 1}}, {{0, 1}, {1, 0, 0, 0}}});
  try {
    run_bp(g, with(ScheduleKind::fixed_sequential));
    FAIL() << "expected NonFiniteMessage";
  } catch (const NonFiniteMessage& e) {
    EXPECT_EQ(e.edge(), (EdgeId{1, 0}));
  }
}

TEST(Residual, DependentsFollowTheUpdateEquations) {
  const auto g = ising_grid(3, {CouplingFamily::spin_glass, 1.0, 0.0, 0.05, 2});
  MessageState state(g);
  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    // factor -> i feeds i -> b for the other factors b of i
    for (std::size_t dep : state.dependents(factor_to_var(e))) {
      EXPECT_FALSE(is_factor_to_var(dep));
      const EdgeId d = edges[message_edge(dep)];
      EXPECT_EQ(d.var, edges[e].var);
      EXPECT_NE(d.factor, edges[e].factor);
    }
    EXPECT_EQ(state.dependents(factor_to_var(e)).size(), g.degree(edges[e].var) - 1);
    for (std::size_t dep : state.dependents(var_to_factor(e))) {
      EXPECT_TRUE(is_factor_to_var(dep));
      EXPECT_EQ(edges[message_edge(dep)].factor, edges[e].factor);
      EXPECT_NE(edges[message_edge(dep)].var, edges[e].var);
    }
  }
}

TEST(Residual, OnlyDependentsChangeAfterAnUpdate) {
  const auto g = ising_grid(3, {CouplingFamily::spin_glass, 1.0, 0.2, 0.3, 5});
  MessageState state(g);
  ResidualQueue q(state);
  for (int step = 0; step < 30; ++step) {
    std::vector<double> before(state.num_messages());
    for (std::size_t m = 0; m < before.size(); ++m) before[m] = q.residual(m);
    const std::size_t msg = q.next_message();
    q.update(msg);
    std::vector<bool> touched(state.num_messages(), false);
    touched[msg] = true;
    for (std::size_t d : state.dependents(msg)) touched[d] = true;
    for (std::size_t m = 0; m < before.size(); ++m) {
      if (!touched[m]) EXPECT_EQ(q.residual(m), before[m]);
      // stored residuals are exact for every message
      const Belief2 fresh = state.recompute(m);
      const double r = std::max(std::abs(fresh[0] - state.value(m)[0]),
                                std::abs(fresh[1] - state.value(m)[1]));
      EXPECT_EQ(q.residual(m), r);
    }
  }
}

TEST(Residual, PopsLargestResidualSmallestIdOnTies) {
  const auto g = ising_grid(3, {CouplingFamily::ferromagnetic, 1.0, 0.5, 0.0, 1});
  MessageState state(g);
  ResidualQueue q(state);
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t m = 0; m < state.num_messages(); ++m) {
    if (q.residual(m) > best) {
      best = q.residual(m);
      arg = m;
    }
  }
  EXPECT_EQ(q.top_residual(), best);
  EXPECT_EQ(q.next_message(), arg);
}

TEST(Residual, OrderDiffersFromFixedOnStrongCycle) {
  // 4-cycle, strong mixed couplings, fields on two corners
  std::vector<FactorTable> fs;
  const double j[] = {2.0, -1.5, 1.0, 2.5};
  for (VariableId i = 0; i < 4; ++i) {
    const VariableId a = i, b = (i + 1) % 4;
    const double e = std::exp(j[i]), f = std::exp(-j[i]);
    fs.push_back({{std::min(a, b), std::max(a, b)}, {e, f, f, e}});
  }
  fs.push_back({{0}, {0.2, 1.8}});
  fs.push_back({{2}, {1.5, 0.5}});
  const FactorGraph g(4, fs);
  MessageState state(g);
  ResidualQueue q(state);
  std::vector<std::size_t> residual_log;
  for (int k = 0; k < 8; ++k) {
    const std::size_t m = q.next_message();
    residual_log.push_back(m);
    q.update(m);
  }
  // fixed order starts with the variable->factor messages of factor 0
  std::vector<std::size_t> fixed_log;
  for (FactorId a = 0; a < g.num_factors() && fixed_log.size() < 8; ++a) {
    for (std::size_t p = 0; p < g.factor(a).arity(); ++p) {
      fixed_log.push_back(var_to_factor(g.edge_index(a, p)));
    }
    for (std::size_t p = 0; p < g.factor(a).arity(); ++p) {
      fixed_log.push_back(factor_to_var(g.edge_index(a, p)));
    }
  }
  fixed_log.resize(8);
  EXPECT_NE(residual_log, fixed_log);
  EXPECT_TRUE(run_bp(g, with(ScheduleKind::residual)).converged);
}

TEST(Bethe, TreeFreeEnergyIsExact) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto g = oracle::random_tree(10, seed);
    const BPResult r = run_bp(g, with(ScheduleKind::fixed_sequential, 1e-17));
    const auto ex = oracle::brute(g);
    EXPECT_NEAR(std::exp(-r.bethe.free_energy) / std::exp(ex.log_z), 1.0, 1e-10);
    EXPECT_NEAR(r.bethe.energy - r.bethe.entropy, r.bethe.free_energy, 1e-12);
    EXPECT_FALSE(r.bethe.infinite_energy);
  }
}

TEST(Bethe, IsolatedVariableContributesLogTwo) {
  const FactorGraph g(2, {{{0}, {1.0, 3.0}}});
  const BPResult r = run_bp(g, with(ScheduleKind::fixed_sequential, 1e-17));
  EXPECT_NEAR(r.log_z_bp(), std::log(4.0) + std::log(2.0), 1e-14);
}
