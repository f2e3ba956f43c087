#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsbp/bp.hpp"
#include "tlsbp/factor_graph.hpp"
#include "tlsbp/loops.hpp"

namespace tlsbp {

inline constexpr double kMagnetizationGuard = 1.0 - 1e-12;

class DegenerateMagnetization : public std::runtime_error {
 public:
  explicit DegenerateMagnetization(VariableId var);
  VariableId variable() const { return var_; }

 private:
  VariableId var_;
};

/// Clips |m| to kMagnetizationGuard.
double guard_magnetization(double m);

/// Variable-node factor of a loop term for a node with `q` loop factors.
/// Throws DegenerateMagnetization (variable id `var`) when |m| >= 1.
double mu_var(double m, int q, VariableId var = 0);

/// Sum over factor states of b(x) * prod over `loop_positions` of (x_p - m_p).
/// `magnetizations` is indexed like `loop_positions`.
double mu_factor(const FactorTable& table, std::span<const double> belief,
                 std::span<const std::size_t> loop_positions,
                 std::span<const double> magnetizations);

/// Nodes of a loop with their loop-internal incidence.
struct LoopNodes {
  struct Var {
    VariableId id;
    int q;  // loop factors incident to the variable
  };
  struct Fac {
    FactorId id;
    std::vector<VariableId> vars;  // connected to the factor by loop edges
  };
  std::vector<Var> variables;
  std::vector<Fac> factors;

  bool contains_variable(VariableId i) const;
};

/// Resolves global edge indices of `g` into loop nodes.
LoopNodes loop_nodes(const FactorGraph& g, const GeneralizedLoop& loop);

struct LoopTerm {
  std::size_t index = 0;  // position in the loop list the term was built from
  std::size_t length = 0;
  double value = 0.0;
};

/// r(C) evaluated on `bp` computed over `g`. Factor and variable ids of the
/// loop must exist in `g` (clamped graphs keep the original ids).
double loop_term(const FactorGraph& g, const BPResult& bp, const LoopNodes& nodes);

std::vector<LoopTerm> loop_terms(const FactorGraph& g, const BPResult& bp,
                                 std::span<const GeneralizedLoop> loops);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct SeriesReport {
  double log_z_bp = 0.0;
  std::vector<LoopTerm> terms;        // descending |r|, ties by loop order
  std::vector<double> partial_sums;   // 1 + sum of the first l terms, l = 1..
  double correction = 1.0;            // 1 + sum of all terms
  double log_z_tlsbp = 0.0;           // NaN when correction <= 0
  bool negative_partial = false;      // some partial sum (or the total) <= 0

  /// log Z_TLSBP(l); NaN when the partial sum is not positive. l = 0 is BP.
  double log_z_partial(std::size_t l) const;
};

/// Orders terms by descending |r| and accumulates the partial sums.
SeriesReport cumulative_series(double log_z_bp, std::vector<LoopTerm> terms);

/// Z_TLSBP = Z_BP (1 + sum r).
SeriesReport truncated_z(const BPResult& bp, std::vector<LoopTerm> terms);

/// Restricts every factor touching `var` to the slice var = state. The
/// variable keeps its id but loses all its edges; ids of factors are kept.
FactorGraph clamp(const FactorGraph& g, VariableId var, int state);

struct ClampedMarginals {
  std::vector<Belief2> beliefs;
  std::vector<bool> fallback;  // clamped BP failed; BP marginal used instead
  std::vector<double> log_z_plus;
  std::vector<double> log_z_minus;
};

/// b'_i(s) proportional to Z_TLSBP of the model clamped at x_i = s, reusing
/// `loops` (global edge ids of `g`) with terms through x_i dropped.
ClampedMarginals marginals_by_clamping(const FactorGraph& g,
                                       std::span<const GeneralizedLoop> loops,
                                       const BPResult& bp, const BPOptions& options);

}  // namespace tlsbp
