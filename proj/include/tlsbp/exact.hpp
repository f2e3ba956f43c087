#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tlsbp/bp.hpp"
#include "tlsbp/factor_graph.hpp"
#include "tlsbp/loops.hpp"

namespace tlsbp {

inline constexpr std::size_t kExactVariableCeiling = 25;
inline constexpr std::size_t kCensusEdgeCeiling = 20;

class CeilingExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExactResult {
  double log_z = 0.0;
  std::vector<Belief2> marginals;  // empty unless requested
};

/// log of the sum over all 2^n states of the factor product.
double exact_z(const FactorGraph& g, std::size_t ceiling = kExactVariableCeiling);

/// log Z and P_i(s) = Z^{x_i = s} / Z for every variable.
ExactResult exact_marginals(const FactorGraph& g,
                            std::size_t ceiling = kExactVariableCeiling);

struct CensusEntry {
  GeneralizedLoop loop;
  LoopClass kind;
};

/// Every edge subset of the 2-core that is a generalized loop, in canonical order.
std::vector<CensusEntry> enumerate_all_loops_bruteforce(
    const CoreGraph& core, std::size_t ceiling = kCensusEdgeCeiling);

}  // namespace tlsbp
