#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tlsbp/factor_graph.hpp"

namespace tlsbp {

/// SplitMix64. Portable and bit-reproducible on every platform.
///
/// Stream-splitting rule: the generator for stream `s` under master seed
/// `seed` is seeded with mix(seed) ^ mix(s + 0x9E3779B97F4A7C15). Every
/// generated factor draws from the stream whose id is its FactorId; topology
/// sampling uses kTopologyStream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform_open();
  /// Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal by inverse CDF.
  double normal();

 private:
  std::uint64_t state_;
};

inline constexpr std::uint64_t kTopologyStream = 0x8000000000000000ULL;

/// Inverse of the standard normal CDF; |error| < 1e-15 after refinement.
double normal_quantile(double p);

enum class CouplingFamily { spin_glass, ferromagnetic };

struct CouplingSpec {
  CouplingFamily family = CouplingFamily::spin_glass;
  double sigma = 1.0;
  double field_mean = 0.0;
  double field_std = 0.05;
  std::uint64_t seed = 0;
};

std::string to_string(CouplingFamily family);
CouplingFamily parse_family(const std::string& name);

/// N x N grid. Variable (r, c) has id r*N + c. Pairwise factors come first,
/// ordered by lower endpoint (right neighbor before down neighbor), then N^2
/// unary factors in variable order.
FactorGraph ising_grid(std::size_t side, const CouplingSpec& spec);

inline constexpr int kRegularRetryBudget = 10000;

/// Random simple d-regular pairwise model. Unary fields use
/// field_mean/field_std of `spec`.
FactorGraph random_regular(std::size_t num_variables, std::size_t degree,
                           const CouplingSpec& spec);

/// Conditional table P(child | parents) with scope [parents..., child],
/// where child = OR of leak and independent per-parent causes.
/// `probs` holds the leak probability followed by one cause probability
/// per parent.
FactorTable noisy_or_table(std::span<const VariableId> parents, VariableId child,
                           std::span<const double> probs);

struct NoisyOrDecomposition {
  std::size_t num_parents = 0;
  VariableId child = 0;            // id num_parents
  std::vector<VariableId> dummies; // contiguous, after the child
  std::vector<FactorTable> factors;

  std::size_t num_variables() const { return num_parents + 1 + dummies.size(); }
};

/// Splits an n-parent noisy-OR into a chain of factors over at most three
/// variables. Parents have ids 0..n-1, the child n, dummies n+1.. .
NoisyOrDecomposition noisy_or_decompose(std::size_t num_parents,
                                        std::span<const double> probs);

}  // namespace tlsbp
