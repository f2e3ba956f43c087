#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlsbp {

using VariableId = std::size_t;
using FactorId = std::size_t;

/// Variable/factor incidence. Ordered factor-major, then by variable, so
/// canonical loop keys built from edge ranks are stable across runs.
struct EdgeId {
  FactorId factor = 0;
  VariableId var = 0;

  friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public GraphError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Table over binary variables. The last scope variable varies fastest;
/// state -1 maps to bit 0 and state +1 to bit 1.
struct FactorTable {
  std::vector<VariableId> scope;
  std::vector<double> values;

  std::size_t arity() const { return scope.size(); }

  // Bit of scope position `pos` inside a flat table index.
  std::size_t bit(std::size_t pos) const { return scope.size() - 1 - pos; }

  friend bool operator==(const FactorTable&, const FactorTable&) = default;
};

inline int spin_of(std::size_t state_bit) { return state_bit ? 1 : -1; }

/// Immutable bipartite factor graph over binary (+/-1) variables.
class FactorGraph {
 public:
  FactorGraph() = default;

  /// Validates every table and caches the adjacency. Throws GraphError.
  FactorGraph(std::size_t num_variables, std::vector<FactorTable> factors);

  std::size_t num_variables() const { return num_variables_; }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const FactorTable& factor(FactorId a) const { return factors_[a]; }
  const std::vector<FactorTable>& factors() const { return factors_; }

  /// Factors incident to `i`, ascending.
  std::span<const FactorId> variable_factors(VariableId i) const {
    return var_factors_[i];
  }
  std::size_t degree(VariableId i) const { return var_factors_[i].size(); }

  /// All edges in EdgeId order; an edge's rank in this list is its global index.
  std::span<const EdgeId> edges() const { return edges_; }

  /// Global index of the edge joining factor `a` to its scope position `pos`.
  std::size_t edge_index(FactorId a, std::size_t pos) const {
    return scope_edges_[a][pos];
  }
  std::optional<std::size_t> find_edge(EdgeId e) const;

  friend bool operator==(const FactorGraph& lhs, const FactorGraph& rhs) {
    return lhs.num_variables_ == rhs.num_variables_ &&
           lhs.factors_ == rhs.factors_;
  }

 private:
  std::size_t num_variables_ = 0;
  std::vector<FactorTable> factors_;
  std::vector<std::vector<FactorId>> var_factors_;
  std::vector<EdgeId> edges_;
  std::vector<std::vector<std::size_t>> scope_edges_;
};

/// Node/edge mask over the original graph; ids are never renumbered.
struct TwoCore {
  std::vector<bool> variables;
  std::vector<bool> factors;
  std::vector<bool> edges;  // indexed by global edge index
  std::size_t num_variables = 0;
  std::size_t num_factors = 0;
  std::size_t num_edges = 0;

  bool empty() const { return num_edges == 0; }
  static TwoCore full(const FactorGraph& g);

  friend bool operator==(const TwoCore&, const TwoCore&) = default;
};

/// Peels degree <= 1 nodes until a fixed point is reached.
TwoCore two_core(const FactorGraph& g);
/// Same, restricted to the nodes and edges already present in `within`.
TwoCore two_core(const FactorGraph& g, const TwoCore& within);

/// Text format: `n m`, then per factor `k`, k scope indices, 2^k values.
/// Lines starting with '#' are comments.
void save(const FactorGraph& g, std::ostream& out,
          const std::vector<std::string>& header_comments = {});
FactorGraph load(std::istream& in);

void save_file(const FactorGraph& g, const std::string& path,
               const std::vector<std::string>& header_comments = {});
FactorGraph load_file(const std::string& path);

}  // namespace tlsbp
