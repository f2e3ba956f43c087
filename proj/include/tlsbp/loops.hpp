#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlsbp/factor_graph.hpp"

namespace tlsbp {

/// Fixed-width bitset over the local edge indices of a CoreGraph.
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(std::size_t num_bits) : words_((num_bits + 63) / 64, 0) {}

  void set(std::size_t bit) { words_[bit / 64] |= std::uint64_t{1} << (bit % 64); }
  void reset(std::size_t bit) { words_[bit / 64] &= ~(std::uint64_t{1} << (bit % 64)); }
  bool test(std::size_t bit) const { return (words_[bit / 64] >> (bit % 64)) & 1U; }
  std::size_t count() const;
  bool none() const;

  EdgeSet& operator|=(const EdgeSet& other);
  friend EdgeSet operator|(EdgeSet lhs, const EdgeSet& rhs) { return lhs |= rhs; }
  /// Size of the union without materializing it.
  std::size_t union_count(const EdgeSet& other) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        const int b = __builtin_ctzll(bits);
        fn(w * 64 + static_cast<std::size_t>(b));
        bits &= bits - 1;
      }
    }
  }

  friend auto operator<=>(const EdgeSet&, const EdgeSet&) = default;

 private:
  std::vector<std::uint64_t> words_;
};

enum class NodeKind { variable, factor };

/// Adjacency view of the 2-core with dense local ids. Local edges are ranked
/// by global edge index; vertices list core variables first, then factors.
class CoreGraph {
 public:
  struct Vertex {
    NodeKind kind;
    std::size_t id;  // original VariableId or FactorId
  };
  struct Edge {
    std::size_t global;
    std::size_t variable_vertex;
    std::size_t factor_vertex;
  };
  struct Incidence {
    std::size_t vertex;  // neighbor
    std::size_t edge;    // local edge
  };

  explicit CoreGraph(const FactorGraph& g);
  CoreGraph(const FactorGraph& g, const TwoCore& core);

  const FactorGraph& graph() const { return *graph_; }
  bool empty() const { return edges_.empty(); }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const Vertex& vertex(std::size_t v) const { return vertices_[v]; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::span<const Incidence> neighbors(std::size_t v) const { return adjacency_[v]; }
  std::optional<std::size_t> local_edge(std::size_t global) const;

 private:
  const FactorGraph* graph_;
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::vector<std::size_t> global_to_local_;  // npos when outside the core
};

/// Edge subset of the 2-core in which every touched node has degree >= 2.
struct GeneralizedLoop {
  std::vector<std::size_t> edges;  // global edge indices, ascending

  std::size_t length() const { return edges.size(); }
  /// Canonical key: ascending global edge indices joined by '-'.
  std::string key() const;

  /// Canonical order: by length, then lexicographically by edge sequence.
  friend bool operator<(const GeneralizedLoop& a, const GeneralizedLoop& b) {
    if (a.edges.size() != b.edges.size()) return a.edges.size() < b.edges.size();
    return a.edges < b.edges;
  }
  friend bool operator==(const GeneralizedLoop&, const GeneralizedLoop&) = default;
};

GeneralizedLoop to_loop(const CoreGraph& core, const EdgeSet& edges);
/// Throws std::invalid_argument if an edge is outside the core.
EdgeSet to_edge_set(const CoreGraph& core, std::span<const std::size_t> global_edges);

struct LoopClass {
  bool simple = false;
  bool disconnected = false;
  bool complex = false;

  friend bool operator==(const LoopClass&, const LoopClass&) = default;
};

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

struct SearchBounds {
  std::size_t max_simple = 1000;  // S
  std::size_t max_depth = 10;     // M
  std::optional<std::size_t> max_length;  // b; derived from the S-th simple loop if unset

  /// S, M and b large enough to enumerate every loop of `core`.
  static SearchBounds exhaustive(const CoreGraph& core);
};

bool is_generalized_loop(const CoreGraph& core, std::span<const std::size_t> global_edges);

LoopClass classify(const CoreGraph& core, const GeneralizedLoop& loop);
LoopClass classify(const CoreGraph& core, const EdgeSet& loop);

struct SimpleLoops {
  std::vector<GeneralizedLoop> loops;  // canonical order
  std::size_t bound = 0;               // b
};

/// The first `max_simple` simple loops in canonical order.
SimpleLoops simple_loops(const CoreGraph& core, std::size_t max_simple);

/// Union of two loops plus every complex loop obtained by bridging its
/// components. Empty when the union is longer than `max_length`.
std::vector<GeneralizedLoop> merge_loops(const CoreGraph& core, const GeneralizedLoop& l1,
                                         const GeneralizedLoop& l2, std::size_t max_length,
                                         std::size_t max_depth);

/// Loops grown from the component of `start_vertex` (a local vertex of
/// `loop`) by attaching other components, one at a time, through paths of at
/// most `max_depth` edges whose interior avoids the loop. Every intermediate
/// step is reported, so results may still be disconnected.
std::vector<GeneralizedLoop> complex_loops_dfs(const CoreGraph& core,
                                               const GeneralizedLoop& loop,
                                               std::size_t start_vertex,
                                               std::size_t max_length,
                                               std::size_t max_depth);

struct EnumerationResult {
  std::vector<GeneralizedLoop> loops;      // canonical order
  std::vector<std::size_t> discovered_in;  // per loop; 0 for simple loops
  std::size_t num_simple = 0;
  std::size_t max_length = 0;  // resolved b
  std::size_t max_depth = 0;
  std::size_t max_simple = 0;
  /// Merge iterations that discovered at least one new loop.
  std::size_t iterations = 0;
  std::vector<std::size_t> new_per_iteration;
  double seconds_simple = 0.0;
  double seconds_merge = 0.0;
};

EnumerationResult tlsbp_enumerate(const CoreGraph& core, const SearchBounds& bounds);

struct LoopCensus {
  std::size_t total = 0;
  std::size_t simple = 0;
  std::size_t complex_disconnected = 0;
  std::size_t complex_connected = 0;
  std::size_t disconnected_noncomplex = 0;
  std::size_t neither = 0;
  std::map<std::size_t, std::size_t> length_histogram;
};

LoopCensus census(const CoreGraph& core, std::span<const GeneralizedLoop> loops);

}  // namespace tlsbp
