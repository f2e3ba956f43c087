#include "tlsbp/loops.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

namespace tlsbp {

std::size_t EdgeSet::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
  return c;
}

bool EdgeSet::none() const {
  return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
}

EdgeSet& EdgeSet::operator|=(const EdgeSet& other) {
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
  return *this;
}

std::size_t EdgeSet::union_count(const EdgeSet& other) const {
  std::size_t c = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    c += static_cast<std::size_t>(__builtin_popcountll(words_[w] | other.words_[w]));
  }
  return c;
}

CoreGraph::CoreGraph(const FactorGraph& g) : CoreGraph(g, two_core(g)) {}

CoreGraph::CoreGraph(const FactorGraph& g, const TwoCore& core) : graph_(&g) {
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> var_vertex(g.num_variables(), npos);
  std::vector<std::size_t> fac_vertex(g.num_factors(), npos);
  for (VariableId i = 0; i < g.num_variables(); ++i) {
    if (core.variables[i]) {
      var_vertex[i] = vertices_.size();
      vertices_.push_back({NodeKind::variable, i});
    }
  }
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    if (core.factors[a]) {
      fac_vertex[a] = vertices_.size();
      vertices_.push_back({NodeKind::factor, a});
    }
  }
  adjacency_.resize(vertices_.size());
  global_to_local_.assign(g.num_edges(), npos);
  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!core.edges[e]) continue;
    const std::size_t local = edges_.size();
    const std::size_t vv = var_vertex[edges[e].var];
    const std::size_t fv = fac_vertex[edges[e].factor];
    edges_.push_back({e, vv, fv});
    global_to_local_[e] = local;
    adjacency_[vv].push_back({fv, local});
    adjacency_[fv].push_back({vv, local});
  }
}

std::optional<std::size_t> CoreGraph::local_edge(std::size_t global) const {
  if (global >= global_to_local_.size()) return std::nullopt;
  const std::size_t local = global_to_local_[global];
  if (local == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return local;
}

std::string GeneralizedLoop::key() const {
  std::string out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (k) out += '-';
    out += std::to_string(edges[k]);
  }
  return out;
}

GeneralizedLoop to_loop(const CoreGraph& core, const EdgeSet& edges) {
  GeneralizedLoop loop;
  // Local edges are ranked by global index, so this is already ascending.
  edges.for_each([&](std::size_t e) { loop.edges.push_back(core.edge(e).global); });
  return loop;
}

EdgeSet to_edge_set(const CoreGraph& core, std::span<const std::size_t> global_edges) {
  EdgeSet set(core.num_edges());
  for (std::size_t e : global_edges) {
    const auto local = core.local_edge(e);
    if (!local) {
      throw std::invalid_argument("edge " + std::to_string(e) + " is not in the 2-core");
    }
    set.set(*local);
  }
  return set;
}

SearchBounds SearchBounds::exhaustive(const CoreGraph& core) {
  return {kUnbounded, core.num_edges(), core.num_edges()};
}

namespace {

/// Connected components of an edge set; label -1 marks vertices outside it.
struct Components {
  std::vector<int> label;
  int count = 0;
};

Components components(const CoreGraph& core, const EdgeSet& edges) {
  const std::size_t nv = core.num_vertices();
  std::vector<std::size_t> parent(nv);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<char> touched(nv, 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  edges.for_each([&](std::size_t e) {
    const auto& edge = core.edge(e);
    touched[edge.variable_vertex] = touched[edge.factor_vertex] = 1;
    const std::size_t a = find(edge.variable_vertex);
    const std::size_t b = find(edge.factor_vertex);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  });
  Components c;
  c.label.assign(nv, -1);
  std::vector<int> root_label(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!touched[v]) continue;
    const std::size_t r = find(v);
    if (root_label[r] < 0) root_label[r] = c.count++;
    c.label[v] = root_label[r];
  }
  return c;
}

std::vector<int> degrees(const CoreGraph& core, const EdgeSet& edges) {
  std::vector<int> deg(core.num_vertices(), 0);
  edges.for_each([&](std::size_t e) {
    ++deg[core.edge(e).variable_vertex];
    ++deg[core.edge(e).factor_vertex];
  });
  return deg;
}

bool has_bridge(const CoreGraph& core, const EdgeSet& edges) {
  const std::size_t nv = core.num_vertices();
  std::vector<int> order(nv, -1);
  std::vector<int> low(nv, 0);
  int clock = 0;
  bool found = false;
  std::function<void(std::size_t, std::size_t)> visit = [&](std::size_t v,
                                                             std::size_t via) {
    order[v] = low[v] = clock++;
    for (const auto& [w, e] : core.neighbors(v)) {
      if (found) return;
      if (!edges.test(e) || e == via) continue;
      if (order[w] < 0) {
        visit(w, e);
        low[v] = std::min(low[v], low[w]);
        if (low[w] > order[v]) found = true;
      } else {
        low[v] = std::min(low[v], order[w]);
      }
    }
  };
  const auto deg = degrees(core, edges);
  for (std::size_t v = 0; v < nv && !found; ++v) {
    if (deg[v] > 0 && order[v] < 0) visit(v, std::numeric_limits<std::size_t>::max());
  }
  return found;
}

/// Bridges the components of a disconnected loop with simple paths.
class ComplexSearch {
 public:
  ComplexSearch(const CoreGraph& core, std::size_t max_length, std::size_t max_depth,
                std::set<EdgeSet>& out)
      : core_(core), max_length_(max_length), max_depth_(max_depth), out_(out) {}

  struct Frame {
    EdgeSet loop;
    std::size_t length = 0;
    std::vector<int> label;
    int start = 0;
    int components = 0;
    std::vector<std::size_t> path_edges;
    std::vector<std::size_t> path_vertices;
    std::vector<char> on_path;
  };

  Frame frame(const EdgeSet& loop, const Components& comps, int start) const {
    Frame f;
    f.loop = loop;
    f.length = loop.count();
    f.label = comps.label;
    f.start = start;
    f.components = comps.count;
    f.on_path.assign(core_.num_vertices(), 0);
    return f;
  }

  /// Searches from every vertex of the start component, once per state.
  void grow(Frame& f) {
    if (!expanded_.emplace(f.loop, f.start).second) return;
    for (std::size_t v = 0; v < core_.num_vertices(); ++v) {
      if (f.label[v] == f.start) search_from(f, v);
    }
  }

  void search_from(Frame& f, std::size_t v) {
    if (max_depth_ == 0) return;
    f.path_edges.clear();
    f.path_vertices.clear();
    extend(f, v, 0);
  }

 private:
  void extend(Frame& f, std::size_t u, std::size_t depth) {
    for (const auto& [w, e] : core_.neighbors(u)) {
      if (f.loop.test(e)) continue;
      const std::size_t d = depth + 1;
      if (d > max_depth_ || f.length + d > max_length_) continue;
      if (f.label[w] >= 0) {
        if (f.label[w] != f.start) connect(f, w, e, d);
      } else if (!f.on_path[w]) {
        f.on_path[w] = 1;
        f.path_edges.push_back(e);
        f.path_vertices.push_back(w);
        extend(f, w, d);
        f.path_vertices.pop_back();
        f.path_edges.pop_back();
        f.on_path[w] = 0;
      }
    }
  }

  void connect(const Frame& f, std::size_t reached, std::size_t last_edge,
               std::size_t depth) {
    EdgeSet grown = f.loop;
    for (std::size_t e : f.path_edges) grown.set(e);
    grown.set(last_edge);
    // Partially bridged loops are kept too: a loop whose pieces are each
    // bridged can't come from any union the merge step forms.
    out_.insert(grown);
    if (f.components == 2) return;
    Frame next;
    next.loop = std::move(grown);
    next.length = f.length + depth;
    next.label = f.label;
    const int absorbed = f.label[reached];
    for (auto& l : next.label) {
      if (l == absorbed) l = f.start;
    }
    for (std::size_t v : f.path_vertices) next.label[v] = f.start;
    next.start = f.start;
    next.components = f.components - 1;
    next.on_path.assign(core_.num_vertices(), 0);
    grow(next);
  }

  const CoreGraph& core_;
  std::size_t max_length_;
  std::size_t max_depth_;
  std::set<EdgeSet>& out_;
  std::set<std::pair<EdgeSet, int>> expanded_;
};

/// Runs the complex-loop search for every component and vertex of `loop`.
void bridge_all(const CoreGraph& core, const EdgeSet& loop, const Components& comps,
                std::size_t max_length, std::size_t max_depth, std::set<EdgeSet>& out) {
  ComplexSearch search(core, max_length, max_depth, out);
  for (int c = 0; c < comps.count; ++c) {
    auto f = search.frame(loop, comps, c);
    search.grow(f);
  }
}

/// All simple cycles of length <= cap. Each cycle is reported once, rooted at
/// its smallest vertex and oriented towards the smaller of its two neighbors.
std::vector<EdgeSet> cycles_up_to(const CoreGraph& core, std::size_t cap) {
  const std::size_t nv = core.num_vertices();
  std::vector<EdgeSet> out;
  std::vector<char> on_path(nv, 0);
  std::vector<std::size_t> dist(nv);
  std::vector<std::size_t> path_edges;
  std::size_t first = 0;
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();

  for (std::size_t s = 0; s < nv; ++s) {
    // Distances back to s through vertices > s bound the remaining path.
    std::fill(dist.begin(), dist.end(), inf);
    std::vector<std::size_t> queue{s};
    dist[s] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const std::size_t u = queue[h];
      for (const auto& inc : core.neighbors(u)) {
        if (inc.vertex > s && dist[inc.vertex] == inf) {
          dist[inc.vertex] = dist[u] + 1;
          queue.push_back(inc.vertex);
        }
      }
    }

    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t u,
                                                             std::size_t depth) {
      for (const auto& [w, e] : core.neighbors(u)) {
        if (w == s) {
          if (depth >= 2 && first < u) {
            EdgeSet cycle(core.num_edges());
            for (std::size_t pe : path_edges) cycle.set(pe);
            cycle.set(e);
            out.push_back(std::move(cycle));
          }
          continue;
        }
        if (w < s || on_path[w] || dist[w] == inf || depth + 1 + dist[w] > cap) continue;
        if (depth == 0) first = w;
        on_path[w] = 1;
        path_edges.push_back(e);
        walk(w, depth + 1);
        path_edges.pop_back();
        on_path[w] = 0;
      }
    };
    on_path[s] = 1;
    walk(s, 0);
    on_path[s] = 0;
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

bool is_generalized_loop(const CoreGraph& core, std::span<const std::size_t> global_edges) {
  const EdgeSet set = to_edge_set(core, global_edges);
  if (set.none()) return false;
  const auto deg = degrees(core, set);
  return std::none_of(deg.begin(), deg.end(), [](int d) { return d == 1; });
}

LoopClass classify(const CoreGraph& core, const EdgeSet& loop) {
  const auto comps = components(core, loop);
  const auto deg = degrees(core, loop);
  LoopClass c;
  c.disconnected = comps.count >= 2;
  c.simple = comps.count == 1 &&
             std::all_of(deg.begin(), deg.end(), [](int d) { return d == 0 || d == 2; });
  // An edge lies on a cycle inside the loop iff it is not a bridge, so the
  // loop is a union of its simple cycles exactly when it has no bridge.
  c.complex = !c.simple && has_bridge(core, loop);
  return c;
}

LoopClass classify(const CoreGraph& core, const GeneralizedLoop& loop) {
  return classify(core, to_edge_set(core, loop.edges));
}

SimpleLoops simple_loops(const CoreGraph& core, std::size_t max_simple) {
  SimpleLoops result;
  if (core.empty() || max_simple == 0) return result;
  std::vector<EdgeSet> cycles;
  std::size_t cap = 4;
  while (true) {
    cap = std::min(cap, core.num_vertices());
    cycles = cycles_up_to(core, cap);
    if (cycles.size() >= max_simple || cap >= core.num_vertices()) break;
    cap += std::max<std::size_t>(2, cap / 4);
  }
  result.loops.reserve(cycles.size());
  for (const auto& c : cycles) result.loops.push_back(to_loop(core, c));
  std::sort(result.loops.begin(), result.loops.end());
  if (result.loops.size() > max_simple) result.loops.resize(max_simple);
  if (!result.loops.empty()) result.bound = result.loops.back().length();
  return result;
}

std::vector<GeneralizedLoop> merge_loops(const CoreGraph& core, const GeneralizedLoop& l1,
                                         const GeneralizedLoop& l2, std::size_t max_length,
                                         std::size_t max_depth) {
  const EdgeSet a = to_edge_set(core, l1.edges);
  const EdgeSet b = to_edge_set(core, l2.edges);
  if (a.union_count(b) > max_length) return {};
  const EdgeSet u = a | b;
  std::set<EdgeSet> found{u};
  const auto comps = components(core, u);
  if (comps.count > 1) bridge_all(core, u, comps, max_length, max_depth, found);
  std::vector<GeneralizedLoop> out;
  for (const auto& s : found) out.push_back(to_loop(core, s));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<GeneralizedLoop> complex_loops_dfs(const CoreGraph& core,
                                               const GeneralizedLoop& loop,
                                               std::size_t start_vertex,
                                               std::size_t max_length,
                                               std::size_t max_depth) {
  const EdgeSet set = to_edge_set(core, loop.edges);
  const auto comps = components(core, set);
  if (start_vertex >= core.num_vertices() || comps.label[start_vertex] < 0) {
    throw std::invalid_argument("complex_loops_dfs: start vertex is not on the loop");
  }
  std::set<EdgeSet> found;
  if (comps.count > 1) {
    ComplexSearch search(core, max_length, max_depth, found);
    auto f = search.frame(set, comps, comps.label[start_vertex]);
    search.search_from(f, start_vertex);
  }
  std::vector<GeneralizedLoop> out;
  for (const auto& s : found) out.push_back(to_loop(core, s));
  std::sort(out.begin(), out.end());
  return out;
}

EnumerationResult tlsbp_enumerate(const CoreGraph& core, const SearchBounds& bounds) {
  if (bounds.max_simple == 0) throw std::invalid_argument("tlsbp_enumerate: S must be >= 1");
  EnumerationResult result;
  result.max_simple = bounds.max_simple;
  result.max_depth = bounds.max_depth;
  if (core.empty()) return result;

  auto t0 = std::chrono::steady_clock::now();
  const SimpleLoops simple = simple_loops(core, bounds.max_simple);
  result.seconds_simple = seconds_since(t0);
  const std::size_t b = bounds.max_length.value_or(simple.bound);
  result.max_length = b;

  t0 = std::chrono::steady_clock::now();
  std::map<EdgeSet, std::size_t> store;  // loop -> discovery iteration
  std::vector<EdgeSet> seeds;
  for (const auto& loop : simple.loops) {
    if (loop.length() > b) continue;
    seeds.push_back(to_edge_set(core, loop.edges));
    store.emplace(seeds.back(), 0);
  }
  result.num_simple = seeds.size();

  // Iteration t merges every simple loop with the loops first seen in t-1.
  // A merge depends only on the union, so each union is expanded once.
  std::vector<EdgeSet> frontier = seeds;
  std::set<EdgeSet> merged;
  for (std::size_t iteration = 1; !frontier.empty(); ++iteration) {
    std::set<EdgeSet> fresh;
    std::set<EdgeSet> bridged;
    for (const auto& l1 : seeds) {
      for (const auto& l2 : frontier) {
        if (l1.union_count(l2) > b) continue;
        EdgeSet u = l1 | l2;
        if (!merged.insert(u).second) continue;
        const auto comps = components(core, u);
        if (!store.contains(u)) fresh.insert(u);
        if (comps.count > 1) {
          bridged.clear();
          bridge_all(core, u, comps, b, bounds.max_depth, bridged);
          for (auto& s : bridged) {
            if (!store.contains(s)) fresh.insert(s);
          }
        }
      }
    }
    if (fresh.empty()) break;
    result.iterations = iteration;
    result.new_per_iteration.push_back(fresh.size());
    frontier.assign(fresh.begin(), fresh.end());
    for (const auto& s : frontier) store.emplace(s, iteration);
  }
  result.seconds_merge = seconds_since(t0);

  std::vector<std::pair<GeneralizedLoop, std::size_t>> all;
  all.reserve(store.size());
  for (const auto& [set, iteration] : store) all.emplace_back(to_loop(core, set), iteration);
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  result.loops.reserve(all.size());
  result.discovered_in.reserve(all.size());
  for (auto& [loop, iteration] : all) {
    result.loops.push_back(std::move(loop));
    result.discovered_in.push_back(iteration);
  }
  return result;
}

LoopCensus census(const CoreGraph& core, std::span<const GeneralizedLoop> loops) {
  LoopCensus c;
  for (const auto& loop : loops) {
    const LoopClass k = classify(core, loop);
    ++c.total;
    ++c.length_histogram[loop.length()];
    if (k.simple) {
      ++c.simple;
    } else if (k.complex && k.disconnected) {
      ++c.complex_disconnected;
    } else if (k.complex) {
      ++c.complex_connected;
    } else if (k.disconnected) {
      ++c.disconnected_noncomplex;
    } else {
      ++c.neither;
    }
  }
  return c;
}

}  // namespace tlsbp
