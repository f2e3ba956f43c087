#include "tlsbp/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace tlsbp {

ParseError::ParseError(std::size_t line, const std::string& what)
    : GraphError("line " + std::to_string(line) + ": " + what), line_(line) {}

FactorGraph::FactorGraph(std::size_t num_variables,
                         std::vector<FactorTable> factors)
    : num_variables_(num_variables), factors_(std::move(factors)) {
  var_factors_.resize(num_variables_);
  scope_edges_.resize(factors_.size());

  for (FactorId a = 0; a < factors_.size(); ++a) {
    const FactorTable& f = factors_[a];
    const std::string where = "factor " + std::to_string(a) + ": ";
    if (f.scope.size() >= 8 * sizeof(std::size_t) - 1) {
      throw GraphError(where + "scope too large");
    }
    for (std::size_t p = 0; p < f.scope.size(); ++p) {
      if (f.scope[p] >= num_variables_) {
        throw GraphError(where + "variable index " + std::to_string(f.scope[p]) +
                         " out of range");
      }
      for (std::size_t q = 0; q < p; ++q) {
        if (f.scope[q] == f.scope[p]) {
          throw GraphError(where + "duplicate variable " +
                           std::to_string(f.scope[p]) + " in scope");
        }
      }
    }
    const std::size_t expected = std::size_t{1} << f.scope.size();
    if (f.values.size() != expected) {
      throw GraphError(where + "table has " + std::to_string(f.values.size()) +
                       " entries, expected " + std::to_string(expected));
    }
    bool any_positive = false;
    for (double v : f.values) {
      if (!std::isfinite(v) || v < 0.0) {
        throw GraphError(where + "table entries must be finite and non-negative");
      }
      any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) throw GraphError(where + "all-zero table");

    for (VariableId i : f.scope) var_factors_[i].push_back(a);
  }

  // Factor-major order: within a factor, edges are ranked by variable id.
  for (FactorId a = 0; a < factors_.size(); ++a) {
    const auto& scope = factors_[a].scope;
    std::vector<std::size_t> order(scope.size());
    for (std::size_t p = 0; p < scope.size(); ++p) order[p] = p;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return scope[x] < scope[y]; });
    scope_edges_[a].resize(scope.size());
    for (std::size_t p : order) {
      scope_edges_[a][p] = edges_.size();
      edges_.push_back({a, scope[p]});
    }
  }
}

std::optional<std::size_t> FactorGraph::find_edge(EdgeId e) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
  if (it == edges_.end() || *it != e) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

TwoCore TwoCore::full(const FactorGraph& g) {
  TwoCore c;
  c.variables.assign(g.num_variables(), true);
  c.factors.assign(g.num_factors(), true);
  c.edges.assign(g.num_edges(), true);
  c.num_variables = g.num_variables();
  c.num_factors = g.num_factors();
  c.num_edges = g.num_edges();
  return c;
}

TwoCore two_core(const FactorGraph& g) { return two_core(g, TwoCore::full(g)); }

TwoCore two_core(const FactorGraph& g, const TwoCore& within) {
  const std::size_t n = g.num_variables();
  TwoCore c = within;
  // Node ids: variables [0, n), factors [n, n + m).
  std::vector<std::size_t> degree(n + g.num_factors(), 0);
  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!c.edges[e]) continue;
    ++degree[edges[e].var];
    ++degree[n + edges[e].factor];
  }
  auto alive = [&](std::size_t node) {
    return node < n ? bool(c.variables[node]) : bool(c.factors[node - n]);
  };

  std::vector<std::size_t> stack;
  for (std::size_t v = 0; v < degree.size(); ++v) {
    if (alive(v) && degree[v] <= 1) stack.push_back(v);
  }
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (!alive(v)) continue;
    if (v < n) {
      c.variables[v] = false;
      for (FactorId a : g.variable_factors(v)) {
        const auto e = *g.find_edge({a, v});
        if (!c.edges[e]) continue;
        c.edges[e] = false;
        if (--degree[n + a] <= 1 && c.factors[a]) stack.push_back(n + a);
      }
    } else {
      const FactorId a = v - n;
      c.factors[a] = false;
      const auto& scope = g.factor(a).scope;
      for (std::size_t p = 0; p < scope.size(); ++p) {
        const auto e = g.edge_index(a, p);
        if (!c.edges[e]) continue;
        c.edges[e] = false;
        if (--degree[scope[p]] <= 1 && c.variables[scope[p]]) {
          stack.push_back(scope[p]);
        }
      }
    }
  }

  c.num_variables = static_cast<std::size_t>(
      std::count(c.variables.begin(), c.variables.end(), true));
  c.num_factors = static_cast<std::size_t>(
      std::count(c.factors.begin(), c.factors.end(), true));
  c.num_edges =
      static_cast<std::size_t>(std::count(c.edges.begin(), c.edges.end(), true));
  return c;
}

void save(const FactorGraph& g, std::ostream& out,
          const std::vector<std::string>& header_comments) {
  for (const auto& line : header_comments) out << "# " << line << '\n';
  out << g.num_variables() << ' ' << g.num_factors() << '\n';
  std::ostringstream buf;
  buf << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const FactorTable& f : g.factors()) {
    buf.str("");
    buf << f.scope.size() << '\n';
    if (!f.scope.empty()) {
      for (std::size_t p = 0; p < f.scope.size(); ++p) {
        buf << (p ? " " : "") << f.scope[p];
      }
      buf << '\n';
    }
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      buf << (k ? " " : "") << f.values[k];
    }
    buf << '\n';
    out << buf.str();
  }
}

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::istream& in) {
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    Line line{number, {}};
    for (std::string tok; ss >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::size_t parse_count(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!tok.empty() && tok[0] == '-') throw std::invalid_argument(tok);
    v = std::stoull(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a non-negative integer, got '" + tok + "'");
  }
  if (used != tok.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a real number, got '" + tok + "'");
  }
  if (used != tok.size()) {
    throw ParseError(line, "expected a real number, got '" + tok + "'");
  }
  return v;
}

}  // namespace

FactorGraph load(std::istream& in) {
  const auto lines = tokenize(in);
  std::size_t cursor = 0;
  auto next = [&](const char* what) -> const Line& {
    if (cursor >= lines.size()) {
      const std::size_t last = lines.empty() ? 0 : lines.back().number;
      throw ParseError(last, std::string("unexpected end of input, expected ") + what);
    }
    return lines[cursor++];
  };

  const Line& header = next("header `n m`");
  if (header.tokens.size() != 2) {
    throw ParseError(header.number, "header must be `n m`");
  }
  const std::size_t n = parse_count(header.tokens[0], header.number);
  const std::size_t m = parse_count(header.tokens[1], header.number);

  std::vector<FactorTable> factors;
  factors.reserve(m);
  for (std::size_t a = 0; a < m; ++a) {
    const Line& size_line = next("factor scope size");
    if (size_line.tokens.size() != 1) {
      throw ParseError(size_line.number, "expected a single scope size");
    }
    const std::size_t k = parse_count(size_line.tokens[0], size_line.number);
    if (k > 30) throw ParseError(size_line.number, "scope size too large");
    FactorTable f;
    if (k > 0) {
      const Line& scope_line = next("scope indices");
      if (scope_line.tokens.size() != k) {
        throw ParseError(scope_line.number,
                         "expected " + std::to_string(k) + " scope indices");
      }
      for (const auto& tok : scope_line.tokens) {
        f.scope.push_back(parse_count(tok, scope_line.number));
      }
    }
    const Line& values_line = next("table values");
    const std::size_t expected = std::size_t{1} << k;
    if (values_line.tokens.size() != expected) {
      throw ParseError(values_line.number,
                       "expected " + std::to_string(expected) + " table values, got " +
                           std::to_string(values_line.tokens.size()));
    }
    for (const auto& tok : values_line.tokens) {
      f.values.push_back(parse_real(tok, values_line.number));
    }
    factors.push_back(std::move(f));
  }
  if (cursor != lines.size()) {
    throw ParseError(lines[cursor].number,
                     "trailing content after " + std::to_string(m) + " factor blocks");
  }
  return FactorGraph(n, std::move(factors));
}

void save_file(const FactorGraph& g, const std::string& path,
               const std::vector<std::string>& header_comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(g, out, header_comments);
}

FactorGraph load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load(in);
}

}  // namespace tlsbp
