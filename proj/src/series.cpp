#include "tlsbp/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace tlsbp {

DegenerateMagnetization::DegenerateMagnetization(VariableId var)
    : std::runtime_error("degenerate magnetization |m| = 1 at variable " +
                         std::to_string(var)),
      var_(var) {}

double guard_magnetization(double m) {
  return std::clamp(m, -kMagnetizationGuard, kMagnetizationGuard);
}

double mu_var(double m, int q, VariableId var) {
  if (!(std::abs(m) < 1.0)) throw DegenerateMagnetization(var);
  const int p = q - 1;
  const double sign = (q % 2 == 0) ? 1.0 : -1.0;
  const double num = std::pow(1.0 - m, p) + sign * std::pow(1.0 + m, p);
  return num / (2.0 * std::pow(1.0 - m * m, p));
}

double mu_factor(const FactorTable& table, std::span<const double> belief,
                 std::span<const std::size_t> loop_positions,
                 std::span<const double> magnetizations) {
  double total = 0.0;
  for (std::size_t x = 0; x < belief.size(); ++x) {
    if (belief[x] == 0.0) continue;
    double w = belief[x];
    for (std::size_t k = 0; k < loop_positions.size(); ++k) {
      const double spin = spin_of((x >> table.bit(loop_positions[k])) & 1U);
      w *= spin - magnetizations[k];
    }
    total += w;
  }
  return total;
}

bool LoopNodes::contains_variable(VariableId i) const {
  return std::any_of(variables.begin(), variables.end(),
                     [i](const Var& v) { return v.id == i; });
}

LoopNodes loop_nodes(const FactorGraph& g, const GeneralizedLoop& loop) {
  std::map<VariableId, int> q;
  std::map<FactorId, std::vector<VariableId>> facs;
  const auto edges = g.edges();
  for (std::size_t e : loop.edges) {
    const EdgeId edge = edges[e];
    ++q[edge.var];
    facs[edge.factor].push_back(edge.var);
  }
  LoopNodes nodes;
  for (auto [id, count] : q) nodes.variables.push_back({id, count});
  for (auto& [id, vars] : facs) nodes.factors.push_back({id, std::move(vars)});
  return nodes;
}

double loop_term(const FactorGraph& g, const BPResult& bp, const LoopNodes& nodes) {
  double r = 1.0;
  for (const auto& v : nodes.variables) {
    r *= mu_var(guard_magnetization(bp.magnetizations[v.id]), v.q, v.id);
  }
  std::vector<std::size_t> positions;
  std::vector<double> mags;
  for (const auto& f : nodes.factors) {
    const FactorTable& table = g.factor(f.id);
    positions.clear();
    mags.clear();
    for (VariableId i : f.vars) {
      const auto it = std::find(table.scope.begin(), table.scope.end(), i);
      if (it == table.scope.end()) {
        throw std::invalid_argument("loop edge (" + std::to_string(i) + ", " +
                                    std::to_string(f.id) + ") is not in the graph");
      }
      positions.push_back(static_cast<std::size_t>(it - table.scope.begin()));
      mags.push_back(bp.magnetizations[i]);
    }
    r *= mu_factor(table, bp.beliefs_fac[f.id], positions, mags);
  }
  return r;
}

std::vector<LoopTerm> loop_terms(const FactorGraph& g, const BPResult& bp,
                                 std::span<const GeneralizedLoop> loops) {
  std::vector<LoopTerm> terms;
  terms.reserve(loops.size());
  for (std::size_t k = 0; k < loops.size(); ++k) {
    terms.push_back({k, loops[k].length(), loop_term(g, bp, loop_nodes(g, loops[k]))});
  }
  return terms;
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    carry_ += (sum_ - t) + x;
  } else {
    carry_ += (x - t) + sum_;
  }
  sum_ = t;
}

double SeriesReport::log_z_partial(std::size_t l) const {
  if (l == 0) return log_z_bp;
  const double s = partial_sums[l - 1];
  return s > 0.0 ? log_z_bp + std::log(s) : std::numeric_limits<double>::quiet_NaN();
}

SeriesReport cumulative_series(double log_z_bp, std::vector<LoopTerm> terms) {
  std::sort(terms.begin(), terms.end(), [](const LoopTerm& a, const LoopTerm& b) {
    const double x = std::abs(a.value);
    const double y = std::abs(b.value);
    if (x != y) return x > y;
    return a.index < b.index;
  });
  SeriesReport report;
  report.log_z_bp = log_z_bp;
  report.partial_sums.reserve(terms.size());
  CompensatedSum sum;
  sum.add(1.0);
  for (const auto& t : terms) {
    sum.add(t.value);
    report.partial_sums.push_back(sum.value());
    report.negative_partial = report.negative_partial || sum.value() <= 0.0;
  }
  report.terms = std::move(terms);
  report.correction = sum.value();
  report.log_z_tlsbp = report.correction > 0.0
                           ? log_z_bp + std::log(report.correction)
                           : std::numeric_limits<double>::quiet_NaN();
  return report;
}

SeriesReport truncated_z(const BPResult& bp, std::vector<LoopTerm> terms) {
  return cumulative_series(bp.log_z_bp(), std::move(terms));
}

FactorGraph clamp(const FactorGraph& g, VariableId var, int state) {
  if (var >= g.num_variables()) throw std::invalid_argument("clamp: variable out of range");
  const std::size_t bit = state > 0 ? 1 : 0;
  std::vector<FactorTable> factors = g.factors();
  for (FactorId a : g.variable_factors(var)) {
    const FactorTable& src = g.factor(a);
    const auto pos = static_cast<std::size_t>(
        std::find(src.scope.begin(), src.scope.end(), var) - src.scope.begin());
    const std::size_t shift = src.bit(pos);
    FactorTable sliced;
    for (std::size_t p = 0; p < src.scope.size(); ++p) {
      if (p != pos) sliced.scope.push_back(src.scope[p]);
    }
    for (std::size_t x = 0; x < src.values.size(); ++x) {
      if (((x >> shift) & 1U) == bit) sliced.values.push_back(src.values[x]);
    }
    if (std::all_of(sliced.values.begin(), sliced.values.end(),
                    [](double v) { return v == 0.0; })) {
      throw std::domain_error("clamp: state " + std::to_string(state) +
                              " has zero probability at variable " + std::to_string(var));
    }
    factors[a] = std::move(sliced);
  }
  return FactorGraph(g.num_variables(), std::move(factors));
}

ClampedMarginals marginals_by_clamping(const FactorGraph& g,
                                       std::span<const GeneralizedLoop> loops,
                                       const BPResult& bp, const BPOptions& options) {
  const std::size_t n = g.num_variables();
  std::vector<LoopNodes> nodes;
  nodes.reserve(loops.size());
  for (const auto& loop : loops) nodes.push_back(loop_nodes(g, loop));

  ClampedMarginals out;
  out.beliefs.resize(n);
  out.fallback.assign(n, false);
  out.log_z_plus.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.log_z_minus.assign(n, std::numeric_limits<double>::quiet_NaN());

  for (VariableId i = 0; i < n; ++i) {
    double log_z[2] = {0.0, 0.0};
    bool ok = true;
    for (int s = 0; s < 2 && ok; ++s) {
      try {
        const FactorGraph clamped = clamp(g, i, s ? 1 : -1);
        const BPResult cbp = run_bp(clamped, options);
        if (!cbp.converged) {
          ok = false;
          break;
        }
        CompensatedSum sum;
        sum.add(1.0);
        for (const auto& ln : nodes) {
          if (!ln.contains_variable(i)) sum.add(loop_term(clamped, cbp, ln));
        }
        if (!(sum.value() > 0.0)) {
          ok = false;
          break;
        }
        // The clamped variable is left isolated and free, which doubles Z.
        log_z[s] = cbp.log_z_bp() + std::log(sum.value()) - std::numbers::ln2;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      out.fallback[i] = true;
      out.beliefs[i] = bp.beliefs_var[i];
      continue;
    }
    out.log_z_minus[i] = log_z[0];
    out.log_z_plus[i] = log_z[1];
    const double plus = 1.0 / (1.0 + std::exp(log_z[0] - log_z[1]));
    const double minus = 1.0 / (1.0 + std::exp(log_z[1] - log_z[0]));
    out.beliefs[i] = {minus, plus};
  }
  return out;
}

}  // namespace tlsbp
