#include "tlsbp/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tlsbp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct Incidence {
  std::size_t factor;
  std::size_t shift;
};

/// Enumerates states in Gray-code order inside fixed-size blocks, updating
/// the log weight incrementally and recomputing it at each block start.
class StateSum {
 public:
  StateSum(const FactorGraph& g, bool marginals) : g_(g), marginals_(marginals) {
    const std::size_t m = g.num_factors();
    log_values_.resize(m);
    zero_.resize(m);
    for (FactorId a = 0; a < m; ++a) {
      const auto& vals = g.factor(a).values;
      log_values_[a].resize(vals.size());
      zero_[a].resize(vals.size());
      for (std::size_t x = 0; x < vals.size(); ++x) {
        zero_[a][x] = vals[x] == 0.0;
        log_values_[a][x] = vals[x] > 0.0 ? std::log(vals[x]) : 0.0;
      }
    }
    incident_.resize(g.num_variables());
    for (FactorId a = 0; a < m; ++a) {
      const auto& f = g.factor(a);
      for (std::size_t p = 0; p < f.arity(); ++p) {
        incident_[f.scope[p]].push_back({a, f.bit(p)});
      }
    }
  }

  ExactResult run() {
    const std::size_t n = g_.num_variables();
    const std::size_t low_bits = std::min<std::size_t>(n, 12);
    const std::size_t block = std::size_t{1} << low_bits;
    const std::size_t blocks = std::size_t{1} << (n - low_bits);

    double log_z = kNegInf;
    std::vector<double> log_plus(marginals_ ? n : 0, kNegInf);
    std::vector<double> weights(block);
    std::vector<std::uint64_t> states(block);
    std::vector<double> plus(n);

    index_.assign(g_.num_factors(), 0);
    for (std::size_t hi = 0; hi < blocks; ++hi) {
      std::uint64_t state = static_cast<std::uint64_t>(hi) << low_bits;
      reset(state);
      double block_max = kNegInf;
      for (std::size_t t = 0; t < block; ++t) {
        if (t > 0) {
          const auto flip = static_cast<std::size_t>(__builtin_ctzll(t));
          state ^= std::uint64_t{1} << flip;
          toggle(flip, (state >> flip) & 1U);
        }
        const double w = zeros_ > 0 ? kNegInf : log_weight_;
        weights[t] = w;
        states[t] = state;
        block_max = std::max(block_max, w);
      }
      if (block_max == kNegInf) continue;
      double sum = 0.0;
      std::fill(plus.begin(), plus.end(), 0.0);
      for (std::size_t t = 0; t < block; ++t) {
        if (weights[t] == kNegInf) continue;
        const double w = std::exp(weights[t] - block_max);
        sum += w;
        if (marginals_) {
          for (std::size_t i = 0; i < n; ++i) {
            if ((states[t] >> i) & 1U) plus[i] += w;
          }
        }
      }
      log_z = log_add(log_z, block_max + std::log(sum));
      if (marginals_) {
        for (std::size_t i = 0; i < n; ++i) {
          if (plus[i] > 0.0) log_plus[i] = log_add(log_plus[i], block_max + std::log(plus[i]));
        }
      }
    }

    ExactResult result;
    result.log_z = log_z;
    if (marginals_) {
      result.marginals.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = log_plus[i] == kNegInf ? 0.0 : std::exp(log_plus[i] - log_z);
        result.marginals[i] = {1.0 - p, p};
      }
    }
    return result;
  }

 private:
  void reset(std::uint64_t state) {
    log_weight_ = 0.0;
    zeros_ = 0;
    for (FactorId a = 0; a < g_.num_factors(); ++a) {
      const auto& f = g_.factor(a);
      std::size_t x = 0;
      for (std::size_t p = 0; p < f.arity(); ++p) {
        x |= static_cast<std::size_t>((state >> f.scope[p]) & 1U) << f.bit(p);
      }
      index_[a] = x;
      zeros_ += zero_[a][x];
      log_weight_ += log_values_[a][x];
    }
  }

  void toggle(std::size_t var, bool now_set) {
    for (const auto& [a, shift] : incident_[var]) {
      const std::size_t old = index_[a];
      const std::size_t x = now_set ? (old | (std::size_t{1} << shift))
                                    : (old & ~(std::size_t{1} << shift));
      index_[a] = x;
      zeros_ += zero_[a][x] - zero_[a][old];
      log_weight_ += log_values_[a][x] - log_values_[a][old];
    }
  }

  const FactorGraph& g_;
  bool marginals_;
  std::vector<std::vector<double>> log_values_;
  std::vector<std::vector<int>> zero_;
  std::vector<std::vector<Incidence>> incident_;
  std::vector<std::size_t> index_;
  double log_weight_ = 0.0;
  int zeros_ = 0;
};

void check_ceiling(const FactorGraph& g, std::size_t ceiling) {
  if (g.num_variables() > ceiling) {
    throw CeilingExceeded("exact enumeration limited to " + std::to_string(ceiling) +
                          " variables, model has " + std::to_string(g.num_variables()));
  }
}

}  // namespace

double exact_z(const FactorGraph& g, std::size_t ceiling) {
  check_ceiling(g, ceiling);
  return StateSum(g, false).run().log_z;
}

ExactResult exact_marginals(const FactorGraph& g, std::size_t ceiling) {
  check_ceiling(g, ceiling);
  return StateSum(g, true).run();
}

std::vector<CensusEntry> enumerate_all_loops_bruteforce(const CoreGraph& core,
                                                        std::size_t ceiling) {
  const std::size_t ne = core.num_edges();
  if (ne > ceiling) {
    throw CeilingExceeded("loop census limited to " + std::to_string(ceiling) +
                          " core edges, core has " + std::to_string(ne));
  }
  std::vector<std::uint32_t> incident(core.num_vertices(), 0);
  for (std::size_t e = 0; e < ne; ++e) {
    incident[core.edge(e).variable_vertex] |= 1U << e;
    incident[core.edge(e).factor_vertex] |= 1U << e;
  }
  std::vector<CensusEntry> out;
  const std::uint32_t limit = ne == 0 ? 0 : (1U << ne);
  for (std::uint32_t mask = 1; mask < limit; ++mask) {
    const bool valid = std::none_of(incident.begin(), incident.end(), [mask](std::uint32_t inc) {
      return __builtin_popcount(mask & inc) == 1;
    });
    if (!valid) continue;
    EdgeSet set(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      if ((mask >> e) & 1U) set.set(e);
    }
    out.push_back({to_loop(core, set), classify(core, set)});
  }
  std::sort(out.begin(), out.end(),
            [](const CensusEntry& a, const CensusEntry& b) { return a.loop < b.loop; });
  return out;
}

}  // namespace tlsbp
