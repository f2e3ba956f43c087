#include "tlsbp/bp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlsbp/model_gen.hpp"

namespace tlsbp {

namespace {

std::string describe(EdgeId e, bool to_factor) {
  const std::string var = "variable " + std::to_string(e.var);
  const std::string fac = "factor " + std::to_string(e.factor);
  return "non-finite message " + (to_factor ? var + " -> " + fac : fac + " -> " + var);
}

double linf(const Belief2& a, const Belief2& b) {
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

}  // namespace

NonFiniteMessage::NonFiniteMessage(EdgeId edge, bool to_factor)
    : std::runtime_error(describe(edge, to_factor)), edge_(edge) {}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::fixed_sequential: return "fixed";
    case ScheduleKind::random_sequential: return "random";
    case ScheduleKind::parallel: return "parallel";
    case ScheduleKind::residual: return "residual";
  }
  return "fixed";
}

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "fixed" || name == "fixed_sequential") return ScheduleKind::fixed_sequential;
  if (name == "random" || name == "random_sequential") return ScheduleKind::random_sequential;
  if (name == "parallel") return ScheduleKind::parallel;
  if (name == "residual") return ScheduleKind::residual;
  throw std::invalid_argument("unknown schedule '" + name + "'");
}

MessageState::MessageState(const FactorGraph& g)
    : graph_(&g), messages_(2 * g.num_edges(), Belief2{0.5, 0.5}),
      dependents_(2 * g.num_edges()) {
  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, i] = edges[e];
    // i -> a feeds a -> j for the other scope members j.
    const auto& scope = g.factor(a).scope;
    for (std::size_t p = 0; p < scope.size(); ++p) {
      const std::size_t other = g.edge_index(a, p);
      if (other != e) dependents_[var_to_factor(e)].push_back(factor_to_var(other));
    }
    // a -> i feeds i -> b for the other factors b of i.
    for (FactorId b : g.variable_factors(i)) {
      if (b == a) continue;
      dependents_[factor_to_var(e)].push_back(var_to_factor(*g.find_edge({b, i})));
    }
  }
  for (auto& deps : dependents_) std::sort(deps.begin(), deps.end());
}

Belief2 MessageState::recompute(std::size_t msg) const {
  const FactorGraph& g = *graph_;
  const std::size_t e = message_edge(msg);
  const EdgeId edge = g.edges()[e];
  Belief2 out{0.0, 0.0};

  if (!is_factor_to_var(msg)) {
    out = {1.0, 1.0};
    for (FactorId b : g.variable_factors(edge.var)) {
      if (b == edge.factor) continue;
      const Belief2& in = messages_[factor_to_var(*g.find_edge({b, edge.var}))];
      out[0] *= in[0];
      out[1] *= in[1];
    }
  } else {
    const FactorTable& f = g.factor(edge.factor);
    const std::size_t k = f.arity();
    std::size_t target = 0;
    std::vector<const Belief2*> incoming(k, nullptr);
    for (std::size_t p = 0; p < k; ++p) {
      const std::size_t ep = g.edge_index(edge.factor, p);
      if (ep == e) {
        target = p;
      } else {
        incoming[p] = &messages_[var_to_factor(ep)];
      }
    }
    for (std::size_t x = 0; x < f.values.size(); ++x) {
      double w = f.values[x];
      if (w == 0.0) continue;
      for (std::size_t p = 0; p < k; ++p) {
        if (p != target) w *= (*incoming[p])[(x >> f.bit(p)) & 1U];
      }
      out[(x >> f.bit(target)) & 1U] += w;
    }
  }

  const double z = out[0] + out[1];
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw NonFiniteMessage(edge, !is_factor_to_var(msg));
  }
  out[0] /= z;
  out[1] /= z;
  return out;
}

double MessageState::apply(std::size_t msg) {
  const Belief2 fresh = recompute(msg);
  const double change = linf(fresh, messages_[msg]);
  messages_[msg] = fresh;
  return change;
}

std::vector<Belief2> MessageState::variable_beliefs() const {
  const FactorGraph& g = *graph_;
  std::vector<Belief2> beliefs(g.num_variables(), Belief2{1.0, 1.0});
  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Belief2& in = messages_[factor_to_var(e)];
    beliefs[edges[e].var][0] *= in[0];
    beliefs[edges[e].var][1] *= in[1];
  }
  for (VariableId i = 0; i < beliefs.size(); ++i) {
    const double z = beliefs[i][0] + beliefs[i][1];
    if (!(z > 0.0) || !std::isfinite(z)) {
      throw std::runtime_error("degenerate belief at variable " + std::to_string(i));
    }
    beliefs[i][0] /= z;
    beliefs[i][1] /= z;
  }
  return beliefs;
}

std::vector<std::vector<double>> MessageState::factor_beliefs() const {
  const FactorGraph& g = *graph_;
  std::vector<std::vector<double>> beliefs(g.num_factors());
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const FactorTable& f = g.factor(a);
    auto& b = beliefs[a];
    b.resize(f.values.size());
    double z = 0.0;
    for (std::size_t x = 0; x < f.values.size(); ++x) {
      double w = f.values[x];
      for (std::size_t p = 0; p < f.arity() && w != 0.0; ++p) {
        w *= messages_[var_to_factor(g.edge_index(a, p))][(x >> f.bit(p)) & 1U];
      }
      b[x] = w;
      z += w;
    }
    if (!(z > 0.0) || !std::isfinite(z)) {
      throw std::runtime_error("degenerate belief at factor " + std::to_string(a));
    }
    for (double& v : b) v /= z;
  }
  return beliefs;
}

ResidualQueue::ResidualQueue(MessageState& state)
    : state_(&state), residual_(state.num_messages(), 0.0) {
  for (std::size_t msg = 0; msg < residual_.size(); ++msg) {
    residual_[msg] = linf(state.recompute(msg), state.value(msg));
    queue_.emplace(residual_[msg], msg);
  }
}

double ResidualQueue::top_residual() const {
  return queue_.empty() ? 0.0 : queue_.begin()->first;
}

std::size_t ResidualQueue::next_message() {
  const auto it = queue_.begin();
  const std::size_t msg = it->second;
  queue_.erase(it);
  residual_[msg] = 0.0;
  queue_.emplace(0.0, msg);
  return msg;
}

void ResidualQueue::refresh(std::size_t msg) {
  const double r = linf(state_->recompute(msg), state_->value(msg));
  if (r == residual_[msg]) return;
  queue_.erase({residual_[msg], msg});
  residual_[msg] = r;
  queue_.emplace(r, msg);
}

double ResidualQueue::update(std::size_t msg) {
  const double change = state_->apply(msg);
  refresh(msg);
  for (std::size_t dep : state_->dependents(msg)) refresh(dep);
  return change;
}

namespace {

double sequential_sweep(MessageState& state, std::span<const FactorId> order) {
  const FactorGraph& g = state.graph();
  double max_change = 0.0;
  for (FactorId a : order) {
    const std::size_t k = g.factor(a).arity();
    for (std::size_t p = 0; p < k; ++p) {
      max_change = std::max(max_change, state.apply(var_to_factor(g.edge_index(a, p))));
    }
    for (std::size_t p = 0; p < k; ++p) {
      max_change = std::max(max_change, state.apply(factor_to_var(g.edge_index(a, p))));
    }
  }
  return max_change;
}

double parallel_sweep(MessageState& state, std::vector<Belief2>& scratch) {
  const std::size_t count = state.num_messages();
  scratch.resize(count);
  for (std::size_t msg = 0; msg < count; ++msg) scratch[msg] = state.recompute(msg);
  double max_change = 0.0;
  for (std::size_t msg = 0; msg < count; ++msg) {
    max_change = std::max(max_change, linf(scratch[msg], state.value(msg)));
    state.assign(msg, scratch[msg]);
  }
  return max_change;
}

}  // namespace

BPResult run_bp(const FactorGraph& g, const BPOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("run_bp: tol must be > 0");
  MessageState state(g);
  BPResult result;

  const auto kind = options.schedule.kind;
  if (kind == ScheduleKind::residual) {
    ResidualQueue queue(state);
    const std::size_t per_sweep = std::max<std::size_t>(state.num_messages(), 1);
    while (true) {
      if (queue.top_residual() < options.tol) {
        result.converged = true;
        break;
      }
      if (result.iterations >= options.max_iter) break;
      double max_change = 0.0;
      for (std::size_t k = 0; k < per_sweep && queue.top_residual() >= options.tol; ++k) {
        max_change = std::max(max_change, queue.update(queue.next_message()));
      }
      ++result.iterations;
      result.final_max_update = max_change;
    }
  } else {
    std::vector<FactorId> order(g.num_factors());
    std::iota(order.begin(), order.end(), FactorId{0});
    SplitMix64 rng(options.schedule.seed);
    std::vector<Belief2> scratch;
    while (result.iterations < options.max_iter) {
      double max_change = 0.0;
      if (kind == ScheduleKind::parallel) {
        max_change = parallel_sweep(state, scratch);
      } else {
        if (kind == ScheduleKind::random_sequential) {
          for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[rng.below(k)]);
          }
        }
        max_change = sequential_sweep(state, order);
      }
      ++result.iterations;
      result.final_max_update = max_change;
      if (max_change < options.tol) {
        result.converged = true;
        break;
      }
    }
  }

  result.beliefs_var = state.variable_beliefs();
  result.beliefs_fac = state.factor_beliefs();
  result.magnetizations.resize(g.num_variables());
  for (VariableId i = 0; i < g.num_variables(); ++i) {
    result.magnetizations[i] = result.beliefs_var[i][1] - result.beliefs_var[i][0];
  }
  result.bethe = bethe_free_energy(g, result.beliefs_var, result.beliefs_fac);
  return result;
}

BetheTerms bethe_free_energy(const FactorGraph& g, std::span<const Belief2> beliefs_var,
                             std::span<const std::vector<double>> beliefs_fac) {
  BetheTerms t;
  double energy = 0.0;
  double entropy = 0.0;
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const auto& f = g.factor(a).values;
    const auto& b = beliefs_fac[a];
    for (std::size_t x = 0; x < f.size(); ++x) {
      if (b[x] <= 0.0) continue;
      if (f[x] == 0.0) {
        t.infinite_energy = true;
        continue;
      }
      energy -= b[x] * std::log(f[x]);
      entropy -= b[x] * std::log(b[x]);
    }
  }
  for (VariableId i = 0; i < g.num_variables(); ++i) {
    const double weight = static_cast<double>(g.degree(i)) - 1.0;
    for (double p : beliefs_var[i]) {
      if (p > 0.0) entropy += weight * p * std::log(p);
    }
  }
  t.energy = energy;
  t.entropy = entropy;
  if (t.infinite_energy) {
    t.energy = std::numeric_limits<double>::infinity();
    t.free_energy = std::numeric_limits<double>::infinity();
    t.log_z = -std::numeric_limits<double>::infinity();
  } else {
    t.free_energy = energy - entropy;
    t.log_z = -t.free_energy;
  }
  return t;
}

}  // namespace tlsbp
