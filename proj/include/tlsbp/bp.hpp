#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsbp/factor_graph.hpp"

namespace tlsbp {

enum class ScheduleKind { fixed_sequential, random_sequential, parallel, residual };

struct Schedule {
  ScheduleKind kind = ScheduleKind::fixed_sequential;
  std::uint64_t seed = 0;  // random_sequential only
};

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule(const std::string& name);

struct BPOptions {
  Schedule schedule;
  double tol = 1e-17;
  std::size_t max_iter = 10000;
};

using Belief2 = std::array<double, 2>;

struct BetheTerms {
  double energy = 0.0;   // U_BP
  double entropy = 0.0;  // H_BP
  double free_energy = 0.0;
  double log_z = 0.0;
  /// A factor belief puts mass on a zero table entry; log_z is -inf.
  bool infinite_energy = false;
};

struct BPResult {
  bool converged = false;
  std::size_t iterations = 0;
  double final_max_update = 0.0;
  std::vector<Belief2> beliefs_var;
  std::vector<std::vector<double>> beliefs_fac;
  std::vector<double> magnetizations;
  BetheTerms bethe;

  double log_z_bp() const { return bethe.log_z; }
};

/// Thrown when a message normalizer is zero or non-finite.
class NonFiniteMessage : public std::runtime_error {
 public:
  NonFiniteMessage(EdgeId edge, bool to_factor);
  EdgeId edge() const { return edge_; }

 private:
  EdgeId edge_;
};

/// Message ids: 2 * edge + 0 for variable->factor, 2 * edge + 1 for
/// factor->variable, where `edge` is the global edge index. Message order is
/// therefore EdgeId order.
inline std::size_t var_to_factor(std::size_t edge) { return 2 * edge; }
inline std::size_t factor_to_var(std::size_t edge) { return 2 * edge + 1; }
inline std::size_t message_edge(std::size_t msg) { return msg / 2; }
inline bool is_factor_to_var(std::size_t msg) { return (msg & 1U) != 0; }

/// Normalized linear-space messages of one BP run over a fixed graph.
class MessageState {
 public:
  explicit MessageState(const FactorGraph& g);

  const FactorGraph& graph() const { return *graph_; }
  std::size_t num_messages() const { return messages_.size(); }

  const Belief2& value(std::size_t msg) const { return messages_[msg]; }
  /// Value the update equations would assign to `msg` right now.
  Belief2 recompute(std::size_t msg) const;
  /// Stores the recomputed value; returns the L-infinity change.
  double apply(std::size_t msg);
  void assign(std::size_t msg, const Belief2& value) { messages_[msg] = value; }
  /// Messages whose recomputed value reads `msg`.
  std::span<const std::size_t> dependents(std::size_t msg) const {
    return dependents_[msg];
  }

  std::vector<Belief2> variable_beliefs() const;
  std::vector<std::vector<double>> factor_beliefs() const;

 private:
  const FactorGraph* graph_;
  std::vector<Belief2> messages_;
  std::vector<std::vector<std::size_t>> dependents_;
};

/// Max-residual priority queue. Residual is the L-infinity distance between
/// a stored message and its recomputed value; ties go to the smallest id.
class ResidualQueue {
 public:
  explicit ResidualQueue(MessageState& state);

  double top_residual() const;
  double residual(std::size_t msg) const { return residual_[msg]; }
  /// Pops the message with the largest residual.
  std::size_t next_message();
  /// Applies `msg` and refreshes the residuals of its dependents only.
  /// Returns the size of the applied change.
  double update(std::size_t msg);

 private:
  struct Order {
    bool operator()(const std::pair<double, std::size_t>& a,
                    const std::pair<double, std::size_t>& b) const {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    }
  };

  void refresh(std::size_t msg);

  MessageState* state_;
  std::vector<double> residual_;
  std::set<std::pair<double, std::size_t>, Order> queue_;
};

BPResult run_bp(const FactorGraph& g, const BPOptions& options = {});

/// Bethe energy, entropy and free energy of the given beliefs.
BetheTerms bethe_free_energy(const FactorGraph& g, std::span<const Belief2> beliefs_var,
                             std::span<const std::vector<double>> beliefs_fac);

}  // namespace tlsbp
