#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tlsbp/bp.hpp"
#include "tlsbp/exact.hpp"
#include "tlsbp/factor_graph.hpp"
#include "tlsbp/loops.hpp"
#include "tlsbp/model_gen.hpp"
#include "tlsbp/series.hpp"

namespace tlsbp {

/// |log Z' - log Z|.
double error_z(double log_z_est, double log_z_exact);
/// |log Z' / log Z|; nullopt when log Z is zero.
std::optional<double> error_z_ratio(double log_z_est, double log_z_exact);
/// max over i and s of |P_i(s) - b_i(s)|.
double error_marginals(std::span<const Belief2> est, std::span<const Belief2> exact);

struct RunOptions {
  BPOptions bp;
  bool tlsbp = true;
  SearchBounds bounds;
  bool marginals = false;
  bool exact = false;
  std::size_t exact_ceiling = kExactVariableCeiling;
};

struct StageTimings {
  double bp = 0.0;
  double two_core = 0.0;
  double simple_loops = 0.0;
  double merging = 0.0;
  double terms = 0.0;
  double marginals = 0.0;
  double exact = 0.0;
};

struct TlsbpSection {
  std::size_t max_simple = 0;
  std::size_t max_depth = 0;
  std::size_t max_length = 0;
  std::size_t core_variables = 0;
  std::size_t core_factors = 0;
  std::size_t core_edges = 0;
  std::size_t num_loops = 0;
  std::size_t num_simple = 0;
  std::size_t iterations = 0;
  double correction = 1.0;
  double log_z = 0.0;  // NaN when the correction is not positive
  bool negative = false;
  std::vector<VariableId> clipped;  // variables whose |m| hit the guard
  std::optional<ClampedMarginals> marginals;
};

struct ExactSection {
  double log_z = 0.0;
  std::vector<Belief2> marginals;
};

struct ErrorSection {
  double z_bp = 0.0;
  std::optional<double> z_ratio_bp;
  std::optional<double> z_tlsbp;
  std::optional<double> z_ratio_tlsbp;
  double marginals_bp = 0.0;
  std::optional<double> marginals_tlsbp;
};

struct ExperimentReport {
  std::map<std::string, std::string> model;  // generator metadata
  std::size_t num_variables = 0;
  std::size_t num_factors = 0;
  RunOptions options;
  bool bp_ran = true;
  BPResult bp;
  std::optional<TlsbpSection> tlsbp;
  std::optional<SeriesReport> series;
  std::vector<GeneralizedLoop> loops;  // the loop set the series was built from
  std::optional<ExactSection> exact;
  std::optional<ErrorSection> errors;
  StageTimings timings;
};

/// BP, then optionally TLSBP, clamped marginals and the brute-force oracle.
ExperimentReport run_experiment(const FactorGraph& g, const RunOptions& options,
                                std::map<std::string, std::string> model = {});

/// Report of the oracle alone, in the same schema.
ExperimentReport exact_report(const FactorGraph& g, std::size_t ceiling,
                              std::map<std::string, std::string> model = {});

/// Timings are only serialized on request so reports stay byte-reproducible.
nlohmann::ordered_json to_json(const ExperimentReport& report, bool timings = false);
/// Two-line CSV: header of scalar fields and one row of values.
std::string to_csv(const ExperimentReport& report, bool timings = false);

/// `rank key length r partial_sum log_z_partial`, one row per term.
nlohmann::ordered_json series_json(const SeriesReport& series,
                                   std::span<const GeneralizedLoop> loops);
std::string series_csv(const SeriesReport& series, std::span<const GeneralizedLoop> loops);

/// Generator metadata stored as `# key: value` header comments.
std::vector<std::string> metadata_comments(const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> read_metadata(const std::string& path);

std::map<std::string, std::string> ising_metadata(std::size_t side, const CouplingSpec& spec);
std::map<std::string, std::string> regular_metadata(std::size_t n, std::size_t degree,
                                                    const CouplingSpec& spec);

struct SweepOptions {
  std::vector<std::size_t> sizes;
  std::vector<double> sigmas;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  CouplingFamily family = CouplingFamily::spin_glass;
  double field_mean = 0.0;
  double field_std = 0.05;
  RunOptions run;
};

struct Quantiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

struct SweepRow {
  std::size_t size = 0;
  double sigma = 0.0;
  std::size_t instances = 0;
  std::size_t converged = 0;
  std::size_t tlsbp_better = 0;  // instances where TLSBP beats BP on Z
  Quantiles error_z_bp;
  Quantiles error_z_tlsbp;
  Quantiles error_b_bp;
  std::optional<Quantiles> error_b_tlsbp;
  Quantiles num_loops;
};

/// Linear-interpolated quantile of unsorted values; NaN when empty.
double quantile(std::vector<double> values, double q);

std::vector<SweepRow> run_sweep(const SweepOptions& options);
nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace tlsbp
