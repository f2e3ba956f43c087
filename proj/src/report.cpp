#include "tlsbp/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tlsbp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& x) {
  return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json marginals_json(std::span<const Belief2> beliefs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : beliefs) arr.push_back({b[0], b[1]});
  return arr;
}

std::string format_real(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  std::ostringstream out;
  out << std::setprecision(17) << x;
  return out.str();
}

std::string format_optional(const std::optional<double>& x) {
  return x ? format_real(*x) : "";
}

nlohmann::ordered_json quantiles_json(const Quantiles& q) {
  return {{"q25", number_or_null(q.q25)},
          {"median", number_or_null(q.median)},
          {"q75", number_or_null(q.q75)}};
}

Quantiles quantiles_of(const std::vector<double>& v) {
  return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

}  // namespace

double error_z(double log_z_est, double log_z_exact) {
  return std::abs(log_z_est - log_z_exact);
}

std::optional<double> error_z_ratio(double log_z_est, double log_z_exact) {
  if (log_z_exact == 0.0) return std::nullopt;
  return std::abs(log_z_est / log_z_exact);
}

double error_marginals(std::span<const Belief2> est, std::span<const Belief2> exact) {
  if (est.size() != exact.size()) {
    throw std::invalid_argument("error_marginals: variable sets differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    for (int s = 0; s < 2; ++s) worst = std::max(worst, std::abs(est[i][s] - exact[i][s]));
  }
  return worst;
}

ExperimentReport run_experiment(const FactorGraph& g, const RunOptions& options,
                                std::map<std::string, std::string> model) {
  ExperimentReport r;
  r.model = std::move(model);
  r.num_variables = g.num_variables();
  r.num_factors = g.num_factors();
  r.options = options;

  auto t0 = Clock::now();
  r.bp = run_bp(g, options.bp);
  r.timings.bp = seconds_since(t0);

  if (options.tlsbp) {
    t0 = Clock::now();
    const TwoCore core_mask = two_core(g);
    const CoreGraph core(g, core_mask);
    r.timings.two_core = seconds_since(t0);

    const EnumerationResult loops = tlsbp_enumerate(core, options.bounds);
    r.timings.simple_loops = loops.seconds_simple;
    r.timings.merging = loops.seconds_merge;

    TlsbpSection t;
    t.max_simple = options.bounds.max_simple;
    t.max_depth = options.bounds.max_depth;
    t.max_length = loops.max_length;
    t.core_variables = core_mask.num_variables;
    t.core_factors = core_mask.num_factors;
    t.core_edges = core_mask.num_edges;
    t.num_loops = loops.loops.size();
    t.num_simple = loops.num_simple;
    t.iterations = loops.iterations;
    for (VariableId i = 0; i < g.num_variables(); ++i) {
      if (std::abs(r.bp.magnetizations[i]) > kMagnetizationGuard) t.clipped.push_back(i);
    }

    t0 = Clock::now();
    SeriesReport series = truncated_z(r.bp, loop_terms(g, r.bp, loops.loops));
    r.timings.terms = seconds_since(t0);
    t.correction = series.correction;
    t.log_z = series.log_z_tlsbp;
    t.negative = series.negative_partial;

    if (options.marginals) {
      t0 = Clock::now();
      t.marginals = marginals_by_clamping(g, loops.loops, r.bp, options.bp);
      r.timings.marginals = seconds_since(t0);
    }
    r.tlsbp = std::move(t);
    r.series = std::move(series);
    r.loops = loops.loops;
  }

  if (options.exact) {
    t0 = Clock::now();
    ExactResult ex = exact_marginals(g, options.exact_ceiling);
    r.timings.exact = seconds_since(t0);
    r.exact = ExactSection{ex.log_z, std::move(ex.marginals)};

    ErrorSection e;
    e.z_bp = error_z(r.bp.log_z_bp(), r.exact->log_z);
    e.z_ratio_bp = error_z_ratio(r.bp.log_z_bp(), r.exact->log_z);
    e.marginals_bp = error_marginals(r.bp.beliefs_var, r.exact->marginals);
    if (r.tlsbp && std::isfinite(r.tlsbp->log_z)) {
      e.z_tlsbp = error_z(r.tlsbp->log_z, r.exact->log_z);
      e.z_ratio_tlsbp = error_z_ratio(r.tlsbp->log_z, r.exact->log_z);
    }
    if (r.tlsbp && r.tlsbp->marginals) {
      e.marginals_tlsbp = error_marginals(r.tlsbp->marginals->beliefs, r.exact->marginals);
    }
    r.errors = e;
  }
  return r;
}

ExperimentReport exact_report(const FactorGraph& g, std::size_t ceiling,
                              std::map<std::string, std::string> model) {
  ExperimentReport r;
  r.model = std::move(model);
  r.num_variables = g.num_variables();
  r.num_factors = g.num_factors();
  const auto t0 = Clock::now();
  ExactResult ex = exact_marginals(g, ceiling);
  r.timings.exact = seconds_since(t0);
  r.exact = ExactSection{ex.log_z, std::move(ex.marginals)};
  r.bp_ran = false;
  return r;
}

nlohmann::ordered_json to_json(const ExperimentReport& r, bool timings) {
  nlohmann::ordered_json j;
  j["model"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.model) j["model"][k] = v;
  j["graph"] = {{"variables", r.num_variables}, {"factors", r.num_factors}};

  if (r.bp_ran) {
    const auto& o = r.options.bp;
    j["bp"] = {
        {"schedule", to_string(o.schedule.kind)},
        {"schedule_seed", o.schedule.seed},
        {"tol", o.tol},
        {"max_iter", o.max_iter},
        {"converged", r.bp.converged},
        {"iterations", r.bp.iterations},
        {"final_max_update", r.bp.final_max_update},
        {"log_z", number_or_null(r.bp.log_z_bp())},
        {"bethe",
         {{"energy", number_or_null(r.bp.bethe.energy)},
          {"entropy", number_or_null(r.bp.bethe.entropy)},
          {"free_energy", number_or_null(r.bp.bethe.free_energy)},
          {"infinite_energy", r.bp.bethe.infinite_energy}}},
        {"marginals", marginals_json(r.bp.beliefs_var)},
    };
  }

  if (r.tlsbp) {
    const auto& t = *r.tlsbp;
    nlohmann::ordered_json tj = {
        {"S", t.max_simple},
        {"M", t.max_depth},
        {"b", t.max_length},
        {"core", {{"variables", t.core_variables},
                  {"factors", t.core_factors},
                  {"edges", t.core_edges}}},
        {"loops", t.num_loops},
        {"simple_loops", t.num_simple},
        {"iterations", t.iterations},
        {"correction", number_or_null(t.correction)},
        {"log_z", number_or_null(t.log_z)},
        {"negative_partial", t.negative},
        {"clipped_magnetizations", t.clipped},
    };
    if (t.marginals) {
      tj["marginals"] = marginals_json(t.marginals->beliefs);
      std::vector<VariableId> fallback;
      for (VariableId i = 0; i < t.marginals->fallback.size(); ++i) {
        if (t.marginals->fallback[i]) fallback.push_back(i);
      }
      tj["marginal_fallback"] = fallback;
    }
    j["tlsbp"] = std::move(tj);
  }

  if (r.exact) {
    j["exact"] = {{"log_z", number_or_null(r.exact->log_z)},
                  {"marginals", marginals_json(r.exact->marginals)}};
  }

  if (r.errors) {
    const auto& e = *r.errors;
    j["errors"] = {
        {"error_z_bp", e.z_bp},
        {"error_z_ratio_bp", optional_json(e.z_ratio_bp)},
        {"error_z_tlsbp", optional_json(e.z_tlsbp)},
        {"error_z_ratio_tlsbp", optional_json(e.z_ratio_tlsbp)},
        {"error_marginals_bp", e.marginals_bp},
        {"error_marginals_tlsbp", optional_json(e.marginals_tlsbp)},
    };
  }

  if (timings) {
    const auto& t = r.timings;
    j["timings"] = {{"bp", t.bp},           {"two_core", t.two_core},
                    {"simple_loops", t.simple_loops}, {"merging", t.merging},
                    {"terms", t.terms},     {"marginals", t.marginals},
                    {"exact", t.exact}};
  }
  return j;
}

std::string to_csv(const ExperimentReport& r, bool timings) {
  std::vector<std::pair<std::string, std::string>> cols;
  cols.emplace_back("variables", std::to_string(r.num_variables));
  cols.emplace_back("factors", std::to_string(r.num_factors));
  if (r.bp_ran) {
    cols.emplace_back("bp_converged", r.bp.converged ? "1" : "0");
    cols.emplace_back("bp_iterations", std::to_string(r.bp.iterations));
    cols.emplace_back("log_z_bp", format_real(r.bp.log_z_bp()));
  }
  if (r.tlsbp) {
    cols.emplace_back("S", std::to_string(r.tlsbp->max_simple));
    cols.emplace_back("M", std::to_string(r.tlsbp->max_depth));
    cols.emplace_back("b", std::to_string(r.tlsbp->max_length));
    cols.emplace_back("loops", std::to_string(r.tlsbp->num_loops));
    cols.emplace_back("log_z_tlsbp", format_real(r.tlsbp->log_z));
    cols.emplace_back("negative_partial", r.tlsbp->negative ? "1" : "0");
  }
  if (r.exact) cols.emplace_back("log_z_exact", format_real(r.exact->log_z));
  if (r.errors) {
    cols.emplace_back("error_z_bp", format_real(r.errors->z_bp));
    cols.emplace_back("error_z_tlsbp", format_optional(r.errors->z_tlsbp));
    cols.emplace_back("error_marginals_bp", format_real(r.errors->marginals_bp));
    cols.emplace_back("error_marginals_tlsbp", format_optional(r.errors->marginals_tlsbp));
  }
  if (timings) {
    cols.emplace_back("t_bp", format_real(r.timings.bp));
    cols.emplace_back("t_two_core", format_real(r.timings.two_core));
    cols.emplace_back("t_simple_loops", format_real(r.timings.simple_loops));
    cols.emplace_back("t_merging", format_real(r.timings.merging));
    cols.emplace_back("t_terms", format_real(r.timings.terms));
    cols.emplace_back("t_marginals", format_real(r.timings.marginals));
    cols.emplace_back("t_exact", format_real(r.timings.exact));
  }
  std::string header, row;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    header += (k ? "," : "") + cols[k].first;
    row += (k ? "," : "") + cols[k].second;
  }
  return header + "\n" + row + "\n";
}

nlohmann::ordered_json series_json(const SeriesReport& series,
                                   std::span<const GeneralizedLoop> loops) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < series.terms.size(); ++l) {
    const auto& t = series.terms[l];
    rows.push_back({{"rank", l + 1},
                    {"key", loops[t.index].key()},
                    {"length", t.length},
                    {"r", t.value},
                    {"partial_sum", series.partial_sums[l]},
                    {"log_z_partial", number_or_null(series.log_z_partial(l + 1))}});
  }
  return {{"log_z_bp", number_or_null(series.log_z_bp)},
          {"log_z_tlsbp", number_or_null(series.log_z_tlsbp)},
          {"negative_partial", series.negative_partial},
          {"terms", std::move(rows)}};
}

std::string series_csv(const SeriesReport& series, std::span<const GeneralizedLoop> loops) {
  std::string out = "rank,key,length,r,partial_sum,log_z_partial\n";
  for (std::size_t l = 0; l < series.terms.size(); ++l) {
    const auto& t = series.terms[l];
    out += std::to_string(l + 1) + "," + loops[t.index].key() + "," +
           std::to_string(t.length) + "," + format_real(t.value) + "," +
           format_real(series.partial_sums[l]) + "," +
           format_real(series.log_z_partial(l + 1)) + "\n";
  }
  return out;
}

std::vector<std::string> metadata_comments(const std::map<std::string, std::string>& meta) {
  std::vector<std::string> lines;
  for (const auto& [k, v] : meta) lines.push_back(k + ": " + v);
  return lines;
}

std::map<std::string, std::string> read_metadata(const std::string& path) {
  std::ifstream in(path);
  std::map<std::string, std::string> meta;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (line[0] != '#') break;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t#");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    meta[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
  }
  return meta;
}

namespace {

std::string real_text(double x) {
  std::ostringstream out;
  out << std::setprecision(17) << x;
  return out.str();
}

std::map<std::string, std::string> coupling_metadata(const CouplingSpec& spec) {
  return {{"family", to_string(spec.family)},
          {"sigma", real_text(spec.sigma)},
          {"field_mean", real_text(spec.field_mean)},
          {"field_std", real_text(spec.field_std)},
          {"seed", std::to_string(spec.seed)}};
}

}  // namespace

std::map<std::string, std::string> ising_metadata(std::size_t side, const CouplingSpec& spec) {
  auto meta = coupling_metadata(spec);
  meta["generator"] = "ising";
  meta["size"] = std::to_string(side);
  return meta;
}

std::map<std::string, std::string> regular_metadata(std::size_t n, std::size_t degree,
                                                    const CouplingSpec& spec) {
  auto meta = coupling_metadata(spec);
  meta["generator"] = "regular";
  meta["variables"] = std::to_string(n);
  meta["degree"] = std::to_string(degree);
  return meta;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SweepRow> run_sweep(const SweepOptions& options) {
  std::vector<SweepRow> rows;
  RunOptions run = options.run;
  run.exact = true;
  for (std::size_t size : options.sizes) {
    for (double sigma : options.sigmas) {
      SweepRow row;
      row.size = size;
      row.sigma = sigma;
      std::vector<double> ez_bp, ez_tlsbp, eb_bp, eb_tlsbp, loops;
      for (std::size_t k = 0; k < options.seeds; ++k) {
        CouplingSpec spec{options.family, sigma, options.field_mean, options.field_std,
                          options.first_seed + k};
        const FactorGraph g = ising_grid(size, spec);
        const ExperimentReport r = run_experiment(g, run, ising_metadata(size, spec));
        ++row.instances;
        if (!r.bp.converged) continue;
        ++row.converged;
        ez_bp.push_back(r.errors->z_bp);
        eb_bp.push_back(r.errors->marginals_bp);
        if (r.tlsbp) loops.push_back(static_cast<double>(r.tlsbp->num_loops));
        if (r.errors->z_tlsbp) {
          ez_tlsbp.push_back(*r.errors->z_tlsbp);
          if (*r.errors->z_tlsbp < r.errors->z_bp) ++row.tlsbp_better;
        }
        if (r.errors->marginals_tlsbp) eb_tlsbp.push_back(*r.errors->marginals_tlsbp);
      }
      row.error_z_bp = quantiles_of(ez_bp);
      row.error_z_tlsbp = quantiles_of(ez_tlsbp);
      row.error_b_bp = quantiles_of(eb_bp);
      if (!eb_tlsbp.empty()) row.error_b_tlsbp = quantiles_of(eb_tlsbp);
      row.num_loops = quantiles_of(loops);
      rows.push_back(row);
    }
  }
  return rows;
}

nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j = {{"size", r.size},
                                {"sigma", r.sigma},
                                {"instances", r.instances},
                                {"converged", r.converged},
                                {"tlsbp_better", r.tlsbp_better},
                                {"error_z_bp", quantiles_json(r.error_z_bp)},
                                {"error_z_tlsbp", quantiles_json(r.error_z_tlsbp)},
                                {"error_b_bp", quantiles_json(r.error_b_bp)}};
    j["error_b_tlsbp"] =
        r.error_b_tlsbp ? quantiles_json(*r.error_b_tlsbp) : nlohmann::ordered_json(nullptr);
    j["loops"] = quantiles_json(r.num_loops);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "size,sigma,instances,converged,tlsbp_better,"
      "error_z_bp_median,error_z_bp_q25,error_z_bp_q75,"
      "error_z_tlsbp_median,error_z_tlsbp_q25,error_z_tlsbp_q75,"
      "error_b_bp_median,error_b_tlsbp_median,loops_median\n";
  for (const auto& r : rows) {
    out += std::to_string(r.size) + "," + format_real(r.sigma) + "," +
           std::to_string(r.instances) + "," + std::to_string(r.converged) + "," +
           std::to_string(r.tlsbp_better) + "," + format_real(r.error_z_bp.median) + "," +
           format_real(r.error_z_bp.q25) + "," + format_real(r.error_z_bp.q75) + "," +
           format_real(r.error_z_tlsbp.median) + "," + format_real(r.error_z_tlsbp.q25) + "," +
           format_real(r.error_z_tlsbp.q75) + "," + format_real(r.error_b_bp.median) + "," +
           (r.error_b_tlsbp ? format_real(r.error_b_tlsbp->median) : "") + "," +
           format_real(r.num_loops.median) + "\n";
  }
  return out;
}

}  // namespace tlsbp
