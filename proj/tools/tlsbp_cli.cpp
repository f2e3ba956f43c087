// tlsbp: model generation, BP / truncated loop series runs, exact oracle,
// loop census and ensemble sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tlsbp/report.hpp"

using namespace tlsbp;

namespace {

enum Exit { kOk = 0, kError = 1, kUsage = 2, kNotConverged = 3, kCeiling = 4 };

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

struct GenArgs {
  std::size_t size = 4;
  std::size_t n = 20;
  std::size_t degree = 3;
  std::string family = "spinglass";
  double sigma = 1.0;
  double field_mean = 0.0;
  double field_std = 0.05;
  std::uint64_t seed = 0;
  std::string output;
};

void add_coupling_flags(CLI::App* app, GenArgs& a) {
  app->add_option("--family", a.family, "spinglass or ferromagnetic")
      ->check(CLI::IsMember({"spinglass", "ferromagnetic"}));
  app->add_option("--sigma", a.sigma, "coupling scale")->check(CLI::NonNegativeNumber);
  app->add_option("--field-mean", a.field_mean, "mean of the unary fields");
  app->add_option("--field-std", a.field_std, "std of the unary fields")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", a.seed, "master seed");
  app->add_option("-o,--output", a.output, "output .fg file (default stdout)");
}

CouplingSpec coupling(const GenArgs& a) {
  return {parse_family(a.family), a.sigma, a.field_mean, a.field_std, a.seed};
}

void write_model(const FactorGraph& g, const std::map<std::string, std::string>& meta,
                 const std::string& path) {
  std::ostringstream out;
  save(g, out, metadata_comments(meta));
  emit(out.str(), path);
}

struct RunArgs {
  std::string model;
  std::size_t s = 1000;
  std::size_t m = 10;
  std::size_t b = 0;
  std::string schedule = "fixed";
  double tol = 1e-17;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
  bool marginals = false;
  bool exact = false;
  bool no_tlsbp = false;
  bool strict = false;
  bool timings = false;
  std::string out = "json";
  std::string series;
  std::string output;
  std::size_t ceiling = kExactVariableCeiling;
};

void add_bp_flags(CLI::App* app, RunArgs& a) {
  app->add_option("--schedule", a.schedule, "fixed, random, parallel or residual")
      ->check(CLI::IsMember({"fixed", "random", "parallel", "residual"}));
  app->add_option("--tol", a.tol, "convergence threshold on the max message change")
      ->check(CLI::PositiveNumber);
  app->add_option("--max-iter", a.max_iter, "maximum number of sweeps");
  app->add_option("--seed", a.seed, "seed of the random schedule");
}

void add_loop_flags(CLI::App* app, RunArgs& a) {
  app->add_option("--s", a.s, "number of shortest simple loops (S)")
      ->check(CLI::PositiveNumber);
  app->add_option("--m", a.m, "max depth of the complex-loop search (M)");
  app->add_option("--b-override", a.b, "max loop length (b); default: length of the S-th loop");
}

BPOptions bp_options(const RunArgs& a) {
  BPOptions o;
  o.schedule = {parse_schedule(a.schedule), a.seed};
  o.tol = a.tol;
  o.max_iter = a.max_iter;
  return o;
}

SearchBounds bounds(const RunArgs& a) {
  SearchBounds b;
  b.max_simple = a.s;
  b.max_depth = a.m;
  if (a.b > 0) b.max_length = a.b;
  return b;
}

int cmd_run(const RunArgs& a) {
  const FactorGraph g = load_file(a.model);
  RunOptions o;
  o.bp = bp_options(a);
  o.tlsbp = !a.no_tlsbp;
  o.bounds = bounds(a);
  o.marginals = a.marginals && o.tlsbp;
  o.exact = a.exact;
  o.exact_ceiling = a.ceiling;
  const ExperimentReport r = run_experiment(g, o, read_metadata(a.model));

  if (a.out == "csv") {
    emit(to_csv(r, a.timings), a.output);
  } else {
    emit(dump(to_json(r, a.timings)), a.output);
  }
  if (!a.series.empty() && r.series) {
    const bool csv = a.series.size() >= 4 && a.series.substr(a.series.size() - 4) == ".csv";
    emit(csv ? series_csv(*r.series, r.loops) : dump(series_json(*r.series, r.loops)),
         a.series);
  }
  if (!r.bp.converged) {
    std::cerr << "warning: BP did not converge in " << r.bp.iterations
              << " sweeps (last change " << r.bp.final_max_update << ")\n";
    if (a.strict) return kNotConverged;
  }
  return kOk;
}

int cmd_exact(const RunArgs& a) {
  const FactorGraph g = load_file(a.model);
  const ExperimentReport r = exact_report(g, a.ceiling, read_metadata(a.model));
  emit(a.out == "csv" ? to_csv(r) : dump(to_json(r)), a.output);
  return kOk;
}

int cmd_loops(const RunArgs& a, bool exhaustive) {
  const FactorGraph g = load_file(a.model);
  const CoreGraph core(g);
  const SearchBounds b = exhaustive ? SearchBounds::exhaustive(core) : bounds(a);
  const EnumerationResult res = tlsbp_enumerate(core, b);
  const LoopCensus c = census(core, res.loops);

  if (a.out == "json") {
    nlohmann::ordered_json j;
    j["S"] = b.max_simple == kUnbounded ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json(b.max_simple);
    j["M"] = b.max_depth;
    j["b"] = res.max_length;
    j["iterations"] = res.iterations;
    j["new_per_iteration"] = res.new_per_iteration;
    j["census"] = {{"total", c.total},
                   {"simple", c.simple},
                   {"complex_disconnected", c.complex_disconnected},
                   {"complex_connected", c.complex_connected},
                   {"disconnected_noncomplex", c.disconnected_noncomplex},
                   {"neither", c.neither}};
    auto hist = nlohmann::ordered_json::array();
    for (auto [len, n] : c.length_histogram) hist.push_back({{"length", len}, {"count", n}});
    j["histogram"] = std::move(hist);
    auto loops = nlohmann::ordered_json::array();
    for (const auto& l : res.loops) {
      const LoopClass k = classify(core, l);
      loops.push_back({{"key", l.key()},
                       {"length", l.length()},
                       {"simple", k.simple},
                       {"disconnected", k.disconnected},
                       {"complex", k.complex}});
    }
    j["loops"] = std::move(loops);
    emit(dump(j), a.output);
    return kOk;
  }

  std::ostringstream out;
  out << "# S " << (b.max_simple == kUnbounded ? "unbounded" : std::to_string(b.max_simple))
      << " M " << b.max_depth << " b " << res.max_length
      << " iterations " << res.iterations << "\n";
  out << "# total " << c.total << " simple " << c.simple << " complex_disconnected "
      << c.complex_disconnected << " complex_connected " << c.complex_connected
      << " disconnected_noncomplex " << c.disconnected_noncomplex << " neither " << c.neither
      << "\n";
  out << "# key length simple disconnected complex\n";
  for (const auto& l : res.loops) {
    const LoopClass k = classify(core, l);
    out << l.key() << ' ' << l.length() << ' ' << k.simple << ' ' << k.disconnected << ' '
        << k.complex << "\n";
  }
  out << "# histogram: length count\n";
  for (auto [len, n] : c.length_histogram) out << "# " << len << ' ' << n << "\n";
  emit(out.str(), a.output);
  return kOk;
}

std::vector<double> parse_reals(const std::string& list) {
  std::vector<double> v;
  std::stringstream in(list);
  for (std::string tok; std::getline(in, tok, ',');) v.push_back(std::stod(tok));
  return v;
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> v;
  std::stringstream in(list);
  for (std::string tok; std::getline(in, tok, ',');) v.push_back(std::stoul(tok));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated loop series belief propagation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a model file");
  gen_cmd->require_subcommand(1);
  auto* gen_ising = gen_cmd->add_subcommand("ising", "N x N Ising grid");
  gen_ising->add_option("--size", gen.size, "grid side N")->check(CLI::PositiveNumber);
  add_coupling_flags(gen_ising, gen);
  auto* gen_regular = gen_cmd->add_subcommand("regular", "random d-regular graph");
  gen_regular->add_option("--n", gen.n, "number of variables")->check(CLI::PositiveNumber);
  gen_regular->add_option("--degree", gen.degree, "degree d")->check(CLI::PositiveNumber);
  add_coupling_flags(gen_regular, gen);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "BP plus truncated loop series");
  run_cmd->add_option("model", run.model, "model .fg file")->required()->check(CLI::ExistingFile);
  add_bp_flags(run_cmd, run);
  add_loop_flags(run_cmd, run);
  run_cmd->add_flag("--marginals", run.marginals, "clamped single-node marginals");
  run_cmd->add_flag("--exact", run.exact, "compare against brute-force enumeration");
  run_cmd->add_option("--ceiling", run.ceiling, "max variables for --exact");
  run_cmd->add_flag("--no-tlsbp", run.no_tlsbp, "BP only");
  run_cmd->add_flag("--strict", run.strict, "exit 3 when BP does not converge");
  run_cmd->add_flag("--timings", run.timings, "include stage timings");
  run_cmd->add_option("--out", run.out, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  run_cmd->add_option("--series", run.series, "write the cumulative series (.json or .csv)");
  run_cmd->add_option("-o,--output", run.output, "report file (default stdout)");

  RunArgs ex;
  auto* exact_cmd = app.add_subcommand("exact", "exact log Z and marginals");
  exact_cmd->add_option("model", ex.model, "model .fg file")->required()->check(CLI::ExistingFile);
  exact_cmd->add_option("--ceiling", ex.ceiling, "max number of variables");
  exact_cmd->add_option("--out", ex.out, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  exact_cmd->add_option("-o,--output", ex.output, "report file (default stdout)");

  RunArgs lp;
  lp.out = "text";
  bool exhaustive = false;
  auto* loops_cmd = app.add_subcommand("loops", "enumerate and classify generalized loops");
  loops_cmd->add_option("model", lp.model, "model .fg file")->required()->check(CLI::ExistingFile);
  add_loop_flags(loops_cmd, lp);
  loops_cmd->add_flag("--exhaustive", exhaustive, "bounds large enough for every loop");
  loops_cmd->add_option("--out", lp.out, "text or json")->check(CLI::IsMember({"text", "json"}));
  loops_cmd->add_option("-o,--output", lp.output, "output file (default stdout)");

  RunArgs sw;
  std::string sizes = "4";
  std::string sigmas = "0.1,0.5,1";
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  std::string family = "spinglass";
  double field_mean = 0.0;
  double field_std = 0.05;
  auto* sweep_cmd = app.add_subcommand("sweep", "ensemble of Ising grids over seeds and sigma");
  sweep_cmd->add_option("--sizes", sizes, "comma-separated grid sides");
  sweep_cmd->add_option("--sigmas", sigmas, "comma-separated coupling scales");
  sweep_cmd->add_option("--seeds", seeds, "instances per cell");
  sweep_cmd->add_option("--first-seed", first_seed, "seed of the first instance");
  sweep_cmd->add_option("--family", family, "spinglass or ferromagnetic")
      ->check(CLI::IsMember({"spinglass", "ferromagnetic"}));
  sweep_cmd->add_option("--field-mean", field_mean, "mean of the unary fields");
  sweep_cmd->add_option("--field-std", field_std, "std of the unary fields");
  add_bp_flags(sweep_cmd, sw);
  add_loop_flags(sweep_cmd, sw);
  sweep_cmd->add_flag("--marginals", sw.marginals, "clamped single-node marginals");
  sweep_cmd->add_option("--ceiling", sw.ceiling, "max variables of the exact oracle");
  sweep_cmd->add_option("--out", sw.out, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sweep_cmd->add_option("-o,--output", sw.output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_ising->parsed()) {
      const CouplingSpec spec = coupling(gen);
      write_model(ising_grid(gen.size, spec), ising_metadata(gen.size, spec), gen.output);
      return kOk;
    }
    if (gen_regular->parsed()) {
      const CouplingSpec spec = coupling(gen);
      write_model(random_regular(gen.n, gen.degree, spec),
                  regular_metadata(gen.n, gen.degree, spec), gen.output);
      return kOk;
    }
    if (run_cmd->parsed()) return cmd_run(run);
    if (exact_cmd->parsed()) return cmd_exact(ex);
    if (loops_cmd->parsed()) return cmd_loops(lp, exhaustive);
    if (sweep_cmd->parsed()) {
      SweepOptions o;
      o.sizes = parse_sizes(sizes);
      o.sigmas = parse_reals(sigmas);
      o.seeds = seeds;
      o.first_seed = first_seed;
      o.family = parse_family(family);
      o.field_mean = field_mean;
      o.field_std = field_std;
      o.run.bp = bp_options(sw);
      o.run.bounds = bounds(sw);
      o.run.marginals = sw.marginals;
      o.run.exact_ceiling = sw.ceiling;
      const auto rows = run_sweep(o);
      emit(sw.out == "csv" ? sweep_csv(rows) : dump(sweep_json(rows)), sw.output);
      return kOk;
    }
  } catch (const CeilingExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCeiling;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kUsage;
}
