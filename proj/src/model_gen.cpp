#include "tlsbp/model_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>

namespace tlsbp {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FactorTable pairwise_ising(VariableId i, VariableId j, double coupling) {
  const double same = std::exp(coupling);
  const double diff = std::exp(-coupling);
  return {{i, j}, {same, diff, diff, same}};
}

FactorTable unary_field(VariableId i, double field) {
  return {{i}, {std::exp(-field), std::exp(field)}};
}

double field_draw(const CouplingSpec& spec, FactorId a) {
  auto rng = SplitMix64::stream(spec.seed, a);
  return spec.field_mean + spec.field_std * rng.normal();
}

double coupling_draw(const CouplingSpec& spec, FactorId a) {
  auto rng = SplitMix64::stream(spec.seed, a);
  const double theta = spec.sigma * rng.normal();
  return spec.family == CouplingFamily::ferromagnetic ? std::abs(theta) : theta;
}

void check_spec(const CouplingSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (!(spec.field_std >= 0.0)) throw std::invalid_argument("field_std must be >= 0");
}

}  // namespace

SplitMix64 SplitMix64::stream(std::uint64_t seed, std::uint64_t stream_id) {
  return SplitMix64(mix64(seed) ^ mix64(stream_id + 0x9E3779B97F4A7C15ULL));
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double SplitMix64::uniform_open() {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % bound;
}

double SplitMix64::normal() { return normal_quantile(uniform_open()); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::string to_string(CouplingFamily family) {
  return family == CouplingFamily::ferromagnetic ? "ferromagnetic" : "spinglass";
}

CouplingFamily parse_family(const std::string& name) {
  if (name == "spinglass" || name == "spin_glass" || name == "spin-glass") {
    return CouplingFamily::spin_glass;
  }
  if (name == "ferromagnetic" || name == "ferro") return CouplingFamily::ferromagnetic;
  throw std::invalid_argument("unknown coupling family '" + name + "'");
}

FactorGraph ising_grid(std::size_t side, const CouplingSpec& spec) {
  if (side < 2) throw std::invalid_argument("ising_grid: side length must be >= 2");
  check_spec(spec);
  const std::size_t n = side * side;
  std::vector<FactorTable> factors;
  factors.reserve(2 * side * (side - 1) + n);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const VariableId i = r * side + c;
      if (c + 1 < side) {
        factors.push_back(pairwise_ising(i, i + 1, coupling_draw(spec, factors.size())));
      }
      if (r + 1 < side) {
        factors.push_back(
            pairwise_ising(i, i + side, coupling_draw(spec, factors.size())));
      }
    }
  }
  for (VariableId i = 0; i < n; ++i) {
    factors.push_back(unary_field(i, field_draw(spec, factors.size())));
  }
  return FactorGraph(n, std::move(factors));
}

FactorGraph random_regular(std::size_t num_variables, std::size_t degree,
                           const CouplingSpec& spec) {
  check_spec(spec);
  if ((num_variables * degree) % 2 != 0) {
    throw std::invalid_argument("random_regular: N*d must be even");
  }
  if (degree >= num_variables) {
    throw std::invalid_argument("random_regular: degree must be < N");
  }

  auto rng = SplitMix64::stream(spec.seed, kTopologyStream);
  std::vector<std::pair<VariableId, VariableId>> pairs;
  bool found = false;
  for (int attempt = 0; attempt < kRegularRetryBudget && !found; ++attempt) {
    std::vector<VariableId> stubs;
    stubs.reserve(num_variables * degree);
    for (VariableId i = 0; i < num_variables; ++i) {
      for (std::size_t k = 0; k < degree; ++k) stubs.push_back(i);
    }
    // Fisher-Yates, then pair consecutive stubs.
    for (std::size_t k = stubs.size(); k > 1; --k) {
      std::swap(stubs[k - 1], stubs[rng.below(k)]);
    }
    std::set<std::pair<VariableId, VariableId>> seen;
    pairs.clear();
    found = true;
    for (std::size_t k = 0; k < stubs.size(); k += 2) {
      auto [u, v] = std::minmax(stubs[k], stubs[k + 1]);
      if (u == v || !seen.insert({u, v}).second) {
        found = false;
        break;
      }
      pairs.emplace_back(u, v);
    }
  }
  if (!found) {
    throw std::runtime_error("random_regular: retry budget exhausted");
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<FactorTable> factors;
  factors.reserve(pairs.size() + num_variables);
  for (auto [u, v] : pairs) {
    factors.push_back(pairwise_ising(u, v, coupling_draw(spec, factors.size())));
  }
  for (VariableId i = 0; i < num_variables; ++i) {
    factors.push_back(unary_field(i, field_draw(spec, factors.size())));
  }
  return FactorGraph(num_variables, std::move(factors));
}

FactorTable noisy_or_table(std::span<const VariableId> parents, VariableId child,
                           std::span<const double> probs) {
  if (probs.size() != parents.size() + 1) {
    throw std::invalid_argument("noisy_or_table: expected leak plus one probability per parent");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("noisy_or_table: probability outside [0, 1]");
    }
  }
  FactorTable f;
  f.scope.assign(parents.begin(), parents.end());
  f.scope.push_back(child);
  const std::size_t k = parents.size();
  f.values.resize(std::size_t{1} << (k + 1));
  for (std::size_t cfg = 0; cfg < (std::size_t{1} << k); ++cfg) {
    double off = 1.0 - probs[0];
    for (std::size_t p = 0; p < k; ++p) {
      if ((cfg >> (k - 1 - p)) & 1U) off *= 1.0 - probs[p + 1];
    }
    f.values[2 * cfg] = off;
    f.values[2 * cfg + 1] = 1.0 - off;
  }
  return f;
}

NoisyOrDecomposition noisy_or_decompose(std::size_t num_parents,
                                        std::span<const double> probs) {
  if (num_parents == 0) throw std::invalid_argument("noisy_or_decompose: need a parent");
  if (probs.size() != num_parents + 1) {
    throw std::invalid_argument(
        "noisy_or_decompose: expected leak plus one probability per parent");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("noisy_or_decompose: probability outside [0, 1]");
    }
  }

  NoisyOrDecomposition out;
  out.num_parents = num_parents;
  out.child = num_parents;
  if (num_parents <= 2) {
    std::vector<VariableId> parents(num_parents);
    for (std::size_t p = 0; p < num_parents; ++p) parents[p] = p;
    out.factors.push_back(noisy_or_table(parents, out.child, probs));
    return out;
  }

  // OR(x | y1..yn) = sum_s OR(s | y1, y2) OR(x | s, y3..yn), applied recursively:
  // the first factor carries the leak, later ones pass the dummy through.
  for (std::size_t k = 0; k + 3 < num_parents + 1; ++k) {
    out.dummies.push_back(num_parents + 1 + k);
  }
  const VariableId first_out = out.dummies.front();
  const std::vector<VariableId> head{0, 1};
  const double head_probs[] = {probs[0], probs[1], probs[2]};
  out.factors.push_back(noisy_or_table(head, first_out, head_probs));
  VariableId carry = first_out;
  for (std::size_t p = 2; p < num_parents; ++p) {
    const VariableId target = p + 1 == num_parents ? out.child : out.dummies[p - 1];
    const std::vector<VariableId> in{carry, p};
    const double link[] = {0.0, 1.0, probs[p + 1]};
    out.factors.push_back(noisy_or_table(in, target, link));
    carry = target;
  }
  return out;
}

}  // namespace tlsbp
