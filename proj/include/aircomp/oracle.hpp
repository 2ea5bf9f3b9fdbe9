#pragma once

// Brute-force reference computations for small instances. These avoid the
// constraint-set machinery entirely: aggregated sequences are built tuple
// by tuple and all tuple pairs are compared.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "aircomp/anneal.hpp"
#include "aircomp/funcspec.hpp"
#include "aircomp/geometry.hpp"
#include "aircomp/partition.hpp"

namespace aircomp {

inline constexpr std::uint64_t kOracleMaxTuples = 1 << 14;
inline constexpr std::size_t kOracleMaxCompositions = 100;

struct OracleReport {
  std::string instance;
  std::string property;
  double max_deviation = 0.0;
  bool pass = false;
  std::string witness;

  std::string json_line() const {
    std::ostringstream os;
    os.precision(17);
    os << R"({"instance":")" << instance << R"(","property":")" << property << R"(","max_deviation":)"
       << max_deviation << R"(,"pass":)" << (pass ? "true" : "false") << R"(,"witness":")" << witness << "\"}";
    return os.str();
  }
};

namespace detail {

inline std::vector<std::vector<cplx>> all_sequences(const ModulationDesign& design, const FunctionSpec& spec) {
  const std::uint64_t n = spec.tuple_count();
  std::vector<std::vector<cplx>> seq(static_cast<std::size_t>(n));
  std::vector<int> levels(static_cast<std::size_t>(spec.K));
  for (std::uint64_t t = 0; t < n; ++t) {
    tuple_levels(t, spec.levels(), levels);
    seq[static_cast<std::size_t>(t)] = aggregate(design, levels);
  }
  return seq;
}

inline void require_small(const FunctionSpec& spec) {
  if (spec.K * spec.B > 30 || spec.tuple_count() > kOracleMaxTuples)
    throw InstanceTooLarge("oracle refuses Q^K = " + std::to_string(spec.tuple_count()) + " tuples (limit " +
                           std::to_string(kOracleMaxTuples) + ")");
}

}  // namespace detail

/// min over output-distinct tuple pairs of sum_l w_l |dv_l|^2 / (eps |df|).
/// Weights apply to multi-codebook designs only; +inf for constant functions.
inline double brute_d_min(const ModulationDesign& design, const FunctionSpec& spec, const OutputIndex& outputs,
                          std::span<const double> weights = {}) {
  detail::require_small(spec);
  const auto seq = detail::all_sequences(design, spec);
  const bool weighted = !weights.empty() && !design.shared();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto oi = outputs.tuple_output[i];
    for (std::size_t j = i + 1; j < seq.size(); ++j) {
      const auto oj = outputs.tuple_output[j];
      if (oi == oj) continue;
      double dist = 0.0;
      for (std::size_t l = 0; l < seq[i].size(); ++l)
        dist += (weighted ? weights[l] : 1.0) * std::norm(seq[i][l] - seq[j][l]);
      best = std::min(best, dist / outputs.gap(oi, oj));
    }
  }
  return best;
}

/// Looks for two tuples with different outputs whose aggregated sequences
/// coincide (within the point tolerance), and cross-checks against d_min.
inline OracleReport check_distinguishability(const ModulationDesign& design, const FunctionSpec& spec,
                                             const OutputIndex& outputs) {
  detail::require_small(spec);
  OracleReport rep;
  rep.instance = describe(design.plan, spec.K) + " f=" + std::string(to_string(spec.kind));
  rep.property = "distinguishability";
  const auto seq = detail::all_sequences(design, spec);
  std::vector<std::size_t> order(seq.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seq[a][0].real() < seq[b][0].real(); });
  const double tol = 1e-9;
  bool collision = false;
  for (std::size_t p = 0; p < order.size() && !collision; ++p) {
    const auto& a = seq[order[p]];
    for (std::size_t q = p + 1; q < order.size(); ++q) {
      const auto& b = seq[order[q]];
      if (b[0].real() - a[0].real() > tol) break;
      if (outputs.tuple_output[order[p]] == outputs.tuple_output[order[q]]) continue;
      bool same = true;
      for (std::size_t l = 0; l < a.size() && same; ++l)
        same = std::abs(a[l].real() - b[l].real()) <= tol && std::abs(a[l].imag() - b[l].imag()) <= tol;
      if (same) {
        collision = true;
        rep.witness = "tuples " + std::to_string(order[p]) + " and " + std::to_string(order[q]);
        break;
      }
    }
  }
  const double dm = brute_d_min(design, spec, outputs);
  const bool separated = dm > 0.0;
  rep.max_deviation = separated == !collision ? 0.0 : 1.0;
  rep.pass = !collision && separated;
  return rep;
}

struct PartitionOptimum {
  std::vector<int> widths;
  double energy = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::vector<int>, double>> evaluated;
};

/// Exhaustive search over non-decreasing compositions of B into L parts.
inline PartitionOptimum brute_best_partition(EnergyEvaluator& energy, int L) {
  const int B = energy.builder().spec().B;
  const auto all = compositions(B, L);
  if (all.empty()) throw std::invalid_argument("no composition of B into L positive parts");
  if (all.size() > kOracleMaxCompositions)
    throw InstanceTooLarge(std::to_string(all.size()) + " compositions exceed the oracle limit");
  PartitionOptimum best;
  for (const auto& b : all) {
    const double e = energy(b)->energy;
    best.evaluated.emplace_back(b, e);
    if (best.widths.empty() || e > best.energy) {
      best.widths = b;
      best.energy = e;
    }
  }
  return best;
}

}  // namespace aircomp
