#pragma once

// Over-the-air simulation: superimposed transmission over a noisy MAC,
// per-slot nearest-point detection, table decoding and NMSE.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "aircomp/funcspec.hpp"
#include "aircomp/geometry.hpp"
#include "aircomp/partition.hpp"

namespace aircomp {

inline constexpr double kPointClusterTol = 1e-9;

enum class Fading { none, rayleigh_inverted };

/// Reference norm for SNR in multi-codebook designs.
enum class SnrReference { per_slot, stacked };

struct ChannelConfig {
  double snr_db = std::numeric_limits<double>::infinity();
  Fading fading = Fading::none;
  SnrReference reference = SnrReference::per_slot;
};

/// Per-slot noise variance sigma_z^2 = ||x||^2 / 10^(snr/10).
inline std::vector<double> noise_variances(const ModulationDesign& design, const ChannelConfig& ch) {
  std::vector<double> var(static_cast<std::size_t>(design.slots()), 0.0);
  if (std::isinf(ch.snr_db) && ch.snr_db > 0) return var;
  const double snr = std::pow(10.0, ch.snr_db / 10.0);
  double stacked = 0.0;
  for (const auto& cb : design.codebooks) stacked += squared_norm(cb);
  for (int l = 0; l < design.slots(); ++l) {
    const double ref = design.shared() || ch.reference == SnrReference::per_slot
                           ? squared_norm(design.slot_codebook(l))
                           : stacked;
    var[static_cast<std::size_t>(l)] = ref / snr;
  }
  return var;
}

struct DecodeTable {
  /// Cluster representatives per slot, sorted by (re, im).
  std::vector<std::vector<cplx>> points;
  /// Slot configuration -> cluster index (-1 for configurations with pad bits set).
  std::vector<std::vector<std::int32_t>> config_cluster;
  /// Output value per combination of cluster indices (slot 0 most significant).
  std::vector<double> outputs;
  bool collision = false;

  std::size_t flat_index(std::span<const std::int32_t> idx) const {
    std::size_t f = 0;
    for (std::size_t l = 0; l < points.size(); ++l) f = f * points[l].size() + static_cast<std::size_t>(idx[l]);
    return f;
  }
};

namespace detail {

/// Per-node group values of every level: out[level * L + l].
inline std::vector<int> level_groups(const GroupPlan& plan) {
  const int Q = 1 << plan.input_bits();
  const int L = plan.groups();
  std::vector<int> out(static_cast<std::size_t>(Q * L));
  for (int level = 0; level < Q; ++level) {
    const auto g = split(level, plan);
    std::copy(g.begin(), g.end(), out.begin() + static_cast<long>(level) * L);
  }
  return out;
}

}  // namespace detail

inline DecodeTable build_table(const ModulationDesign& design, const FunctionSpec& spec, const OutputIndex& outputs) {
  const GroupPlan& plan = design.plan;
  const int K = design.K;
  const int L = plan.groups();
  DecodeTable table;
  for (int l = 0; l < L; ++l) {
    const auto pts = slot_points(design, l);
    const int Q = plan.symbols(l);
    const int V = plan.valid_symbols(l);
    // valid configurations (all digits below V)
    std::vector<std::uint32_t> valid;
    for (std::uint32_t c = 0; c < pts.size(); ++c) {
      std::uint32_t rem = c;
      bool ok = true;
      for (int k = 0; k < K; ++k, rem /= static_cast<std::uint32_t>(Q))
        if (static_cast<int>(rem % static_cast<std::uint32_t>(Q)) >= V) ok = false;
      if (ok) valid.push_back(c);
    }
    std::sort(valid.begin(), valid.end(), [&](std::uint32_t a, std::uint32_t b) {
      const cplx pa = pts[a], pb = pts[b];
      return pa.real() < pb.real() || (pa.real() == pb.real() && (pa.imag() < pb.imag() || (pa.imag() == pb.imag() && a < b)));
    });
    // greedy clustering in sorted order
    std::vector<cplx> reps;
    std::vector<std::int32_t> cluster(pts.size(), -1);
    for (std::uint32_t c : valid) {
      std::int32_t found = -1;
      for (std::size_t r = reps.size(); r-- > 0;) {
        if (pts[c].real() - reps[r].real() > kPointClusterTol) break;
        if (std::abs(pts[c].imag() - reps[r].imag()) <= kPointClusterTol) {
          found = static_cast<std::int32_t>(r);
          break;
        }
      }
      if (found < 0) {
        found = static_cast<std::int32_t>(reps.size());
        reps.push_back(pts[c]);
      }
      cluster[c] = found;
    }
    // final order by (re, im) of representatives
    std::vector<std::int32_t> order(reps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
      return reps[a].real() < reps[b].real() || (reps[a].real() == reps[b].real() && reps[a].imag() < reps[b].imag());
    });
    std::vector<std::int32_t> rank(reps.size());
    std::vector<cplx> sorted(reps.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      rank[static_cast<std::size_t>(order[i])] = static_cast<std::int32_t>(i);
      sorted[i] = reps[static_cast<std::size_t>(order[i])];
    }
    for (auto& c : cluster)
      if (c >= 0) c = rank[static_cast<std::size_t>(c)];
    table.points.push_back(std::move(sorted));
    table.config_cluster.push_back(std::move(cluster));
  }

  std::size_t cells = 1;
  for (const auto& p : table.points) {
    cells *= p.size();
    if (cells > (std::size_t{1} << 26)) throw InstanceTooLarge("decode table too large");
  }
  table.outputs.assign(cells, std::numeric_limits<double>::quiet_NaN());

  const auto groups = detail::level_groups(plan);
  const int Qin = spec.levels();
  const std::uint64_t n = spec.tuple_count();
  std::vector<int> levels(static_cast<std::size_t>(K));
  std::vector<std::int32_t> idx(static_cast<std::size_t>(L));
  for (std::uint64_t t = 0; t < n; ++t) {
    tuple_levels(t, Qin, levels);
    for (int l = 0; l < L; ++l) {
      const int Q = plan.symbols(l);
      std::uint32_t c = 0;
      for (int k = 0; k < K; ++k)
        c = c * static_cast<std::uint32_t>(Q) +
            static_cast<std::uint32_t>(groups[static_cast<std::size_t>(levels[static_cast<std::size_t>(k)] * L + l)]);
      idx[static_cast<std::size_t>(l)] = table.config_cluster[static_cast<std::size_t>(l)][c];
    }
    double& cell = table.outputs[table.flat_index(idx)];
    const double v = outputs.tuple_value(t);
    if (std::isnan(cell))
      cell = v;
    else if (std::abs(cell - v) > kOutputMergeTol)
      table.collision = true;
  }
  return table;
}

/// Nearest representative per slot; ties go to the smaller index.
inline std::vector<std::int32_t> ml_estimate(std::span<const cplx> y, const DecodeTable& table) {
  std::vector<std::int32_t> idx(table.points.size());
  for (std::size_t l = 0; l < table.points.size(); ++l) {
    double best = std::numeric_limits<double>::infinity();
    const auto& pts = table.points[l];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = std::norm(y[l] - pts[i]);
      if (d < best) {
        best = d;
        idx[l] = static_cast<std::int32_t>(i);
      }
    }
  }
  return idx;
}

inline double decode(std::span<const cplx> y, const DecodeTable& table) {
  const auto idx = ml_estimate(y, table);
  const double v = table.outputs[table.flat_index(idx)];
  if (std::isnan(v)) throw std::logic_error("decode table has an empty cell");
  return v;
}

/// Received slot signals for one input tuple. `fading_rng` is only used for
/// rayleigh_inverted; deep fades (|h| < 1e-6) are redrawn.
template <class Rng>
std::vector<cplx> transmit(const ModulationDesign& design, std::span<const int> levels,
                           std::span<const double> noise_var, Fading fading, Rng& noise_rng, Rng& fading_rng) {
  std::vector<cplx> y(static_cast<std::size_t>(design.slots()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto groups = split(levels[k], design.plan);
    for (int l = 0; l < design.slots(); ++l) {
      const cplx s = design.symbol(l, static_cast<int>(k), groups[static_cast<std::size_t>(l)]);
      if (fading == Fading::rayleigh_inverted) {
        cplx h;
        do {
          const double re = gauss(fading_rng);
          h = cplx(re, gauss(fading_rng)) / std::sqrt(2.0);
        } while (std::abs(h) < 1e-6);
        const cplx p = std::conj(h) / std::norm(h);
        y[static_cast<std::size_t>(l)] += h * (p * s);
      } else {
        y[static_cast<std::size_t>(l)] += s;
      }
    }
  }
  for (std::size_t l = 0; l < y.size(); ++l) {
    if (noise_var[l] <= 0.0) continue;
    const double sd = std::sqrt(noise_var[l] / 2.0);
    const double re = gauss(noise_rng);
    y[l] += cplx(sd * re, sd * gauss(noise_rng));
  }
  return y;
}

/// Independent stream per (seed, snr index, trial, purpose).
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t snr_index, std::uint64_t trial, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(snr_index), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(trial >> 32), stream};
  return std::mt19937_64(seq);
}

struct SimConfig {
  int trials = 100;
  std::vector<double> snr_db;
  std::uint64_t seed = 0;
  Fading fading = Fading::none;
  SnrReference reference = SnrReference::per_slot;
};

struct NmsePoint {
  double snr_db = 0.0;
  double nmse = 0.0;
};

inline std::vector<NmsePoint> nmse_sweep(const ModulationDesign& design, const FunctionSpec& spec,
                                         const OutputIndex& outputs, const DecodeTable& table, const SimConfig& sim) {
  if (sim.trials < 1) throw std::invalid_argument("trials must be positive");
  if (outputs.constant()) throw DomainError("NMSE undefined for a constant function");
  if (table.collision) throw DomainError("design is not computable: decode table collision");
  const double range = outputs.f_max() - outputs.f_min();
  const int Qin = spec.levels();
  std::vector<NmsePoint> out;
  std::vector<int> levels(static_cast<std::size_t>(spec.K));
  for (std::size_t s = 0; s < sim.snr_db.size(); ++s) {
    const auto var = noise_variances(design, {sim.snr_db[s], sim.fading, sim.reference});
    double err = 0.0;
    for (int j = 0; j < sim.trials; ++j) {
      auto noise_rng = trial_rng(sim.seed, s, static_cast<std::uint64_t>(j), 0);
      auto fading_rng = trial_rng(sim.seed, s, static_cast<std::uint64_t>(j), 1);
      std::uniform_int_distribution<int> draw(0, Qin - 1);
      for (int& v : levels) v = draw(noise_rng);
      const double truth = outputs.tuple_value(tuple_index(levels, Qin));
      const auto y = transmit(design, levels, var, sim.fading, noise_rng, fading_rng);
      const double d = truth - decode(y, table);
      err += d * d;
    }
    out.push_back({sim.snr_db[s], err / (sim.trials * range * range)});
  }
  return out;
}

}  // namespace aircomp
