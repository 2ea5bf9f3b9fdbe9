#pragma once

// Constellation geometry: modulation designs, aggregated constellation
// points, the pairwise distance constraints and worst-case distances.
//
// Per-slot configurations. In slot l every node k selects one of the Q_l
// symbols of its codebook block; a configuration is the digit vector
// (g_0, ..., g_{K-1}) encoded in base Q_l with node 0 most significant.
// The aggregated point of a configuration is sum_k x_l[k*Q_l + g_k].
//
// Constraint reduction. Two input tuples that differ in a single slot l
// have distance |e_l^T x_l|^2, where e_l only depends on the differing
// nodes' symbol pairs. For every such difference vector the set keeps the
// largest output gap over all contexts (other slots, equal nodes). Any
// tuple pair differing in several slots satisfies
//   |f_i - f_j| <= sum_l maxgap_l   and   ||v_i - v_j||^2 = sum_l |dv_l|^2,
// so its constraint is implied; the worst-case distance over this set is
// the worst-case distance over all tuple pairs.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "aircomp/funcspec.hpp"
#include "aircomp/partition.hpp"

namespace aircomp {

using cplx = std::complex<double>;

class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

struct ModulationDesign {
  GroupPlan plan;
  int K = 2;
  /// One stacked vector per group (node-major, length K*Q_l). Uniform plans
  /// store a single vector shared by every slot.
  std::vector<std::vector<cplx>> codebooks;
  double c = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;

  bool shared() const { return plan.mode() == PartitionMode::uniform; }
  int slots() const { return plan.groups(); }
  const std::vector<cplx>& slot_codebook(int l) const {
    return codebooks[shared() ? 0 : static_cast<std::size_t>(l)];
  }
  int slot_symbols(int l) const { return plan.symbols(l); }
  cplx symbol(int l, int node, int q) const {
    return slot_codebook(l)[static_cast<std::size_t>(node * slot_symbols(l) + q)];
  }

  /// Shape-only design (zeros) for a plan.
  static ModulationDesign zeros(const GroupPlan& plan, int K) {
    ModulationDesign d;
    d.plan = plan;
    d.K = K;
    const int groups = plan.mode() == PartitionMode::uniform ? 1 : plan.groups();
    for (int g = 0; g < groups; ++g)
      d.codebooks.emplace_back(static_cast<std::size_t>(K * plan.symbols(g)), cplx{});
    return d;
  }
};

inline double squared_norm(std::span<const cplx> v) {
  double s = 0.0;
  for (const cplx& z : v) s += std::norm(z);
  return s;
}

/// Aggregated constellation points of every configuration of slot l.
inline std::vector<cplx> slot_points(const ModulationDesign& design, int l) {
  const int Q = design.slot_symbols(l);
  const std::uint64_t n = ipow(static_cast<std::uint64_t>(Q), design.K);
  if (n > (std::uint64_t{1} << 24)) throw InstanceTooLarge("too many per-slot configurations");
  const auto& x = design.slot_codebook(l);
  std::vector<cplx> points(static_cast<std::size_t>(n));
  // points[c] = points[c without node K-1] + x[node K-1 symbol]; build by
  // repeated extension of the digit string.
  points[0] = 0.0;
  std::uint64_t len = 1;
  for (int k = 0; k < design.K; ++k) {
    for (std::uint64_t c = len; c-- > 0;) {
      const cplx base = points[static_cast<std::size_t>(c)];
      for (int q = Q; q-- > 0;)
        points[static_cast<std::size_t>(c * Q + q)] = base + x[static_cast<std::size_t>(k * Q + q)];
    }
    len *= static_cast<std::uint64_t>(Q);
  }
  return points;
}

/// v_l = sum_k x_{k,l}[group value of node k], for every slot.
inline std::vector<cplx> aggregate(const ModulationDesign& design, std::span<const int> levels) {
  if (levels.size() != static_cast<std::size_t>(design.K)) throw DomainError("tuple length does not match K");
  std::vector<cplx> v(static_cast<std::size_t>(design.slots()));
  for (int k = 0; k < design.K; ++k) {
    const auto groups = split(levels[static_cast<std::size_t>(k)], design.plan);
    for (int l = 0; l < design.slots(); ++l)
      v[static_cast<std::size_t>(l)] += design.symbol(l, k, groups[static_cast<std::size_t>(l)]);
  }
  return v;
}

/// Single-slot pair constraint: difference vector e = a(plus) - a(minus)
/// restricted to slot `slot`, with output gap `gap` = epsilon * |df|.
struct PairConstraint {
  std::uint32_t slot = 0;
  std::uint32_t plus = 0;
  std::uint32_t minus = 0;
  double gap = 0.0;
};

struct ConstraintSet {
  int K = 2;
  GroupPlan plan;
  double epsilon = 1.0;
  bool constant_function = false;
  std::vector<PairConstraint> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool shared() const { return plan.mode() == PartitionMode::uniform; }

  /// Nonzero entries of the difference vector: (node, symbol, +1/-1).
  std::vector<std::tuple<int, int, int>> support(std::size_t j) const {
    const PairConstraint& pc = items[j];
    const int Q = plan.symbols(static_cast<int>(pc.slot));
    std::vector<std::tuple<int, int, int>> out;
    std::uint32_t a = pc.plus, b = pc.minus;
    std::vector<std::pair<int, int>> digits(static_cast<std::size_t>(K));
    for (int k = K; k-- > 0;) {
      digits[static_cast<std::size_t>(k)] = {static_cast<int>(a % Q), static_cast<int>(b % Q)};
      a /= static_cast<std::uint32_t>(Q);
      b /= static_cast<std::uint32_t>(Q);
    }
    for (int k = 0; k < K; ++k) {
      auto [u, v] = digits[static_cast<std::size_t>(k)];
      if (u == v) continue;
      out.emplace_back(k, u, +1);
      out.emplace_back(k, v, -1);
    }
    return out;
  }

  /// Dense difference sequence, one block per slot (length K*Q_l each).
  std::vector<std::vector<int>> difference_sequence(std::size_t j) const {
    std::vector<std::vector<int>> seq;
    for (int l = 0; l < plan.groups(); ++l) seq.emplace_back(static_cast<std::size_t>(K * plan.symbols(l)), 0);
    const int l = static_cast<int>(items[j].slot);
    const int Q = plan.symbols(l);
    for (auto [k, q, s] : support(j)) seq[static_cast<std::size_t>(l)][static_cast<std::size_t>(k * Q + q)] = s;
    return seq;
  }
};

struct BuildLimits {
  /// Pair-context evaluations allowed per slot (pairs x contexts).
  double max_pair_work = 8e10;
  /// Dense canonical-key table size per slot.
  std::uint64_t max_keys = std::uint64_t{1} << 26;
};

namespace detail {

struct SlotShape {
  int K = 0;
  int Q = 0;        // symbols of the group
  int V = 0;        // valid symbols (pad bits zero)
  int shift = 0;    // position of the group's LSB in the level
  int valid_bits = 0;
  int B = 0;
};

inline SlotShape slot_shape(const GroupPlan& plan, int K, int l) {
  SlotShape s;
  s.K = K;
  s.Q = plan.symbols(l);
  s.V = plan.valid_symbols(l);
  s.shift = plan.shift(l);
  s.valid_bits = plan.width(l) - plan.pad_in_group(l);
  s.B = plan.input_bits();
  return s;
}

inline std::uint64_t key_radix(int Q) { return 1 + static_cast<std::uint64_t>(Q) * (Q - 1); }

/// Canonical key of the difference between two configurations given as
/// per-node digit pairs; first differing node has u < v.
inline std::uint64_t pair_key(std::span<const int> u, std::span<const int> v, int Q) {
  const std::uint64_t R = key_radix(Q);
  bool flip = false;
  for (std::size_t k = 0; k < u.size(); ++k)
    if (u[k] != v[k]) {
      flip = u[k] > v[k];
      break;
    }
  std::uint64_t key = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const int a = flip ? v[k] : u[k];
    const int b = flip ? u[k] : v[k];
    std::uint64_t code = 0;
    if (a != b) code = 1 + static_cast<std::uint64_t>(a) * (Q - 1) + static_cast<std::uint64_t>(b < a ? b : b - 1);
    key = key * R + code;
  }
  return key;
}

inline std::pair<std::uint32_t, std::uint32_t> key_configs(std::uint64_t key, int K, int Q) {
  const std::uint64_t R = key_radix(Q);
  std::vector<std::uint64_t> codes(static_cast<std::size_t>(K));
  for (int k = K; k-- > 0;) {
    codes[static_cast<std::size_t>(k)] = key % R;
    key /= R;
  }
  std::uint32_t plus = 0, minus = 0;
  for (int k = 0; k < K; ++k) {
    int u = 0, v = 0;
    if (const std::uint64_t code = codes[static_cast<std::size_t>(k)]; code != 0) {
      u = static_cast<int>((code - 1) / (Q - 1));
      const int r = static_cast<int>((code - 1) % (Q - 1));
      v = r < u ? r : r + 1;
    }
    plus = plus * static_cast<std::uint32_t>(Q) + static_cast<std::uint32_t>(u);
    minus = minus * static_cast<std::uint32_t>(Q) + static_cast<std::uint32_t>(v);
  }
  return {plus, minus};
}

/// max_k |a[k] - b[k]|
inline double linf_distance(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double m = 0.0;
#pragma omp simd reduction(max : m)
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] > b[k] ? a[k] - b[k] : b[k] - a[k];
    m = d > m ? d : m;
  }
  return m;
}

/// Sparse (key, gap) list for one slot, sorted by key, gaps > 0 only.
struct SlotGaps {
  int Q = 0;
  std::vector<std::uint64_t> keys;
  std::vector<double> gaps;  // max |f_i - f_j| without epsilon
  std::vector<std::uint32_t> slot_of;  // filled when merged across slots
};

inline SlotGaps compute_slot_gaps(const FunctionSpec& spec, const OutputIndex& outputs, const SlotShape& s,
                                  const BuildLimits& limits) {
  SlotGaps result;
  result.Q = s.Q;
  if (s.V <= 1) return result;
  const int K = s.K;
  const std::uint64_t C = ipow(static_cast<std::uint64_t>(s.V), K);
  const std::uint64_t rest_per_node = std::uint64_t{1} << (s.B - s.valid_bits);
  // Sum gaps do not depend on the context.
  const bool context_free = spec.kind == FunctionKind::sum;
  const std::uint64_t CTX = context_free ? 1 : ipow(rest_per_node, K);
  const double work = 0.5 * static_cast<double>(C) * static_cast<double>(C - 1) * static_cast<double>(CTX);
  const std::uint64_t keyspace = ipow(key_radix(s.Q), K);
  if (work > limits.max_pair_work || keyspace > limits.max_keys)
    throw InstanceTooLarge("slot with " + std::to_string(C) + " configurations and " + std::to_string(CTX) +
                           " contexts exceeds the constraint-build budget");

  // F[c][ctx]: output value of the tuple assembled from slot configuration c
  // and context ctx (all other bits of every node).
  std::vector<double> F(static_cast<std::size_t>(C * CTX));
  {
    std::vector<int> levels(static_cast<std::size_t>(K));
    const int Qin = spec.levels();
    const std::uint64_t low_mask = (std::uint64_t{1} << s.shift) - 1;
    if (context_free) {
      for (std::uint64_t c = 0; c < C; ++c) {
        std::uint64_t rem = c;
        for (int k = K; k-- > 0;) {
          levels[static_cast<std::size_t>(k)] = static_cast<int>((rem % s.V) << s.shift);
          rem /= static_cast<std::uint64_t>(s.V);
        }
        F[static_cast<std::size_t>(c)] = outputs.tuple_value(tuple_index(levels, Qin));
      }
    } else {
      const std::uint64_t n = spec.tuple_count();
      for (std::uint64_t t = 0; t < n; ++t) {
        tuple_levels(t, Qin, levels);
        std::uint64_t c = 0, ctx = 0;
        for (int k = 0; k < K; ++k) {
          const std::uint64_t level = static_cast<std::uint64_t>(levels[static_cast<std::size_t>(k)]);
          const std::uint64_t g = (level >> s.shift) & (static_cast<std::uint64_t>(s.V) - 1);
          const std::uint64_t rest = ((level >> (s.shift + s.valid_bits)) << s.shift) | (level & low_mask);
          c = c * static_cast<std::uint64_t>(s.V) + g;
          ctx = ctx * rest_per_node + rest;
        }
        F[static_cast<std::size_t>(c * CTX + ctx)] = outputs.tuple_value(t);
      }
    }
  }

  std::vector<double> dense(static_cast<std::size_t>(keyspace), 0.0);
  std::vector<int> du(static_cast<std::size_t>(K)), dv(static_cast<std::size_t>(K));
  auto digits = [&](std::uint64_t c, std::vector<int>& out) {
    for (int k = K; k-- > 0;) {
      out[static_cast<std::size_t>(k)] = static_cast<int>(c % static_cast<std::uint64_t>(s.V));
      c /= static_cast<std::uint64_t>(s.V);
    }
  };

  auto record = [&](std::uint64_t i, std::uint64_t j, double g) {
    if (g <= kOutputMergeTol) return;
    digits(i, du);
    digits(j, dv);
    double& slot = dense[static_cast<std::size_t>(pair_key(du, dv, s.Q))];
    slot = std::max(slot, g);
  };

  const std::uint64_t orbit_space = ipow(static_cast<std::uint64_t>(s.V) * static_cast<std::uint64_t>(s.V), K);
  if (spec.kind != FunctionKind::custom_table && K > 1 && orbit_space <= limits.max_keys) {
    // Symmetric functions: node permutations preserve the gap, so compute
    // one representative per orbit, memoized by the node-sorted digit pairs.
    std::vector<double> memo(static_cast<std::size_t>(orbit_space), -1.0);
    std::vector<std::pair<int, int>> pairs(static_cast<std::size_t>(K));
    for (std::uint64_t i = 0; i < C; ++i) {
      digits(i, du);
      const double* a = F.data() + i * CTX;
      for (std::uint64_t j = i + 1; j < C; ++j) {
        digits(j, dv);
        for (int k = 0; k < K; ++k) pairs[static_cast<std::size_t>(k)] = {du[static_cast<std::size_t>(k)], dv[static_cast<std::size_t>(k)]};
        std::sort(pairs.begin(), pairs.end());
        std::uint64_t orbit = 0;
        for (const auto& [x, y] : pairs) orbit = (orbit * static_cast<std::uint64_t>(s.V) + static_cast<std::uint64_t>(x)) * static_cast<std::uint64_t>(s.V) + static_cast<std::uint64_t>(y);
        double& g = memo[static_cast<std::size_t>(orbit)];
        if (g < 0.0) g = linf_distance(a, F.data() + j * CTX, static_cast<std::size_t>(CTX));
        if (g <= kOutputMergeTol) continue;
        double& slot = dense[static_cast<std::size_t>(pair_key(du, dv, s.Q))];
        slot = std::max(slot, g);
      }
    }
  } else {
    // Tiled all-pairs L-infinity distance between the rows of F.
    const std::uint64_t tile = std::max<std::uint64_t>(1, std::min<std::uint64_t>(64, C));
    const std::uint64_t ctx_block = std::min<std::uint64_t>(CTX, 512);
    std::vector<double> partial(static_cast<std::size_t>(tile * tile));
    for (std::uint64_t i0 = 0; i0 < C; i0 += tile) {
      const std::uint64_t i1 = std::min(C, i0 + tile);
      for (std::uint64_t j0 = i0; j0 < C; j0 += tile) {
        const std::uint64_t j1 = std::min(C, j0 + tile);
        std::fill(partial.begin(), partial.end(), 0.0);
        for (std::uint64_t k0 = 0; k0 < CTX; k0 += ctx_block) {
          const std::uint64_t len = std::min(ctx_block, CTX - k0);
          for (std::uint64_t i = i0; i < i1; ++i) {
            const double* a = F.data() + i * CTX + k0;
            for (std::uint64_t j = std::max(j0, i + 1); j < j1; ++j) {
              double& p = partial[static_cast<std::size_t>((i - i0) * tile + (j - j0))];
              p = std::max(p, linf_distance(a, F.data() + j * CTX + k0, static_cast<std::size_t>(len)));
            }
          }
        }
        for (std::uint64_t i = i0; i < i1; ++i)
          for (std::uint64_t j = std::max(j0, i + 1); j < j1; ++j)
            record(i, j, partial[static_cast<std::size_t>((i - i0) * tile + (j - j0))]);
      }
    }
  }

  for (std::uint64_t key = 0; key < keyspace; ++key) {
    if (dense[static_cast<std::size_t>(key)] > 0.0) {
      result.keys.push_back(key);
      result.gaps.push_back(dense[static_cast<std::size_t>(key)]);
    }
  }
  return result;
}

}  // namespace detail

/// Builds constraint sets for one function; caches per-slot gap tables so
/// that plans sharing a group (same bit range) reuse the enumeration.
class ConstraintBuilder {
 public:
  ConstraintBuilder(FunctionSpec spec, std::shared_ptr<const OutputIndex> outputs, BuildLimits limits = {})
      : spec_(std::move(spec)), outputs_(std::move(outputs)), limits_(limits) {}

  const FunctionSpec& spec() const { return spec_; }
  const OutputIndex& outputs() const { return *outputs_; }
  std::shared_ptr<const OutputIndex> outputs_ptr() const { return outputs_; }

  /// Cost-only check: true if build() would stay within the limits.
  bool tractable(const GroupPlan& plan) const {
    if (outputs_->constant()) return true;
    for (int l = 0; l < plan.groups(); ++l) {
      const auto s = detail::slot_shape(plan, spec_.K, l);
      if (s.V <= 1) continue;
      const double C = static_cast<double>(ipow(static_cast<std::uint64_t>(s.V), spec_.K));
      const double ctx = spec_.kind == FunctionKind::sum
                             ? 1.0
                             : static_cast<double>(ipow(std::uint64_t{1} << (s.B - s.valid_bits), spec_.K));
      if (0.5 * C * (C - 1) * ctx > limits_.max_pair_work) return false;
      if (ipow(detail::key_radix(s.Q), spec_.K) > limits_.max_keys) return false;
    }
    return true;
  }

  ConstraintSet build(const GroupPlan& plan) {
    if (plan.input_bits() != spec_.B) throw std::invalid_argument("plan bit budget does not match B");
    ConstraintSet cs;
    cs.K = spec_.K;
    cs.plan = plan;
    cs.epsilon = outputs_->epsilon;
    if (outputs_->constant()) {
      cs.constant_function = true;
      return cs;
    }
    const double eps = outputs_->epsilon;
    if (plan.mode() == PartitionMode::uniform) {
      // Shared codebook: identical difference vectors from different slots
      // are the same constraint; keep the larger gap.
      std::map<std::uint64_t, std::pair<double, std::uint32_t>> merged;
      const int Q = plan.symbols(0);
      for (int l = 0; l < plan.groups(); ++l) {
        const auto sg = slot_gaps(plan, l);
        for (std::size_t i = 0; i < sg->keys.size(); ++i) {
          auto [it, inserted] = merged.try_emplace(sg->keys[i], sg->gaps[i], static_cast<std::uint32_t>(l));
          if (!inserted && sg->gaps[i] > it->second.first) it->second = {sg->gaps[i], static_cast<std::uint32_t>(l)};
        }
      }
      cs.items.reserve(merged.size());
      for (const auto& [key, val] : merged) {
        auto [plus, minus] = detail::key_configs(key, spec_.K, Q);
        cs.items.push_back({val.second, plus, minus, eps * val.first});
      }
    } else {
      for (int l = 0; l < plan.groups(); ++l) {
        const auto sg = slot_gaps(plan, l);
        cs.items.reserve(cs.items.size() + sg->keys.size());
        for (std::size_t i = 0; i < sg->keys.size(); ++i) {
          auto [plus, minus] = detail::key_configs(sg->keys[i], spec_.K, sg->Q);
          cs.items.push_back({static_cast<std::uint32_t>(l), plus, minus, eps * sg->gaps[i]});
        }
      }
    }
    return cs;
  }

 private:
  std::shared_ptr<const detail::SlotGaps> slot_gaps(const GroupPlan& plan, int l) {
    const auto s = detail::slot_shape(plan, spec_.K, l);
    const auto key = std::make_tuple(s.Q, s.V, s.shift, s.valid_bits);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto computed = std::make_shared<const detail::SlotGaps>(detail::compute_slot_gaps(spec_, *outputs_, s, limits_));
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(key, std::move(computed)).first->second;
  }

  FunctionSpec spec_;
  std::shared_ptr<const OutputIndex> outputs_;
  BuildLimits limits_;
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, int>, std::shared_ptr<const detail::SlotGaps>> cache_;
};

inline ConstraintSet build_constraints(const FunctionSpec& spec, const OutputIndex& outputs, const GroupPlan& plan,
                                       BuildLimits limits = {}) {
  ConstraintBuilder builder(spec, std::make_shared<const OutputIndex>(outputs), limits);
  return builder.build(plan);
}

/// Aggregated points of every slot, computed once per design.
class PointCache {
 public:
  explicit PointCache(const ModulationDesign& design) {
    const int groups = design.shared() ? 1 : design.slots();
    for (int g = 0; g < groups; ++g) points_.push_back(slot_points(design, g));
    shared_ = design.shared();
  }
  const std::vector<cplx>& slot(std::uint32_t l) const { return points_[shared_ ? 0 : l]; }
  cplx difference(const PairConstraint& pc) const {
    const auto& p = slot(pc.slot);
    return p[pc.plus] - p[pc.minus];
  }

 private:
  std::vector<std::vector<cplx>> points_;
  bool shared_ = false;
};

/// sum_l |e_l^T x_l|^2 for a constraint.
inline double pair_distance(const ModulationDesign& design, const ConstraintSet& cs, std::size_t j) {
  const PairConstraint& pc = cs.items[j];
  const int l = static_cast<int>(pc.slot);
  cplx acc{};
  for (auto [k, q, s] : cs.support(j)) acc += static_cast<double>(s) * design.symbol(l, k, q);
  return std::norm(acc);
}

inline double scaled_distance(const ModulationDesign& design, const ConstraintSet& cs, std::size_t j) {
  const double gap = cs.items[j].gap;
  if (!(gap > 0.0)) throw DomainError("scaled distance of a pair with zero output gap");
  return pair_distance(design, cs, j) / gap;
}

struct DminResult {
  double value = std::numeric_limits<double>::infinity();
  bool empty = true;
  std::size_t argmin = static_cast<std::size_t>(-1);
};

/// Worst-case scaled distance. `weights` (one per slot) gives the weighted
/// variant; it is ignored for shared-codebook designs.
inline DminResult d_min(const ModulationDesign& design, const ConstraintSet& cs,
                        std::span<const double> weights = {}) {
  DminResult r;
  if (cs.empty()) return r;
  r.empty = false;
  const PointCache points(design);
  const bool weighted = !weights.empty() && !design.shared();
  for (std::size_t j = 0; j < cs.items.size(); ++j) {
    const PairConstraint& pc = cs.items[j];
    double d = std::norm(points.difference(pc)) / pc.gap;
    if (weighted) d *= weights[pc.slot];
    if (d < r.value) {
      r.value = d;
      r.argmin = j;
    }
  }
  return r;
}

}  // namespace aircomp
