#pragma once

// Bit-group plans: the group-size vector b, the splitter that cuts a level's
// bit string into per-group integers, Gaussian importance weights, and the
// single-bit moves used by the annealer.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aircomp/funcspec.hpp"

namespace aircomp {

enum class PartitionMode { uniform, adaptive };

inline std::string_view to_string(PartitionMode mode) {
  return mode == PartitionMode::uniform ? "uniform" : "adaptive";
}

class GroupPlan {
 public:
  GroupPlan() = default;

  /// ceil(B/L) bits per group; the leftmost padded_B - B bits are zero pad.
  static GroupPlan uniform(int B, int L) {
    if (B < 1 || L < 1) throw std::invalid_argument("uniform plan needs B >= 1 and L >= 1");
    const int width = (B + L - 1) / L;
    return GroupPlan(PartitionMode::uniform, std::vector<int>(static_cast<std::size_t>(L), width), B);
  }

  /// Non-decreasing composition of B into L positive parts.
  static GroupPlan adaptive(std::vector<int> widths, int B) {
    if (widths.empty()) throw std::invalid_argument("adaptive plan needs at least one group");
    for (std::size_t l = 0; l < widths.size(); ++l) {
      if (widths[l] < 1) throw std::invalid_argument("group widths must be positive");
      if (l > 0 && widths[l] < widths[l - 1])
        throw std::invalid_argument("adaptive group widths must be non-decreasing");
    }
    if (std::accumulate(widths.begin(), widths.end(), 0) != B)
      throw std::invalid_argument("adaptive group widths must sum to B");
    return GroupPlan(PartitionMode::adaptive, std::move(widths), B);
  }

  PartitionMode mode() const { return mode_; }
  int groups() const { return static_cast<int>(widths_.size()); }
  const std::vector<int>& widths() const { return widths_; }
  int width(int l) const { return widths_[static_cast<std::size_t>(l)]; }
  int input_bits() const { return input_bits_; }
  int padded_bits() const { return cumulative_.back(); }
  int pad_bits() const { return padded_bits() - input_bits_; }

  /// s_l: bits in groups [0, l). cumulative(0) = 0, cumulative(L) = padded_B.
  int cumulative(int l) const { return cumulative_[static_cast<std::size_t>(l)]; }

  int symbols(int l) const { return 1 << width(l); }

  /// Pad bits that fall inside group l.
  int pad_in_group(int l) const {
    return std::clamp(pad_bits() - cumulative(l), 0, width(l));
  }

  /// Number of group values reachable by unpadded levels.
  int valid_symbols(int l) const { return 1 << (width(l) - pad_in_group(l)); }

  /// Bit position (from the LSB of the padded word) of group l's lowest bit.
  int shift(int l) const { return padded_bits() - cumulative(l + 1); }

  std::string label() const {
    std::string s;
    for (std::size_t l = 0; l < widths_.size(); ++l) {
      if (l) s += '-';
      s += std::to_string(widths_[l]);
    }
    return s;
  }

  friend bool operator==(const GroupPlan& a, const GroupPlan& b) {
    return a.mode_ == b.mode_ && a.widths_ == b.widths_ && a.input_bits_ == b.input_bits_;
  }

 private:
  GroupPlan(PartitionMode mode, std::vector<int> widths, int B)
      : mode_(mode), widths_(std::move(widths)), input_bits_(B) {
    cumulative_.assign(widths_.size() + 1, 0);
    for (std::size_t l = 0; l < widths_.size(); ++l) cumulative_[l + 1] = cumulative_[l] + widths_[l];
  }

  PartitionMode mode_ = PartitionMode::uniform;
  std::vector<int> widths_{1};
  std::vector<int> cumulative_{0, 1};
  int input_bits_ = 1;
};

/// Group integers of `level`, group 0 holding the most significant bits.
inline std::vector<int> split(int level, const GroupPlan& plan) {
  if (level < 0 || level >= (1 << plan.input_bits()))
    throw DomainError("level out of range for the plan's bit budget");
  std::vector<int> groups(static_cast<std::size_t>(plan.groups()));
  for (int l = 0; l < plan.groups(); ++l)
    groups[static_cast<std::size_t>(l)] = (level >> plan.shift(l)) & (plan.symbols(l) - 1);
  return groups;
}

inline int unsplit(std::span<const int> groups, const GroupPlan& plan) {
  if (groups.size() != static_cast<std::size_t>(plan.groups()))
    throw DomainError("group vector length does not match the plan");
  long long level = 0;
  for (int l = 0; l < plan.groups(); ++l) {
    const int g = groups[static_cast<std::size_t>(l)];
    if (g < 0 || g >= plan.symbols(l)) throw DomainError("group value exceeds its width");
    level |= static_cast<long long>(g) << plan.shift(l);
  }
  if (level >= (1LL << plan.input_bits())) throw DomainError("nonzero pad bits in group vector");
  return static_cast<int>(level);
}

struct ImportanceWeights {
  double sigma = 1.0;
  std::vector<double> raw;
  std::vector<double> normalized;
};

inline ImportanceWeights gaussian_weights(int L, double sigma) {
  if (L < 1) throw std::invalid_argument("weights need L >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  ImportanceWeights w;
  w.sigma = sigma;
  for (int l = 0; l < L; ++l) w.raw.push_back(std::exp(-static_cast<double>(l) * l / (2.0 * sigma * sigma)));
  const double total = std::accumulate(w.raw.begin(), w.raw.end(), 0.0);
  for (double r : w.raw) w.normalized.push_back(r / total);
  return w;
}

/// Per-slot weights used in distance evaluation: Gaussian for adaptive
/// plans, identically one for uniform plans.
inline std::vector<double> slot_weights(const GroupPlan& plan, double sigma) {
  if (plan.mode() == PartitionMode::uniform) return std::vector<double>(static_cast<std::size_t>(plan.groups()), 1.0);
  return gaussian_weights(plan.groups(), sigma).normalized;
}

/// Most balanced non-decreasing composition, e.g. B=6, L=4 -> [1,1,2,2].
inline std::vector<int> balanced_composition(int B, int L) {
  if (L < 1 || B < L) throw std::invalid_argument("balanced composition needs B >= L >= 1");
  std::vector<int> b(static_cast<std::size_t>(L), B / L);
  for (int i = 0; i < B % L; ++i) ++b[static_cast<std::size_t>(L - 1 - i)];
  return b;
}

/// All non-decreasing compositions of B into L positive parts, lexicographic.
inline std::vector<std::vector<int>> compositions(int B, int L) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int remaining, int parts, int lo) -> void {
    if (parts == 0) {
      if (remaining == 0) out.push_back(cur);
      return;
    }
    for (int v = lo; v * parts <= remaining; ++v) {
      cur.push_back(v);
      self(self, remaining - v, parts - 1, v);
      cur.pop_back();
    }
  };
  if (L >= 1 && B >= L) rec(rec, B, L, 1);
  return out;
}

/// Width vectors reachable by moving one bit between adjacent groups while
/// keeping every group positive and the vector non-decreasing.
inline std::vector<std::vector<int>> legal_moves(const std::vector<int>& b) {
  std::vector<std::vector<int>> moves;
  auto legal = [](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1) return false;
      if (i > 0 && v[i] < v[i - 1]) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    for (int dir : {+1, -1}) {  // +1: bit from group i to i+1
      std::vector<int> v = b;
      v[i] -= dir;
      v[i + 1] += dir;
      if (legal(v)) moves.push_back(std::move(v));
    }
  }
  return moves;
}

template <class Rng>
GroupPlan neighbor(const GroupPlan& plan, Rng& rng) {
  if (plan.mode() != PartitionMode::adaptive) throw std::invalid_argument("neighbor needs an adaptive plan");
  const auto moves = legal_moves(plan.widths());
  if (moves.empty()) return plan;
  std::uniform_int_distribution<std::size_t> pick(0, moves.size() - 1);
  return GroupPlan::adaptive(moves[pick(rng)], plan.input_bits());
}

}  // namespace aircomp
