#pragma once

// Target functions, the uniform B-bit quantizer, and the enumeration of
// quantized function outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aircomp {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class FunctionKind { sum, product, max, custom_table };

inline std::string_view to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::sum: return "sum";
    case FunctionKind::product: return "prod";
    case FunctionKind::max: return "max";
    case FunctionKind::custom_table: return "table";
  }
  return "?";
}

inline FunctionKind parse_function_kind(std::string_view name) {
  if (name == "sum") return FunctionKind::sum;
  if (name == "prod" || name == "product") return FunctionKind::product;
  if (name == "max") return FunctionKind::max;
  if (name == "table" || name == "custom-table") return FunctionKind::custom_table;
  throw std::invalid_argument("unknown function kind: " + std::string(name));
}

/// Guard on K*B so that the Q^K input tuples can be enumerated in memory.
inline constexpr int kMaxTupleBits = 24;

/// Equal-output merge tolerance for enumerated function values.
inline constexpr double kOutputMergeTol = 1e-12;

struct FunctionSpec {
  FunctionKind kind = FunctionKind::sum;
  int K = 2;
  int B = 1;
  double x_min = 0.0;
  double x_max = 1.0;
  /// Dense Q^K table for custom functions, NaN marks a missing entry.
  std::shared_ptr<const std::vector<double>> table;

  int levels() const { return 1 << B; }

  std::uint64_t tuple_count() const {
    return std::uint64_t{1} << (static_cast<std::uint64_t>(B) * K);
  }

  double step() const { return (x_max - x_min) / static_cast<double>(levels() - 1); }

  double level_value(int level) const { return x_min + level * step(); }

  void validate() const {
    if (K < 2) throw std::invalid_argument("K must be at least 2");
    if (B < 1 || B > 16) throw std::invalid_argument("B must lie in [1, 16]");
    if (!(x_max > x_min)) throw std::invalid_argument("range must satisfy x_min < x_max");
    if (kind == FunctionKind::custom_table) {
      if (!table) throw std::invalid_argument("custom-table function without a table");
      if (K * B > kMaxTupleBits || table->size() != tuple_count())
        throw std::invalid_argument("custom table size does not match Q^K");
    }
  }
};

/// Index of a level tuple; node 0 is the most significant digit.
inline std::uint64_t tuple_index(std::span<const int> levels, int Q) {
  std::uint64_t t = 0;
  for (int level : levels) t = t * static_cast<std::uint64_t>(Q) + static_cast<std::uint64_t>(level);
  return t;
}

inline void tuple_levels(std::uint64_t t, int Q, std::span<int> out) {
  for (std::size_t k = out.size(); k-- > 0;) {
    out[k] = static_cast<int>(t % static_cast<std::uint64_t>(Q));
    t /= static_cast<std::uint64_t>(Q);
  }
}

/// Uniform mid-tread quantizer over [x_min, x_max]; out-of-range inputs clamp.
inline int quantize(double x, const FunctionSpec& spec) {
  const double clamped = std::clamp(x, spec.x_min, spec.x_max);
  const double scaled = (clamped - spec.x_min) / (spec.x_max - spec.x_min) * (spec.levels() - 1);
  return static_cast<int>(std::lround(scaled));
}

/// Bits of `level`, most significant first.
inline std::vector<int> to_bits(int level, int B) {
  if (B < 1 || B > 30 || level < 0 || level >= (1 << B))
    throw DomainError("level " + std::to_string(level) + " out of range for " + std::to_string(B) + " bits");
  std::vector<int> bits(static_cast<std::size_t>(B));
  for (int j = 0; j < B; ++j) bits[static_cast<std::size_t>(j)] = (level >> (B - 1 - j)) & 1;
  return bits;
}

inline int from_bits(std::span<const int> bits) {
  int level = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw DomainError("bit vector entries must be 0 or 1");
    level = (level << 1) | b;
  }
  return level;
}

inline double evaluate(const FunctionSpec& spec, std::span<const int> levels) {
  if (levels.size() != static_cast<std::size_t>(spec.K))
    throw DomainError("tuple length does not match K");
  for (int level : levels)
    if (level < 0 || level >= spec.levels()) throw DomainError("level index out of range");
  switch (spec.kind) {
    case FunctionKind::sum: {
      double s = 0.0;
      for (int level : levels) s += spec.level_value(level);
      return s;
    }
    case FunctionKind::product: {
      double p = 1.0;
      for (int level : levels) p *= spec.level_value(level);
      return p;
    }
    case FunctionKind::max: {
      int top = 0;
      for (int level : levels) top = std::max(top, level);
      return spec.level_value(top);
    }
    case FunctionKind::custom_table: {
      const double v = (*spec.table)[tuple_index(levels, spec.levels())];
      if (std::isnan(v)) throw DomainError("custom table has no entry for the requested tuple");
      return v;
    }
  }
  return 0.0;
}

/// Function value of every input tuple, in tuple_index order.
inline std::vector<double> tabulate(const FunctionSpec& spec) {
  spec.validate();
  if (spec.K * spec.B > kMaxTupleBits)
    throw DomainError("Q^K = 2^" + std::to_string(spec.K * spec.B) + " tuples exceeds the enumeration guard");
  const std::uint64_t n = spec.tuple_count();
  std::vector<double> values(static_cast<std::size_t>(n));
  std::vector<int> levels(static_cast<std::size_t>(spec.K), 0);
  for (std::uint64_t t = 0; t < n; ++t) {
    values[static_cast<std::size_t>(t)] = evaluate(spec, levels);
    for (std::size_t k = levels.size(); k-- > 0;) {
      if (++levels[k] < spec.levels()) break;
      levels[k] = 0;
    }
  }
  return values;
}

/// Distinct quantized outputs and the output id of every input tuple.
struct OutputIndex {
  std::vector<double> values;              // strictly increasing
  std::vector<std::uint32_t> tuple_output; // output id per tuple
  double epsilon = 1.0;

  std::size_t size() const { return values.size(); }
  bool constant() const { return values.size() <= 1; }
  double f_min() const { return values.front(); }
  double f_max() const { return values.back(); }
  double gap(std::size_t i, std::size_t j) const { return epsilon * std::abs(values[i] - values[j]); }
  double tuple_value(std::uint64_t t) const { return values[tuple_output[static_cast<std::size_t>(t)]]; }
};

inline OutputIndex enumerate_outputs(const FunctionSpec& spec, double epsilon = 1.0) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const std::vector<double> raw = tabulate(spec);
  std::vector<double> sorted = raw;
  std::sort(sorted.begin(), sorted.end());

  OutputIndex out;
  out.epsilon = epsilon;
  for (double v : sorted)
    if (out.values.empty() || v - out.values.back() > kOutputMergeTol) out.values.push_back(v);

  out.tuple_output.resize(raw.size());
  for (std::size_t t = 0; t < raw.size(); ++t) {
    // values are spaced more than the tolerance apart, so the first entry
    // not below v - tol is the representative of v
    auto it = std::lower_bound(out.values.begin(), out.values.end(), raw[t] - kOutputMergeTol);
    out.tuple_output[t] = static_cast<std::uint32_t>(it - out.values.begin());
  }
  return out;
}

}  // namespace aircomp
