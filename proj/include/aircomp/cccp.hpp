#pragma once

// Convex-concave procedure for the max-min distance design: linearize the
// concave part of every distance constraint at the current point, solve
// the convex surrogate, move, repeat until the improvement drops below
// delta.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aircomp/geometry.hpp"
#include "aircomp/subsolver.hpp"

namespace aircomp {

enum class InitKind { ruler, random, given };

inline std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::ruler: return "ruler";
    case InitKind::random: return "random";
    case InitKind::given: return "given";
  }
  return "?";
}

inline InitKind parse_init_kind(std::string_view s) {
  if (s == "ruler") return InitKind::ruler;
  if (s == "random") return InitKind::random;
  if (s == "given") return InitKind::given;
  throw std::invalid_argument("unknown init kind: " + std::string(s));
}

struct CccpConfig {
  double delta = 1e-5;
  int max_outer = 200;
  InitKind init = InitKind::ruler;
  std::uint64_t seed = 0;
  /// Starting design for InitKind::given.
  std::shared_ptr<const ModulationDesign> given;
  SurrogateOptions surrogate;
  int random_retries = 50;
  double init_norm = 0.9;
  /// Called with (t, x^(t), c^(t)) for every accepted iterate, t = 0 first.
  std::function<void(int, const ModulationDesign&, double)> on_iterate;

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (max_outer < 1) throw std::invalid_argument("max_outer must be at least 1");
  }
};

struct CccpRecord {
  int t = 0;
  double c = 0.0;
  double feas_residual = 0.0;  // max(0, surrogate optimum - d_min(x))
  SolveStatus status = SolveStatus::optimal;
  int rounds = 0;
  int ipm_iterations = 0;
};

struct CccpTrace {
  std::vector<CccpRecord> records;
  bool converged = false;
  bool rejected_step = false;

  void write_csv(std::ostream& os) const {
    os << "iteration,c,residual,status\n";
    for (const auto& r : records) os << r.t << ',' << r.c << ',' << r.feas_residual << ',' << to_string(r.status) << '\n';
  }
};

class InitializationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CccpAborted : public std::runtime_error {
 public:
  CccpAborted(const std::string& what, CccpTrace trace) : std::runtime_error(what), trace(std::move(trace)) {}
  CccpTrace trace;
};

inline ModulationDesign ruler_design(const GroupPlan& plan, int K, double norm = 0.9) {
  ModulationDesign d = ModulationDesign::zeros(plan, K);
  for (std::size_t g = 0; g < d.codebooks.size(); ++g) {
    const int Q = plan.symbols(static_cast<int>(g));
    auto& cb = d.codebooks[g];
    for (int k = 0; k < K; ++k)
      for (int q = 0; q < Q; ++q)
        cb[static_cast<std::size_t>(k * Q + q)] = {q - (Q - 1) / 2.0, 0.01 * k * q};
    const double scale = norm / std::sqrt(squared_norm(cb));
    for (cplx& v : cb) v *= scale;
  }
  return d;
}

inline ModulationDesign random_design(const GroupPlan& plan, int K, std::mt19937_64& rng, double norm = 0.9) {
  ModulationDesign d = ModulationDesign::zeros(plan, K);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& cb : d.codebooks) {
    for (cplx& v : cb) {
      const double re = gauss(rng);
      v = {re, gauss(rng)};
    }
    const double scale = norm / std::sqrt(squared_norm(cb));
    for (cplx& v : cb) v *= scale;
  }
  return d;
}

inline std::string describe(const GroupPlan& plan, int K) {
  return "K=" + std::to_string(K) + " B=" + std::to_string(plan.input_bits()) + " b=[" + plan.label() + "] mode=" +
         std::string(to_string(plan.mode()));
}

/// Starting point with d_min > 0 (any point when the set is empty).
inline ModulationDesign initialize(const GroupPlan& plan, int K, const ConstraintSet& cs, const CccpConfig& config) {
  auto separates = [&](const ModulationDesign& d) { return cs.empty() || d_min(d, cs).value > 0.0; };
  if (config.init == InitKind::given) {
    if (!config.given) throw std::invalid_argument("init=given without a design");
    if (!(config.given->plan == plan) || config.given->K != K)
      throw std::invalid_argument("given design does not match the plan");
    return *config.given;
  }
  if (config.init == InitKind::ruler) {
    ModulationDesign d = ruler_design(plan, K, config.init_norm);
    if (separates(d)) return d;
  }
  std::mt19937_64 rng(config.seed);
  for (int attempt = 0; attempt < config.random_retries; ++attempt) {
    ModulationDesign d = random_design(plan, K, rng, config.init_norm);
    if (separates(d)) return d;
  }
  throw InitializationFailed("initialization failed: no separating start for " + describe(plan, K));
}

struct CccpResult {
  ModulationDesign design;
  CccpTrace trace;
};

/// `weights`: one per slot (empty for unweighted). For shared-codebook plans
/// weights are ignored, matching d_min.
inline CccpResult run_cccp(const GroupPlan& plan, int K, const ConstraintSet& cs, std::span<const double> weights,
                           const CccpConfig& config) {
  config.validate();
  CccpResult out;
  out.design = initialize(plan, K, cs, config);
  out.design.seed = config.seed;
  if (cs.empty()) {
    out.design.c = std::numeric_limits<double>::infinity();
    out.design.iterations = 0;
    out.trace.converged = true;
    return out;
  }
  const std::span<const double> w = plan.mode() == PartitionMode::uniform ? std::span<const double>{} : weights;

  ModulationDesign x = out.design;
  double c = d_min(x, cs, w).value;
  if (config.init == InitKind::given && std::isfinite(config.given->c)) c = std::min(c, config.given->c);
  out.trace.records.push_back({0, c, 0.0, SolveStatus::optimal, 0, 0});
  if (config.on_iterate) config.on_iterate(0, x, c);

  std::vector<std::uint32_t> active;
  int t = 0;
  for (; t < config.max_outer; ++t) {
    SurrogateResult step = solve_surrogate(x, c, cs, w, active, config.surrogate);
    if (step.status == SolveStatus::infeasible)
      throw CccpAborted("surrogate infeasible at iteration " + std::to_string(t) + " for " + describe(plan, K),
                        out.trace);
    const double achieved = d_min(step.design, cs, w).value;
    const double c_next = std::min(step.c, achieved);
    if (!std::isfinite(c_next) || c_next < c - config.surrogate.solver.tol_opt) {
      // would break monotonicity: keep the current point
      out.trace.rejected_step = true;
      break;
    }
    const double gain = c_next - c;
    x = std::move(step.design);
    c = c_next;
    active = std::move(step.active);
    out.trace.records.push_back(
        {t + 1, c, std::max(0.0, step.c - achieved), step.status, step.rounds, step.ipm_iterations});
    if (config.on_iterate) config.on_iterate(t + 1, x, c);
    if (gain < config.delta) {
      out.trace.converged = true;
      ++t;
      break;
    }
  }
  x.c = c;
  x.seed = config.seed;
  x.iterations = static_cast<int>(out.trace.records.size()) - 1;
  out.design = std::move(x);
  return out;
}

}  // namespace aircomp
