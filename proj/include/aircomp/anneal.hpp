#pragma once

// Simulated annealing over group-width vectors with a CCCP inner solve as
// the energy (achieved weighted worst-case distance).

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "aircomp/cccp.hpp"
#include "aircomp/geometry.hpp"
#include "aircomp/partition.hpp"

namespace aircomp {

struct AnnealSchedule {
  double phi0 = 1.0;
  double alpha = 0.9;
  double phi_min = 1e-3;
  int moves_per_temp = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(phi_min > 0.0) || !(phi0 > phi_min)) throw std::invalid_argument("schedule needs phi0 > phi_min > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (moves_per_temp < 1) throw std::invalid_argument("moves_per_temp must be positive");
  }

  /// Number of temperatures phi0 * alpha^r that are not below phi_min.
  int temperature_steps() const {
    int n = 0;
    for (double phi = phi0; phi >= phi_min; phi *= alpha) ++n;
    return n;
  }
};

inline double accept_probability(double e_new, double e_old, double phi) {
  if (!(phi > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (e_new >= e_old) return 1.0;
  return std::exp((e_new - e_old) / phi);
}

struct EnergyResult {
  double energy = 0.0;  // weighted d_min of the CCCP design; -inf when skipped
  double d_min_unweighted = 0.0;
  bool tractable = true;
  std::shared_ptr<const ModulationDesign> design;
  std::size_t constraints = 0;
};

/// Energy of a width vector, cached per vector. Thread-safe.
class EnergyEvaluator {
 public:
  EnergyEvaluator(std::shared_ptr<ConstraintBuilder> builder, double sigma, CccpConfig cccp)
      : builder_(std::move(builder)), sigma_(sigma), cccp_(std::move(cccp)) {}

  std::shared_ptr<const EnergyResult> operator()(const std::vector<int>& b) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(b); it != cache_.end()) return it->second;
    }
    auto r = std::make_shared<const EnergyResult>(compute(b));
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(b, std::move(r)).first->second;
  }

  std::size_t evaluations() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

  ConstraintBuilder& builder() { return *builder_; }
  double sigma() const { return sigma_; }

 private:
  EnergyResult compute(const std::vector<int>& b) const {
    const GroupPlan plan = GroupPlan::adaptive(b, builder_->spec().B);
    EnergyResult r;
    if (!builder_->tractable(plan)) {
      r.tractable = false;
      r.energy = -std::numeric_limits<double>::infinity();
      r.d_min_unweighted = r.energy;
      return r;
    }
    const ConstraintSet cs = builder_->build(plan);
    const auto weights = slot_weights(plan, sigma_);
    CccpResult res;
    try {
      res = run_cccp(plan, builder_->spec().K, cs, weights, cccp_);
    } catch (const InitializationFailed& e) {
      throw InitializationFailed(std::string(e.what()) + " (b=[" + plan.label() + "])");
    }
    r.constraints = cs.size();
    r.energy = res.design.c;
    r.d_min_unweighted = d_min(res.design, cs).value;
    r.design = std::make_shared<const ModulationDesign>(std::move(res.design));
    return r;
  }

  std::shared_ptr<ConstraintBuilder> builder_;
  double sigma_;
  CccpConfig cccp_;
  mutable std::mutex mutex_;
  std::map<std::vector<int>, std::shared_ptr<const EnergyResult>> cache_;
};

struct AnnealLogEntry {
  int r = 0;
  double phi = 0.0;
  std::vector<int> from;
  std::vector<int> to;
  double e_old = 0.0;
  double e_new = 0.0;
  double p = 0.0;
  bool accepted = false;
};

struct AnnealState {
  std::vector<int> current;
  double current_energy = 0.0;
  std::vector<int> best;
  double best_energy = -std::numeric_limits<double>::infinity();
  std::shared_ptr<const ModulationDesign> best_design;
  double initial_energy = 0.0;
  double temperature = 0.0;
  int steps = 0;
  std::vector<AnnealLogEntry> log;

  void write_csv(std::ostream& os) const {
    auto dash = [](const std::vector<int>& b) {
      std::string s;
      for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "-" : "") + std::to_string(b[i]);
      return s;
    };
    os << "r,phi,b,b_new,e_old,e_new,p,accepted\n";
    for (const auto& e : log)
      os << e.r << ',' << e.phi << ',' << dash(e.from) << ',' << dash(e.to) << ',' << e.e_old << ',' << e.e_new << ','
         << e.p << ',' << (e.accepted ? 1 : 0) << '\n';
  }
};

struct AnnealResult {
  GroupPlan plan;
  std::shared_ptr<const ModulationDesign> design;
  AnnealState state;
};

/// Starts from the balanced composition; returns the best state visited.
inline AnnealResult run_anneal(EnergyEvaluator& energy, int L, const AnnealSchedule& schedule) {
  schedule.validate();
  const int B = energy.builder().spec().B;
  if (B < L) throw std::invalid_argument("annealing needs B >= L");
  std::mt19937_64 rng(schedule.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  AnnealState st;
  st.current = balanced_composition(B, L);
  auto e0 = energy(st.current);
  st.current_energy = e0->energy;
  st.initial_energy = e0->energy;
  st.best = st.current;
  st.best_energy = e0->energy;
  st.best_design = e0->design;

  int r = 0;
  for (double phi = schedule.phi0; phi >= schedule.phi_min; phi *= schedule.alpha, ++r) {
    st.temperature = phi;
    for (int move = 0; move < schedule.moves_per_temp; ++move) {
      const GroupPlan here = GroupPlan::adaptive(st.current, B);
      const GroupPlan there = neighbor(here, rng);
      AnnealLogEntry entry{r, phi, st.current, there.widths(), st.current_energy, st.current_energy, 1.0, false};
      if (!(there == here)) {
        auto e = energy(there.widths());
        entry.e_new = e->energy;
        entry.p = accept_probability(e->energy, st.current_energy, phi);
        entry.accepted = unit(rng) < entry.p;
        if (entry.accepted) {
          st.current = there.widths();
          st.current_energy = e->energy;
        }
        if (e->energy > st.best_energy) {
          st.best = there.widths();
          st.best_energy = e->energy;
          st.best_design = e->design;
        }
      }
      st.log.push_back(std::move(entry));
    }
    ++st.steps;
  }
  if (!st.best_design) throw std::runtime_error("no tractable composition visited for B=" + std::to_string(B));
  return {GroupPlan::adaptive(st.best, B), st.best_design, std::move(st)};
}

}  // namespace aircomp
