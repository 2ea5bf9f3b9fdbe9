#pragma once

// End-to-end design and simulation entry points shared by the CLI and the
// experiment harness.

#include <memory>
#include <string>
#include <vector>

#include "aircomp/airsim.hpp"
#include "aircomp/anneal.hpp"
#include "aircomp/cccp.hpp"
#include "aircomp/design_io.hpp"
#include "aircomp/geometry.hpp"

namespace aircomp {

struct DesignRequest {
  Method method = Method::ubp;
  FunctionSpec spec;
  double epsilon = 1.0;
  int L = 1;
  double sigma = 1.0;
  CccpConfig cccp;
  AnnealSchedule schedule;
};

struct DesignRun {
  DesignFile file;
  CccpTrace trace;  // UBP only
  std::optional<AnnealState> anneal;
};

/// Builds outputs and a constraint builder for a function; both can be
/// reused across plans of the same function.
struct FunctionContext {
  FunctionSpec spec;
  std::shared_ptr<const OutputIndex> outputs;
  std::shared_ptr<ConstraintBuilder> builder;

  FunctionContext(FunctionSpec s, double epsilon)
      : spec(std::move(s)),
        outputs(std::make_shared<const OutputIndex>(enumerate_outputs(spec, epsilon))),
        builder(std::make_shared<ConstraintBuilder>(spec, outputs)) {}
};

inline DesignFile describe_design(const FunctionContext& ctx, Method method, double sigma, const ModulationDesign& design,
                                  const ConstraintSet& cs, const CccpConfig& cccp) {
  DesignFile f;
  f.method = method;
  f.spec = ctx.spec;
  f.epsilon = ctx.outputs->epsilon;
  f.sigma = sigma;
  f.design = design;
  f.d_min_unweighted = d_min(design, cs).value;
  const auto w = slot_weights(design.plan, sigma);
  f.d_min_weighted = d_min(design, cs, w).value;
  f.M = ctx.outputs->size();
  f.M_tilde = cs.size();
  f.delta = cccp.delta;
  f.tol_feas = cccp.surrogate.solver.tol_feas;
  f.tol_opt = cccp.surrogate.solver.tol_opt;
  f.init = std::string(to_string(cccp.init));
  return f;
}

inline DesignRun run_design(FunctionContext& ctx, const DesignRequest& req) {
  if (req.L < 1 || req.L > ctx.spec.B) throw std::invalid_argument("L must lie in [1, B]");
  DesignRun run;
  if (req.method == Method::ubp) {
    const GroupPlan plan = GroupPlan::uniform(ctx.spec.B, req.L);
    const ConstraintSet cs = ctx.builder->build(plan);
    CccpResult res = run_cccp(plan, ctx.spec.K, cs, {}, req.cccp);
    run.file = describe_design(ctx, req.method, req.sigma, res.design, cs, req.cccp);
    run.trace = std::move(res.trace);
  } else {
    EnergyEvaluator energy(ctx.builder, req.sigma, req.cccp);
    AnnealResult res = run_anneal(energy, req.L, req.schedule);
    const ConstraintSet cs = ctx.builder->build(res.plan);
    run.file = describe_design(ctx, req.method, req.sigma, *res.design, cs, req.cccp);
    AnnealSummary s{req.schedule, res.state.best_energy, res.state.initial_energy, res.state.steps};
    run.file.anneal = s;
    run.anneal = std::move(res.state);
  }
  return run;
}

inline DesignRun run_design(const DesignRequest& req) {
  FunctionContext ctx(req.spec, req.epsilon);
  return run_design(ctx, req);
}

struct SimulationOutput {
  std::vector<ResultRow> rows;
  bool collision = false;
};

inline SimulationOutput simulate_design(const DesignFile& f, const std::string& design_hash, const SimConfig& sim) {
  const OutputIndex outputs = enumerate_outputs(f.spec, f.epsilon);
  const DecodeTable table = build_table(f.design, f.spec, outputs);
  SimulationOutput out;
  if (table.collision) {
    out.collision = true;
    return out;
  }
  for (const auto& p : nmse_sweep(f.design, f.spec, outputs, table, sim)) {
    ResultRow r;
    r.method = std::string(to_string(f.method));
    r.function = std::string(to_string(f.spec.kind));
    r.K = f.spec.K;
    r.B = f.spec.B;
    r.L = f.design.plan.groups();
    r.b = f.design.plan.label();
    r.snr_db = p.snr_db;
    r.trials = sim.trials;
    r.nmse = p.nmse;
    r.seed = sim.seed;
    r.design_hash = design_hash;
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace aircomp
