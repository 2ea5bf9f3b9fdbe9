// aircomp: design, simulate, verify and sweep digital over-the-air computation
// modulations.

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <ctime>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aircomp/aircomp.hpp"

namespace fs = std::filesystem;
using namespace aircomp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string default_dir() {
  const char* env = std::getenv("AIRCOMP_OUT_DIR");
  return env && *env ? std::string(env) : std::string(".");
}

std::string resolve_out(const std::string& given, const std::string& fallback_name) {
  if (!given.empty()) return given;
  return (fs::path(default_dir()) / fallback_name).string();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

/// "start:step:stop" (inclusive) or a comma-separated list.
std::vector<double> parse_snr(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("bad SNR value '" + s + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("SNR range must be start:step:stop");
    const double start = number(parts[0]), step = number(parts[1]), stop = number(parts[2]);
    if (!(step > 0.0) || stop < start) throw UsageError("SNR range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw UsageError("empty SNR list");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');)
    if (!p.empty()) out.push_back(p);
  return out;
}

struct FunctionArgs {
  std::string function = "sum";
  int K = 4;
  int B = 6;
  double x_min = 0.0;
  double x_max = 1.0;
  double epsilon = 1.0;
};

FunctionSpec make_spec(const std::string& function, const FunctionArgs& a) {
  FunctionSpec spec;
  spec.K = a.K;
  spec.B = a.B;
  spec.x_min = a.x_min;
  spec.x_max = a.x_max;
  if (function.rfind("table:", 0) == 0) {
    spec.kind = FunctionKind::custom_table;
    if (a.K * a.B > kMaxTupleBits) throw UsageError("custom table too large for K*B > 24");
    spec.table = read_function_table(function.substr(6), a.K, a.B);
  } else {
    try {
      spec.kind = parse_function_kind(function);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (spec.kind == FunctionKind::custom_table) throw UsageError("use --function table:<path>");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

struct DesignArgs {
  std::string method = "ubp";
  FunctionArgs fn;
  int L = 1;
  double sigma = 1.0;
  double delta = 1e-5;
  int max_outer = 200;
  std::uint64_t seed = 0;
  std::string init = "ruler";
  double phi0 = 1.0;
  double alpha = 0.9;
  double phi_min = 1e-3;
  std::string out;
  std::string trace_csv;
  std::string anneal_csv;
  bool timestamp = false;
};

DesignRequest make_request(const DesignArgs& a, const FunctionSpec& spec) {
  DesignRequest req;
  try {
    req.method = parse_method(a.method);
    req.cccp.init = parse_init_kind(a.init);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (req.cccp.init == InitKind::given) throw UsageError("--init given is only available through the library");
  req.spec = spec;
  req.epsilon = a.fn.epsilon;
  req.L = a.L;
  req.sigma = a.sigma;
  req.cccp.delta = a.delta;
  req.cccp.max_outer = a.max_outer;
  req.cccp.seed = a.seed;
  req.schedule.phi0 = a.phi0;
  req.schedule.alpha = a.alpha;
  req.schedule.phi_min = a.phi_min;
  req.schedule.seed = a.seed;
  if (req.L < 1 || req.L > spec.B) throw UsageError("--L must lie in [1, B]");
  try {
    req.cccp.validate();
    if (req.method == Method::iabp) req.schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(req.sigma > 0.0)) throw UsageError("--sigma must be positive");
  if (!(req.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
  return req;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string cell_name(const std::string& method, const std::string& function, int L) {
  std::string f = function;
  if (f.rfind("table:", 0) == 0) f = "table";
  return method + "_" + f + "_L" + std::to_string(L);
}

int cmd_design(const DesignArgs& a, const std::set<std::string>& given_flags) {
  if (a.method == "ubp") {
    for (const char* flag : {"--sigma", "--phi0", "--alpha", "--phi-min", "--anneal-log"})
      if (given_flags.count(flag)) throw UsageError(std::string(flag) + " only applies to --method iabp");
  }
  const FunctionSpec spec = make_spec(a.fn.function, a.fn);
  const DesignRequest req = make_request(a, spec);
  DesignRun run = run_design(req);
  if (a.timestamp) run.file.timestamp = utc_timestamp();
  const std::string out = resolve_out(a.out, cell_name(a.method, a.fn.function, a.L) + ".json");
  ensure_parent(out);
  save_design(out, run.file);
  if (!a.trace_csv.empty()) {
    ensure_parent(a.trace_csv);
    std::ostringstream os;
    run.trace.write_csv(os);
    write_text(a.trace_csv, os.str());
  }
  if (!a.anneal_csv.empty() && run.anneal) {
    ensure_parent(a.anneal_csv);
    std::ostringstream os;
    run.anneal->write_csv(os);
    write_text(a.anneal_csv, os.str());
  }
  const auto& f = run.file;
  std::cout << "design " << out << "\n"
            << "  b = [" << f.design.plan.label() << "]\n"
            << "  c = " << f.design.c << "\n"
            << "  d_min (unweighted) = " << f.d_min_unweighted << "\n"
            << "  d_min (weighted) = " << f.d_min_weighted << "\n"
            << "  M = " << f.M << ", M_tilde = " << f.M_tilde << "\n"
            << "  outer iterations = " << f.design.iterations << "\n";
  if (f.anneal) std::cout << "  anneal steps = " << f.anneal->steps << ", best energy = " << f.anneal->best_energy << "\n";
  return kExitOk;
}

struct SimArgs {
  std::string design;
  std::string snr = "5:5:40";
  int trials = 100;
  std::uint64_t seed = 0;
  std::string fading = "none";
  std::string snr_ref = "per-slot";
  std::string out;
};

SimConfig make_sim(const SimArgs& a) {
  SimConfig sim;
  sim.snr_db = parse_snr(a.snr);
  if (a.trials < 1) throw UsageError("--trials must be positive");
  sim.trials = a.trials;
  sim.seed = a.seed;
  if (a.fading == "none")
    sim.fading = Fading::none;
  else if (a.fading == "rayleigh" || a.fading == "rayleigh-inverted")
    sim.fading = Fading::rayleigh_inverted;
  else
    throw UsageError("--fading must be none or rayleigh");
  if (a.snr_ref == "per-slot")
    sim.reference = SnrReference::per_slot;
  else if (a.snr_ref == "stacked")
    sim.reference = SnrReference::stacked;
  else
    throw UsageError("--snr-ref must be per-slot or stacked");
  return sim;
}

std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::string text = kResultHeader;
  for (const auto& r : rows) text += format_row(r);
  return text;
}

int cmd_simulate(const SimArgs& a) {
  const SimConfig sim = make_sim(a);
  const std::string text = read_text(a.design);
  const DesignFile f = parse_design(text);
  const SimulationOutput res = simulate_design(f, content_hash(text), sim);
  if (res.collision) {
    std::cerr << "error: design " << a.design << " has colliding aggregated points; not computable\n";
    return kExitFailure;
  }
  const std::string out = resolve_out(a.out, fs::path(a.design).stem().string() + ".csv");
  ensure_parent(out);
  write_text(out, rows_csv(res.rows));
  std::cout << "results " << out << " (" << res.rows.size() << " rows)\n";
  return kExitOk;
}

struct VerifyArgs {
  std::string design;
  bool exhaustive = false;
};

int cmd_verify(const VerifyArgs& a) {
  const DesignFile f = load_design(a.design);
  const OutputIndex outputs = enumerate_outputs(f.spec, f.epsilon);
  const std::string instance = describe(f.design.plan, f.spec.K) + " f=" + std::string(to_string(f.spec.kind));
  std::vector<OracleReport> reports;

  {
    OracleReport r{instance, "norms", 0.0, true, ""};
    for (std::size_t g = 0; g < f.design.codebooks.size(); ++g)
      for (std::size_t k = 0; k < static_cast<std::size_t>(f.spec.K); ++k) {
        double n = 0.0;
        const std::size_t Q = f.design.codebooks[g].size() / static_cast<std::size_t>(f.spec.K);
        for (std::size_t q = 0; q < Q; ++q) n += std::norm(f.design.codebooks[g][k * Q + q]);
        r.max_deviation = std::max(r.max_deviation, std::sqrt(n) - 1.0);
        if (std::sqrt(n) > 1.0 + 1e-9) {
          r.pass = false;
          r.witness = "group " + std::to_string(g) + " node " + std::to_string(k);
        }
      }
    r.max_deviation = std::max(0.0, r.max_deviation);
    reports.push_back(r);
  }

  ConstraintBuilder builder(f.spec, std::make_shared<const OutputIndex>(outputs));
  const ConstraintSet cs = builder.build(f.design.plan);
  const auto weights = slot_weights(f.design.plan, f.sigma);
  auto compare = [&](const std::string& name, double stored, double fresh) {
    OracleReport r{instance, name, 0.0, true, ""};
    if (std::isinf(stored) && std::isinf(fresh)) return r;
    r.max_deviation = std::abs(stored - fresh);
    r.pass = r.max_deviation <= 1e-9 * std::max(1.0, std::abs(stored));
    if (!r.pass) {
      std::ostringstream os;
      os.precision(17);
      os << "stored " << stored << " recomputed " << fresh;
      r.witness = os.str();
    }
    return r;
  };
  const double dm = d_min(f.design, cs).value;
  reports.push_back(compare("d_min_unweighted", f.d_min_unweighted, dm));
  reports.push_back(compare("d_min_weighted", f.d_min_weighted, d_min(f.design, cs, weights).value));
  {
    OracleReport r{instance, "achieved_c", 0.0, true, ""};
    const double achieved = f.design.shared() ? dm : d_min(f.design, cs, weights).value;
    if (std::isfinite(f.design.c)) {
      r.max_deviation = std::max(0.0, f.design.c - achieved);
      r.pass = r.max_deviation <= 1e-7;
      if (!r.pass) r.witness = "c exceeds recomputed d_min";
    }
    reports.push_back(r);
  }

  const DecodeTable table = build_table(f.design, f.spec, outputs);
  {
    OracleReport r{instance, "decode_table", 0.0, !table.collision, ""};
    if (!outputs.constant() && table.collision != !(dm > 0.0)) {
      r.pass = false;
      r.max_deviation = 1.0;
      r.witness = "collision flag disagrees with d_min sign";
    }
    if (table.collision && r.witness.empty()) r.witness = "aggregated points collide";
    reports.push_back(r);
  }
  if (f.spec.tuple_count() <= kOracleMaxTuples && !outputs.constant()) {
    reports.push_back(check_distinguishability(f.design, f.spec, outputs));
    OracleReport r = compare("brute_d_min", dm, brute_d_min(f.design, f.spec, outputs));
    reports.push_back(r);
  }
  if (a.exhaustive) {
    OracleReport r{instance, "noiseless_decode", 0.0, true, ""};
    if (f.spec.K * f.spec.B > kMaxTupleBits) {
      r.pass = false;
      r.witness = "instance too large for exhaustive decoding";
    } else if (table.collision) {
      r.pass = false;
      r.witness = "decode table collision";
    } else {
      const std::vector<double> none(f.design.slots(), 0.0);
      std::mt19937_64 unused;
      std::vector<int> levels(static_cast<std::size_t>(f.spec.K));
      std::uint64_t wrong = 0;
      for (std::uint64_t t = 0; t < f.spec.tuple_count(); ++t) {
        tuple_levels(t, f.spec.levels(), levels);
        const auto y = transmit(f.design, levels, none, Fading::none, unused, unused);
        const double err = std::abs(decode(y, table) - outputs.tuple_value(t));
        r.max_deviation = std::max(r.max_deviation, err);
        if (err > 0.0) {
          if (wrong++ == 0) r.witness = "tuple " + std::to_string(t);
        }
      }
      r.pass = wrong == 0;
      if (!r.pass) r.witness += " (" + std::to_string(wrong) + " wrong of " + std::to_string(f.spec.tuple_count()) + ")";
    }
    reports.push_back(r);
  }

  bool ok = true;
  for (const auto& r : reports) {
    std::cout << r.json_line() << "\n";
    ok = ok && r.pass;
  }
  return ok ? kExitOk : kExitFailure;
}

struct SweepArgs {
  std::string methods = "ubp,iabp";
  std::string functions = "sum,prod,max";
  std::string L_list = "2,3,4";
  FunctionArgs fn;
  double sigma = 1.0;
  std::string snr = "5:5:40";
  int trials = 100;
  std::uint64_t seed = 0;
  std::string fading = "none";
  std::string out_dir;
  int jobs = 1;
};

int cmd_sweep(const SweepArgs& a) {
  const auto methods = split_list(a.methods);
  const auto functions = split_list(a.functions);
  std::vector<int> Ls;
  for (const auto& s : split_list(a.L_list)) {
    try {
      Ls.push_back(std::stoi(s));
    } catch (const std::exception&) {
      throw UsageError("bad --L-list entry '" + s + "'");
    }
  }
  if (methods.empty() || functions.empty() || Ls.empty()) throw UsageError("sweep needs methods, functions and L values");
  if (a.jobs < 1) throw UsageError("--jobs must be positive");
  SimArgs sa;
  sa.snr = a.snr;
  sa.trials = a.trials;
  sa.seed = a.seed;
  sa.fading = a.fading;
  const SimConfig sim = make_sim(sa);
  const std::string dir = a.out_dir.empty() ? default_dir() : a.out_dir;
  fs::create_directories(dir);

  struct Cell {
    std::string method, function;
    int L;
    std::vector<ResultRow> rows;
    std::string error;
  };
  std::vector<Cell> cells;
  std::map<std::string, std::shared_ptr<FunctionContext>> contexts;
  for (const auto& m : methods)
    for (const auto& fn : functions)
      for (int L : Ls) {
        DesignArgs da;
        da.method = m;
        da.fn = a.fn;
        da.L = L;
        make_request(da, make_spec(fn, a.fn));  // validate up front
        cells.push_back({m, fn, L, {}, ""});
        if (!contexts.count(fn)) contexts[fn] = nullptr;
      }
  std::mutex context_mutex;
  auto context_for = [&](const std::string& fn) {
    std::lock_guard lock(context_mutex);
    auto& ctx = contexts[fn];
    if (!ctx) ctx = std::make_shared<FunctionContext>(make_spec(fn, a.fn), a.fn.epsilon);
    return ctx;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      Cell& cell = cells[i];
      try {
        DesignArgs da;
        da.method = cell.method;
        da.fn = a.fn;
        da.L = cell.L;
        da.sigma = a.sigma;
        da.seed = a.seed;
        auto ctx = context_for(cell.function);
        const DesignRequest req = make_request(da, ctx->spec);
        const DesignRun run = run_design(*ctx, req);
        const std::string name = cell_name(cell.method, cell.function, cell.L);
        const std::string text = dump_design(run.file);
        write_text((fs::path(dir) / (name + ".json")).string(), text);
        const SimulationOutput res = simulate_design(run.file, content_hash(text), sim);
        if (res.collision) throw DomainError("designed constellation collides");
        cell.rows = res.rows;
        write_text((fs::path(dir) / (name + ".csv")).string(), rows_csv(cell.rows));
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(a.jobs, static_cast<int>(cells.size()));
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<ResultRow> merged;
  int failures = 0;
  for (const auto& cell : cells) {
    const std::string name = cell_name(cell.method, cell.function, cell.L);
    if (cell.error.empty()) {
      merged.insert(merged.end(), cell.rows.begin(), cell.rows.end());
      std::cout << "ok     " << name << "\n";
    } else {
      ++failures;
      std::cout << "FAILED " << name << ": " << cell.error << "\n";
    }
  }
  const std::string merged_path = (fs::path(dir) / "results.csv").string();
  write_text(merged_path, rows_csv(merged));
  std::cout << cells.size() - static_cast<std::size_t>(failures) << " of " << cells.size() << " cells succeeded; merged "
            << merged.size() << " rows into " << merged_path << "\n";
  return failures == 0 ? kExitOk : kExitFailure;
}

void add_function_flags(CLI::App* cmd, FunctionArgs& fn) {
  cmd->add_option("--K", fn.K, "number of nodes")->check(CLI::PositiveNumber);
  cmd->add_option("--B", fn.B, "bits per input")->check(CLI::PositiveNumber);
  cmd->add_option("--x-min", fn.x_min, "lower end of the input range");
  cmd->add_option("--x-max", fn.x_max, "upper end of the input range");
  cmd->add_option("--epsilon", fn.epsilon, "output-gap scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital over-the-air computation: modulation design and simulation"};
  app.require_subcommand(1);

  DesignArgs design;
  auto* c_design = app.add_subcommand("design", "optimize a modulation design and write it as JSON");
  c_design->add_option("--method", design.method, "ubp or iabp")->check(CLI::IsMember({"ubp", "iabp"}));
  c_design->add_option("--function", design.fn.function, "sum, prod, max or table:<path>");
  add_function_flags(c_design, design.fn);
  c_design->add_option("--L", design.L, "number of bit groups / time slots")->required();
  c_design->add_option("--sigma", design.sigma, "importance weight spread (iabp)");
  c_design->add_option("--delta", design.delta, "CCCP stopping threshold");
  c_design->add_option("--max-outer", design.max_outer, "CCCP iteration cap");
  c_design->add_option("--seed", design.seed, "random seed");
  c_design->add_option("--init", design.init, "ruler or random");
  c_design->add_option("--phi0", design.phi0, "initial temperature (iabp)");
  c_design->add_option("--alpha", design.alpha, "cooling factor (iabp)");
  c_design->add_option("--phi-min", design.phi_min, "final temperature (iabp)");
  c_design->add_option("--out", design.out, "output JSON path");
  c_design->add_option("--trace", design.trace_csv, "write the CCCP trace as CSV");
  c_design->add_option("--anneal-log", design.anneal_csv, "write the annealing log as CSV (iabp)");
  c_design->add_flag("--timestamp", design.timestamp, "record the creation time in the file");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo NMSE of a design over an SNR grid");
  c_sim->add_option("--design", sim.design, "design JSON")->required();
  c_sim->add_option("--snr", sim.snr, "start:step:stop or comma list, in dB");
  c_sim->add_option("--trials", sim.trials, "Monte Carlo trials per SNR");
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--fading", sim.fading, "none or rayleigh");
  c_sim->add_option("--snr-ref", sim.snr_ref, "per-slot or stacked");
  c_sim->add_option("--out", sim.out, "output CSV path");

  VerifyArgs verify;
  auto* c_verify = app.add_subcommand("verify", "check a design file against independent recomputation");
  c_verify->add_option("--design", verify.design, "design JSON")->required();
  c_verify->add_flag("--exhaustive", verify.exhaustive, "decode every input tuple without noise");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "design and simulate a grid of configurations");
  c_sweep->add_option("--methods", sweep.methods, "comma list of methods");
  c_sweep->add_option("--functions", sweep.functions, "comma list of functions");
  c_sweep->add_option("--L-list", sweep.L_list, "comma list of L values");
  add_function_flags(c_sweep, sweep.fn);
  c_sweep->add_option("--sigma", sweep.sigma, "importance weight spread (iabp)");
  c_sweep->add_option("--snr", sweep.snr, "start:step:stop or comma list, in dB");
  c_sweep->add_option("--trials", sweep.trials, "Monte Carlo trials per SNR");
  c_sweep->add_option("--seed", sweep.seed, "random seed");
  c_sweep->add_option("--fading", sweep.fading, "none or rayleigh");
  c_sweep->add_option("--out-dir", sweep.out_dir, "directory for designs and CSVs");
  c_sweep->add_option("--jobs", sweep.jobs, "cells run concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_design) {
      std::set<std::string> given;
      for (const auto* opt : c_design->get_options())
        if (opt->count() > 0) given.insert(opt->get_name());
      return cmd_design(design, given);
    }
    if (*c_sim) return cmd_simulate(sim);
    if (*c_verify) return cmd_verify(verify);
    if (*c_sweep) return cmd_sweep(sweep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InitializationFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const CccpAborted& e) {
    std::cerr << "error: " << e.what() << " after " << e.trace.records.size() << " recorded iterations\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
