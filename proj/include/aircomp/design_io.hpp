#pragma once

// Design files (JSON, schema-versioned) and result CSVs.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aircomp/anneal.hpp"
#include "aircomp/funcspec.hpp"
#include "aircomp/geometry.hpp"
#include "aircomp/partition.hpp"

namespace aircomp {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum class Method { ubp, iabp };

inline std::string_view to_string(Method m) { return m == Method::ubp ? "ubp" : "iabp"; }

inline Method parse_method(std::string_view s) {
  if (s == "ubp") return Method::ubp;
  if (s == "iabp") return Method::iabp;
  throw std::invalid_argument("unknown method: " + std::string(s));
}

struct AnnealSummary {
  AnnealSchedule schedule;
  double best_energy = 0.0;
  double initial_energy = 0.0;
  int steps = 0;
};

struct DesignFile {
  int schema_version = kSchemaVersion;
  Method method = Method::ubp;
  FunctionSpec spec;
  double epsilon = 1.0;
  double sigma = 1.0;
  ModulationDesign design;
  double d_min_unweighted = 0.0;
  double d_min_weighted = 0.0;
  std::size_t M = 0;
  std::size_t M_tilde = 0;
  double delta = 1e-5;
  double tol_feas = 1e-8;
  double tol_opt = 1e-8;
  std::string init = "ruler";
  std::optional<AnnealSummary> anneal;
  std::string timestamp;  // empty: omitted
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw SchemaError("expected a number, got " + j.dump());
}

}  // namespace detail

inline nlohmann::json to_json(const DesignFile& f) {
  using nlohmann::json;
  using detail::number;
  json j;
  j["schema_version"] = f.schema_version;
  j["method"] = std::string(to_string(f.method));

  json fn;
  fn["kind"] = std::string(to_string(f.spec.kind));
  fn["K"] = f.spec.K;
  fn["B"] = f.spec.B;
  fn["range"] = json::array({f.spec.x_min, f.spec.x_max});
  fn["epsilon"] = f.epsilon;
  if (f.spec.kind == FunctionKind::custom_table) {
    json table = json::array();
    for (double v : *f.spec.table) table.push_back(number(v));
    fn["table"] = std::move(table);
  }
  j["function"] = std::move(fn);

  json part;
  part["mode"] = std::string(to_string(f.design.plan.mode()));
  part["L"] = f.design.plan.groups();
  part["b"] = f.design.plan.widths();
  if (f.design.plan.mode() == PartitionMode::adaptive) part["sigma"] = f.sigma;
  j["partition"] = std::move(part);

  json mod = json::array();
  for (std::size_t g = 0; g < f.design.codebooks.size(); ++g) {
    const int Q = f.design.plan.symbols(static_cast<int>(g));
    json nodes = json::array();
    for (int k = 0; k < f.design.K; ++k) {
      json levels = json::array();
      for (int q = 0; q < Q; ++q) {
        const cplx v = f.design.codebooks[g][static_cast<std::size_t>(k * Q + q)];
        levels.push_back({{"re", v.real()}, {"im", v.imag()}});
      }
      nodes.push_back(std::move(levels));
    }
    mod.push_back(std::move(nodes));
  }
  j["modulation"] = std::move(mod);

  j["achieved"] = {{"c", number(f.design.c)},
                   {"d_min_unweighted", number(f.d_min_unweighted)},
                   {"d_min_weighted", number(f.d_min_weighted)},
                   {"M", f.M},
                   {"M_tilde", f.M_tilde}};
  j["solver"] = {{"delta", f.delta},
                 {"outer_iterations", f.design.iterations},
                 {"tol_feas", f.tol_feas},
                 {"tol_opt", f.tol_opt},
                 {"init", f.init}};
  if (f.anneal) {
    const auto& a = *f.anneal;
    j["anneal"] = {{"phi0", a.schedule.phi0},
                   {"alpha", a.schedule.alpha},
                   {"phi_min", a.schedule.phi_min},
                   {"moves_per_temp", a.schedule.moves_per_temp},
                   {"seed", a.schedule.seed},
                   {"best_energy", number(a.best_energy)},
                   {"initial_energy", number(a.initial_energy)},
                   {"steps", a.steps}};
  }
  json prov = {{"seed", f.design.seed}, {"tool_version", kToolVersion}};
  if (!f.timestamp.empty()) prov["timestamp"] = f.timestamp;
  j["provenance"] = std::move(prov);
  return j;
}

inline DesignFile from_json(const nlohmann::json& j) {
  using detail::read_number;
  try {
    DesignFile f;
    f.schema_version = j.at("schema_version").get<int>();
    if (f.schema_version != kSchemaVersion)
      throw SchemaError("unsupported schema_version " + std::to_string(f.schema_version));
    f.method = parse_method(j.at("method").get<std::string>());

    const auto& fn = j.at("function");
    f.spec.kind = parse_function_kind(fn.at("kind").get<std::string>());
    f.spec.K = fn.at("K").get<int>();
    f.spec.B = fn.at("B").get<int>();
    f.spec.x_min = fn.at("range").at(0).get<double>();
    f.spec.x_max = fn.at("range").at(1).get<double>();
    f.epsilon = fn.at("epsilon").get<double>();
    if (f.spec.kind == FunctionKind::custom_table) {
      auto table = std::make_shared<std::vector<double>>();
      for (const auto& v : fn.at("table")) table->push_back(read_number(v));
      f.spec.table = std::move(table);
    }
    f.spec.validate();

    const auto& part = j.at("partition");
    const auto mode = part.at("mode").get<std::string>();
    const auto widths = part.at("b").get<std::vector<int>>();
    GroupPlan plan;
    if (mode == "uniform") {
      plan = GroupPlan::uniform(f.spec.B, part.at("L").get<int>());
      if (plan.widths() != widths) throw SchemaError("uniform partition widths do not match B and L");
    } else if (mode == "adaptive") {
      plan = GroupPlan::adaptive(widths, f.spec.B);
      f.sigma = part.at("sigma").get<double>();
    } else {
      throw SchemaError("unknown partition mode " + mode);
    }
    if (part.at("L").get<int>() != plan.groups()) throw SchemaError("L does not match b");

    f.design = ModulationDesign::zeros(plan, f.spec.K);
    const auto& mod = j.at("modulation");
    if (mod.size() != f.design.codebooks.size()) throw SchemaError("modulation group count mismatch");
    for (std::size_t g = 0; g < mod.size(); ++g) {
      const int Q = plan.symbols(static_cast<int>(g));
      if (mod[g].size() != static_cast<std::size_t>(f.spec.K)) throw SchemaError("modulation node count mismatch");
      for (int k = 0; k < f.spec.K; ++k) {
        const auto& levels = mod[g][static_cast<std::size_t>(k)];
        if (levels.size() != static_cast<std::size_t>(Q)) throw SchemaError("modulation level count mismatch");
        for (int q = 0; q < Q; ++q)
          f.design.codebooks[g][static_cast<std::size_t>(k * Q + q)] = {levels[static_cast<std::size_t>(q)].at("re").get<double>(),
                                                                        levels[static_cast<std::size_t>(q)].at("im").get<double>()};
      }
      if (std::sqrt(squared_norm(f.design.codebooks[g])) > 1.0 + 1e-9)
        throw SchemaError("modulation group " + std::to_string(g) + " exceeds unit norm");
    }

    const auto& ach = j.at("achieved");
    f.design.c = read_number(ach.at("c"));
    f.d_min_unweighted = read_number(ach.at("d_min_unweighted"));
    f.d_min_weighted = read_number(ach.at("d_min_weighted"));
    f.M = ach.at("M").get<std::size_t>();
    f.M_tilde = ach.at("M_tilde").get<std::size_t>();

    const auto& sol = j.at("solver");
    f.delta = sol.at("delta").get<double>();
    f.design.iterations = sol.at("outer_iterations").get<int>();
    f.tol_feas = sol.at("tol_feas").get<double>();
    f.tol_opt = sol.at("tol_opt").get<double>();
    f.init = sol.at("init").get<std::string>();

    if (j.contains("anneal")) {
      const auto& a = j.at("anneal");
      AnnealSummary s;
      s.schedule.phi0 = a.at("phi0").get<double>();
      s.schedule.alpha = a.at("alpha").get<double>();
      s.schedule.phi_min = a.at("phi_min").get<double>();
      s.schedule.moves_per_temp = a.at("moves_per_temp").get<int>();
      s.schedule.seed = a.at("seed").get<std::uint64_t>();
      s.best_energy = read_number(a.at("best_energy"));
      s.initial_energy = read_number(a.at("initial_energy"));
      s.steps = a.at("steps").get<int>();
      f.anneal = s;
    }
    const auto& prov = j.at("provenance");
    f.design.seed = prov.at("seed").get<std::uint64_t>();
    if (prov.contains("timestamp")) f.timestamp = prov.at("timestamp").get<std::string>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed design file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid design file: ") + e.what());
  }
}

inline std::string dump_design(const DesignFile& f) { return to_json(f).dump(2) + "\n"; }

inline DesignFile parse_design(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("design file is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline DesignFile load_design(const std::string& path) { return parse_design(read_text(path)); }
inline void save_design(const std::string& path, const DesignFile& f) { write_text(path, dump_design(f)); }

/// FNV-1a 64-bit, hex.
inline std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Custom function table: one line per tuple, "i_1,...,i_K,value"; '#' comments.
inline std::shared_ptr<const std::vector<double>> read_function_table(const std::string& path, int K, int B) {
  if (K * B > kMaxTupleBits) throw std::invalid_argument("custom table too large");
  const int Q = 1 << B;
  auto table = std::make_shared<std::vector<double>>(std::size_t{1} << (K * B), std::numeric_limits<double>::quiet_NaN());
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  std::vector<int> levels(static_cast<std::size_t>(K));
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != static_cast<std::size_t>(K + 1))
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected K indices and a value");
    for (int k = 0; k < K; ++k) {
      levels[static_cast<std::size_t>(k)] = std::stoi(cells[static_cast<std::size_t>(k)]);
      if (levels[static_cast<std::size_t>(k)] < 0 || levels[static_cast<std::size_t>(k)] >= Q)
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": level out of range");
    }
    (*table)[tuple_index(levels, Q)] = std::stod(cells.back());
  }
  return table;
}

struct ResultRow {
  std::string method;
  std::string function;
  int K = 0;
  int B = 0;
  int L = 0;
  std::string b;
  double snr_db = 0.0;
  int trials = 0;
  double nmse = 0.0;
  std::uint64_t seed = 0;
  std::string design_hash;
};

inline const char* kResultHeader = "method,function,K,B,L,b,snr_db,trials,nmse,seed,design_hash\n";

inline std::string format_row(const ResultRow& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.method << ',' << r.function << ',' << r.K << ',' << r.B << ',' << r.L << ',' << r.b
     << ',' << r.snr_db << ',' << r.trials << ',' << r.nmse << ',' << r.seed << ',' << r.design_hash << '\n';
  return os.str();
}

}  // namespace aircomp
