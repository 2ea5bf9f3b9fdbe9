#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "aircomp/pipeline.hpp"

using namespace aircomp;

namespace {

FunctionSpec make(FunctionKind kind, int K, int B) {
  FunctionSpec s;
  s.kind = kind;
  s.K = K;
  s.B = B;
  return s;
}

DesignFile small_design(Method method, FunctionKind kind) {
  DesignRequest req;
  req.method = method;
  req.spec = make(kind, 2, 3);
  req.L = 2;
  req.sigma = 1.5;
  req.schedule.alpha = 0.5;
  return run_design(req).file;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "aircomp_design_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(DesignFile, RoundTripIsByteIdentical) {
  for (auto method : {Method::ubp, Method::iabp})
    for (auto kind : {FunctionKind::sum, FunctionKind::product}) {
      const auto f = small_design(method, kind);
      const auto text = dump_design(f);
      const auto back = parse_design(text);
      EXPECT_EQ(dump_design(back), text);
      EXPECT_EQ(back.design.codebooks, f.design.codebooks);
      EXPECT_EQ(back.design.plan, f.design.plan);
      EXPECT_EQ(back.anneal.has_value(), method == Method::iabp);
    }
}

TEST(DesignFile, FileRoundTrip) {
  const auto f = small_design(Method::iabp, FunctionKind::max);
  const auto path = scratch("max.json").string();
  save_design(path, f);
  EXPECT_EQ(read_text(path), dump_design(f));
  EXPECT_EQ(dump_design(load_design(path)), dump_design(f));
  EXPECT_THROW(load_design(scratch("missing.json").string()), std::runtime_error);
}

TEST(DesignFile, Fields) {
  const auto f = small_design(Method::iabp, FunctionKind::sum);
  const auto j = to_json(f);
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  EXPECT_EQ(j["partition"]["mode"], "adaptive");
  EXPECT_EQ(j["partition"]["b"], (std::vector<int>{1, 2}));
  EXPECT_EQ(j["partition"]["sigma"], 1.5);
  EXPECT_EQ(j["modulation"].size(), 2u);
  EXPECT_EQ(j["modulation"][1].size(), 2u);
  EXPECT_EQ(j["modulation"][1][0].size(), 4u);
  EXPECT_TRUE(j["achieved"].contains("M_tilde"));
  EXPECT_EQ(j["anneal"]["alpha"], 0.5);
  EXPECT_FALSE(j["provenance"].contains("timestamp"));
  EXPECT_EQ(j["provenance"]["tool_version"], kToolVersion);
  const auto u = to_json(small_design(Method::ubp, FunctionKind::sum));
  EXPECT_EQ(u["partition"]["b"], (std::vector<int>{2, 2}));
  EXPECT_FALSE(u["partition"].contains("sigma"));
  EXPECT_FALSE(u.contains("anneal"));
  EXPECT_EQ(u["modulation"].size(), 1u);
}

TEST(DesignFile, InfiniteValuesSurvive) {
  auto spec = make(FunctionKind::custom_table, 2, 1);
  spec.table = std::make_shared<const std::vector<double>>(4, 2.0);
  DesignRequest req;
  req.spec = spec;
  const auto f = run_design(req).file;
  EXPECT_TRUE(std::isinf(f.design.c));
  const auto text = dump_design(f);
  const auto back = parse_design(text);
  EXPECT_TRUE(std::isinf(back.design.c));
  EXPECT_EQ(*back.spec.table, *spec.table);
  EXPECT_EQ(dump_design(back), text);
}

TEST(DesignFile, SchemaGate) {
  auto j = to_json(small_design(Method::ubp, FunctionKind::sum));
  j["schema_version"] = 2;
  EXPECT_THROW(from_json(j), SchemaError);
  EXPECT_THROW(parse_design("{not json"), SchemaError);
  EXPECT_THROW(parse_design("{}"), SchemaError);
}

TEST(DesignFile, RejectsInconsistentShape) {
  const auto good = to_json(small_design(Method::ubp, FunctionKind::sum));
  auto j = good;
  j["partition"]["b"] = {1, 2};
  EXPECT_THROW(from_json(j), SchemaError);
  j = good;
  j["modulation"][0][0].erase(0);
  EXPECT_THROW(from_json(j), SchemaError);
  j = good;
  j["function"]["kind"] = "median";
  EXPECT_THROW(from_json(j), SchemaError);
  j = good;
  j["partition"]["L"] = 3;
  EXPECT_THROW(from_json(j), SchemaError);
}

TEST(DesignFile, NormCheckOnLoad) {
  const auto good = to_json(small_design(Method::ubp, FunctionKind::sum));
  auto j = good;
  j["modulation"][0][1][2]["re"] = 1.5;
  EXPECT_THROW(from_json(j), SchemaError);
}

TEST(ContentHash, Fnv1a) {
  EXPECT_EQ(content_hash(""), "cbf29ce484222325");
  EXPECT_EQ(content_hash("a"), "af63dc4c8601ec8c");
  EXPECT_NE(content_hash("ab"), content_hash("ba"));
}

TEST(FunctionTable, ReadsCsv) {
  const auto path = scratch("xor.csv").string();
  write_text(path, "# xor of two bits\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n");
  const auto table = read_function_table(path, 2, 1);
  EXPECT_EQ(*table, (std::vector<double>{0.0, 1.0, 1.0, 0.0}));
  write_text(path, "0,0,0\n0,1,1\n");
  const auto partial = read_function_table(path, 2, 1);
  EXPECT_TRUE(std::isnan((*partial)[3]));
  write_text(path, "0,2,1\n");
  EXPECT_THROW(read_function_table(path, 2, 1), std::invalid_argument);
  write_text(path, "0,1\n");
  EXPECT_THROW(read_function_table(path, 2, 1), std::invalid_argument);
}

TEST(ResultCsv, RowFormat) {
  ResultRow r{"iabp", "prod", 4, 6, 2, "2-4", 15.0, 100, 0.125, 7, "00ff"};
  EXPECT_EQ(format_row(r), "iabp,prod,4,6,2,2-4,15,100,0.125,7,00ff\n");
  EXPECT_EQ(std::string(kResultHeader), "method,function,K,B,L,b,snr_db,trials,nmse,seed,design_hash\n");
}

TEST(Pipeline, SimulateRowsAndDeterminism) {
  const auto f = small_design(Method::iabp, FunctionKind::sum);
  SimConfig sim;
  sim.snr_db = {5, 10, 15, 20, 25, 30, 35, 40};
  sim.seed = 11;
  const auto a = simulate_design(f, "h", sim), b = simulate_design(f, "h", sim);
  ASSERT_EQ(a.rows.size(), 8u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(format_row(a.rows[i]), format_row(b.rows[i]));
    EXPECT_EQ(a.rows[i].b, "1-2");
    EXPECT_EQ(a.rows[i].trials, 100);
  }
}

TEST(Pipeline, CollidingDesignIsReported) {
  auto f = small_design(Method::ubp, FunctionKind::sum);
  for (auto& s : f.design.codebooks[0]) s = 0.1;
  SimConfig sim;
  sim.snr_db = {10};
  EXPECT_TRUE(simulate_design(f, "h", sim).collision);
}
