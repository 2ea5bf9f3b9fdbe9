#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "aircomp/geometry.hpp"

using namespace aircomp;

namespace {

FunctionSpec make(FunctionKind kind, int K, int B) {
  FunctionSpec s;
  s.kind = kind;
  s.K = K;
  s.B = B;
  return s;
}

ModulationDesign random_design(const GroupPlan& plan, int K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto d = ModulationDesign::zeros(plan, K);
  for (auto& cb : d.codebooks) {
    for (auto& v : cb) v = {gauss(rng), gauss(rng)};
    const double n = std::sqrt(squared_norm(cb));
    for (auto& v : cb) v /= n;
  }
  return d;
}

std::vector<std::vector<int>> all_tuples(int K, int B) {
  const int Q = 1 << B;
  std::vector<std::vector<int>> out;
  std::vector<int> levels(static_cast<std::size_t>(K));
  for (std::uint64_t t = 0; t < ipow(static_cast<std::uint64_t>(Q), K); ++t) {
    tuple_levels(t, Q, levels);
    out.push_back(levels);
  }
  return out;
}

// Minimum over every tuple pair with distinct outputs, straight from the
// aggregated sequences.
double brute_dmin(const ModulationDesign& d, const FunctionSpec& spec, const OutputIndex& outputs,
                  std::span<const double> weights = {}) {
  const auto tuples = all_tuples(spec.K, spec.B);
  std::vector<std::vector<cplx>> seq;
  for (const auto& t : tuples) seq.push_back(aggregate(d, t));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tuples.size(); ++i)
    for (std::size_t j = i + 1; j < tuples.size(); ++j) {
      const double gap = std::abs(outputs.tuple_value(i) - outputs.tuple_value(j)) * outputs.epsilon;
      if (gap <= kOutputMergeTol) continue;
      double dist = 0.0;
      for (std::size_t l = 0; l < seq[i].size(); ++l)
        dist += (weights.empty() ? 1.0 : weights[l]) * std::norm(seq[i][l] - seq[j][l]);
      best = std::min(best, dist / gap);
    }
  return best;
}

std::vector<int> negate(std::vector<int> v) {
  for (int& x : v) x = -x;
  return v;
}

std::vector<int> flatten(const std::vector<std::vector<int>>& seq) {
  std::vector<int> out;
  for (const auto& s : seq) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

TEST(BuildConstraints, TwoNodeOneBitSum) {
  const auto spec = make(FunctionKind::sum, 2, 1);
  const auto outputs = enumerate_outputs(spec);
  EXPECT_EQ(outputs.size(), 3u);
  const auto cs = build_constraints(spec, outputs, GroupPlan::uniform(1, 1));
  bool found = false;
  for (std::size_t j = 0; j < cs.size(); ++j) {
    const auto e = flatten(cs.difference_sequence(j));
    if (e == std::vector<int>{1, -1, 1, -1} || e == std::vector<int>{-1, 1, -1, 1}) {
      found = true;
      EXPECT_DOUBLE_EQ(cs.items[j].gap, 2.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(BuildConstraints, ConstantFunctionGivesEmptySet) {
  auto spec = make(FunctionKind::custom_table, 2, 2);
  spec.table = std::make_shared<const std::vector<double>>(16, 3.0);
  const auto cs = build_constraints(spec, enumerate_outputs(spec), GroupPlan::uniform(2, 1));
  EXPECT_TRUE(cs.empty());
  EXPECT_TRUE(cs.constant_function);
  const auto r = d_min(ModulationDesign::zeros(cs.plan, 2), cs);
  EXPECT_TRUE(r.empty);
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(BuildConstraints, RejectsMismatchedPlan) {
  const auto spec = make(FunctionKind::sum, 2, 3);
  EXPECT_THROW(build_constraints(spec, enumerate_outputs(spec), GroupPlan::uniform(4, 2)), std::invalid_argument);
}

TEST(BuildConstraints, SetInvariants) {
  for (auto kind : {FunctionKind::sum, FunctionKind::product, FunctionKind::max})
    for (const auto& plan : {GroupPlan::uniform(4, 2), GroupPlan::adaptive({1, 3}, 4), GroupPlan::uniform(4, 3),
                             GroupPlan::adaptive({1, 1, 2}, 4)}) {
      const auto spec = make(kind, 3, 4);
      const auto cs = build_constraints(spec, enumerate_outputs(spec, 1.7), plan);
      std::set<std::vector<int>> seen;
      for (std::size_t j = 0; j < cs.size(); ++j) {
        EXPECT_GT(cs.items[j].gap, 0.0);
        const auto e = flatten(cs.difference_sequence(j));
        int trace = 0;
        for (int x : e) {
          EXPECT_LE(std::abs(x), 1);
          trace += x * x;
        }
        EXPECT_GT(trace, 0);
        EXPECT_LE(trace, 2 * spec.K);
        EXPECT_TRUE(seen.insert(e).second) << plan.label();
        EXPECT_EQ(seen.count(negate(e)), 0u) << plan.label();
      }
    }
}

TEST(BuildConstraints, SingleSlotGapsMatchBruteForce) {
  // every pair of tuples differing in exactly one slot, keyed by its
  // sign-canonical difference sequence, keeping the largest gap
  for (auto kind : {FunctionKind::sum, FunctionKind::product, FunctionKind::max})
    for (const auto& plan : {GroupPlan::uniform(3, 2), GroupPlan::adaptive({1, 2}, 3), GroupPlan::uniform(3, 3),
                             GroupPlan::uniform(3, 1)}) {
      const auto spec = make(kind, 3, 3);
      const auto outputs = enumerate_outputs(spec);
      const auto cs = build_constraints(spec, outputs, plan);
      const auto tuples = all_tuples(spec.K, spec.B);
      std::map<std::vector<int>, double> expected;
      for (std::size_t i = 0; i < tuples.size(); ++i)
        for (std::size_t j = i + 1; j < tuples.size(); ++j) {
          const double gap = std::abs(outputs.tuple_value(i) - outputs.tuple_value(j));
          if (gap <= kOutputMergeTol) continue;
          // selection-vector difference per slot
          std::vector<std::vector<int>> e;
          for (int l = 0; l < plan.groups(); ++l) e.emplace_back(static_cast<std::size_t>(spec.K * plan.symbols(l)), 0);
          int differing = 0;
          for (int k = 0; k < spec.K; ++k) {
            const auto gi = split(tuples[i][static_cast<std::size_t>(k)], plan);
            const auto gj = split(tuples[j][static_cast<std::size_t>(k)], plan);
            for (int l = 0; l < plan.groups(); ++l) {
              const int Q = plan.symbols(l);
              e[static_cast<std::size_t>(l)][static_cast<std::size_t>(k * Q + gi[static_cast<std::size_t>(l)])] += 1;
              e[static_cast<std::size_t>(l)][static_cast<std::size_t>(k * Q + gj[static_cast<std::size_t>(l)])] -= 1;
            }
          }
          for (const auto& block : e) differing += std::any_of(block.begin(), block.end(), [](int x) { return x != 0; });
          if (differing != 1) continue;
          if (plan.mode() == PartitionMode::uniform) {
            // shared codebook: only the block matters
            std::vector<int> block;
            for (const auto& b : e)
              if (std::any_of(b.begin(), b.end(), [](int x) { return x != 0; })) block = b;
            e.assign(1, block);
          }
          auto key = flatten(e);
          const auto neg = negate(key);
          key = std::min(key, neg);
          auto [it, inserted] = expected.try_emplace(key, gap);
          if (!inserted) it->second = std::max(it->second, gap);
        }
      std::map<std::vector<int>, double> got;
      for (std::size_t j = 0; j < cs.size(); ++j) {
        auto seq = cs.difference_sequence(j);
        if (plan.mode() == PartitionMode::uniform) seq.assign(1, seq[cs.items[j].slot]);
        auto key = flatten(seq);
        key = std::min(key, negate(key));
        got[key] = cs.items[j].gap;
      }
      ASSERT_EQ(got.size(), expected.size()) << to_string(kind) << " " << plan.label();
      for (const auto& [k, g] : expected) EXPECT_NEAR(got.at(k), g, 1e-12);
    }
}

TEST(BuildConstraints, PaperScaleSumCountMatchesPairEnumeration) {
  // sum gaps are context free, so each slot's constraint set is the set of
  // canonical digit-pair differences with nonzero digit-sum change
  const auto spec = make(FunctionKind::sum, 4, 6);
  const auto plan = GroupPlan::adaptive({3, 3}, 6);
  const auto cs = build_constraints(spec, enumerate_outputs(spec), plan);
  // both slots have 8 symbols and no padding, so they contribute equally
  const int Q = 8;
  std::vector<std::uint64_t> keys;
  for (int a = 0; a < 4096; ++a)
    for (int b = a + 1; b < 4096; ++b) {
      int du = 0;
      std::uint64_t key = 0, flipped = 0;
      for (int k = 0, x = a, y = b; k < 4; ++k, x /= Q, y /= Q) {
        const int p = x % Q, q = y % Q;
        du += p - q;
        key = key * 65 + static_cast<std::uint64_t>(p == q ? 64 : p * Q + q);
        flipped = flipped * 65 + static_cast<std::uint64_t>(p == q ? 64 : q * Q + p);
      }
      if (du != 0) keys.push_back(std::min(key, flipped));
    }
  std::sort(keys.begin(), keys.end());
  const auto expected = 2 * static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
  EXPECT_EQ(cs.size(), expected);
  // far fewer than the pairs of distinct outputs times the collisions
  const double M = static_cast<double>(enumerate_outputs(spec).size());
  EXPECT_LT(static_cast<double>(cs.size()), M * (M - 1) / 2 * 4096.0);
}

TEST(BuildConstraints, SymmetricShortcutMatchesTable) {
  // a custom table with the same values takes the generic path
  for (auto kind : {FunctionKind::product, FunctionKind::max, FunctionKind::sum})
    for (const auto& plan : {GroupPlan::uniform(4, 2), GroupPlan::adaptive({1, 3}, 4), GroupPlan::adaptive({2, 2}, 4)}) {
      const auto spec = make(kind, 3, 4);
      auto table_spec = make(FunctionKind::custom_table, 3, 4);
      table_spec.table = std::make_shared<const std::vector<double>>(tabulate(spec));
      const auto a = build_constraints(spec, enumerate_outputs(spec), plan);
      const auto b = build_constraints(table_spec, enumerate_outputs(table_spec), plan);
      auto sorted = [](const ConstraintSet& cs) {
        std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, double>> v;
        for (const auto& pc : cs.items) v.emplace_back(pc.slot, pc.plus, pc.minus, pc.gap);
        std::sort(v.begin(), v.end());
        return v;
      };
      const auto sa = sorted(a), sb = sorted(b);
      ASSERT_EQ(sa.size(), sb.size());
      for (std::size_t i = 0; i < sa.size(); ++i) {
        EXPECT_EQ(std::get<0>(sa[i]), std::get<0>(sb[i]));
        EXPECT_EQ(std::get<1>(sa[i]), std::get<1>(sb[i]));
        EXPECT_EQ(std::get<2>(sa[i]), std::get<2>(sb[i]));
        EXPECT_NEAR(std::get<3>(sa[i]), std::get<3>(sb[i]), 1e-12);
      }
    }
}

TEST(BuildConstraints, Tractability) {
  const auto spec = make(FunctionKind::product, 4, 6);
  ConstraintBuilder builder(spec, std::make_shared<const OutputIndex>(enumerate_outputs(spec)));
  EXPECT_TRUE(builder.tractable(GroupPlan::adaptive({2, 2, 2}, 6)));
  EXPECT_TRUE(builder.tractable(GroupPlan::uniform(6, 3)));
  EXPECT_FALSE(builder.tractable(GroupPlan::adaptive({1, 1, 4}, 6)));
}

TEST(PairDistance, Examples) {
  ConstraintSet cs;
  cs.K = 2;
  cs.plan = GroupPlan::uniform(1, 1);
  // configurations are node-major base-Q digits: (0,0) -> 0, (1,0) -> 2
  cs.items = {{0, 0, 2, 2.0}, {0, 1, 1, 2.0}, {0, 0, 2, 0.0}};
  auto d = ModulationDesign::zeros(cs.plan, 2);
  d.codebooks[0] = {0.5, -0.5, 0.3, 0.1};
  EXPECT_EQ(flatten(cs.difference_sequence(0)), (std::vector<int>{1, -1, 0, 0}));
  EXPECT_NEAR(pair_distance(d, cs, 0), 1.0, 1e-15);
  EXPECT_NEAR(scaled_distance(d, cs, 0), 0.5, 1e-15);
  EXPECT_EQ(pair_distance(d, cs, 1), 0.0);
  EXPECT_EQ(scaled_distance(d, cs, 1), 0.0);
  EXPECT_THROW(scaled_distance(d, cs, 2), DomainError);
}

TEST(PairDistance, MatchesAggregatedPoints) {
  for (auto kind : {FunctionKind::sum, FunctionKind::max})
    for (const auto& plan : {GroupPlan::uniform(3, 2), GroupPlan::adaptive({1, 2}, 3)}) {
      const auto spec = make(kind, 3, 3);
      const auto cs = build_constraints(spec, enumerate_outputs(spec), plan);
      const auto d = random_design(plan, 3, 5);
      const PointCache points(d);
      for (std::size_t j = 0; j < cs.size(); ++j) {
        const auto& pc = cs.items[j];
        const auto pts = slot_points(d, static_cast<int>(pc.slot));
        EXPECT_NEAR(pair_distance(d, cs, j), std::norm(pts[pc.plus] - pts[pc.minus]), 1e-12);
        EXPECT_NEAR(std::norm(points.difference(pc)), pair_distance(d, cs, j), 1e-12);
      }
    }
}

TEST(Aggregate, Examples) {
  const auto plan = GroupPlan::uniform(1, 1);
  auto d = ModulationDesign::zeros(plan, 2);
  d.codebooks[0] = {0.5, 0.0, 0.5, 0.0};
  const std::vector<int> t{0, 0};
  EXPECT_EQ(aggregate(d, t)[0], cplx(1.0, 0.0));
  const auto z = ModulationDesign::zeros(GroupPlan::adaptive({1, 2}, 3), 3);
  const std::vector<int> t3{5, 2, 7};
  for (const auto& v : aggregate(z, t3)) EXPECT_EQ(v, cplx{});
  const std::vector<int> wrong{1};
  EXPECT_THROW(aggregate(d, wrong), DomainError);
}

TEST(Aggregate, SelectionVectorIdentity) {
  // v_l = a_l^T x_l with a one-hot per node block, and the squared
  // distance of any two tuples is the sum of the per-slot rank-one forms
  for (int K = 2; K <= 3; ++K)
    for (int B = 1; B <= 4; ++B)
      for (int L = 1; L <= std::min(B, 3); ++L) {
        std::vector<GroupPlan> plans{GroupPlan::uniform(B, L)};
        for (const auto& b : compositions(B, L)) plans.push_back(GroupPlan::adaptive(b, B));
        for (const auto& plan : plans) {
          const auto d = random_design(plan, K, 100 + static_cast<std::uint64_t>(B * 10 + L));
          const auto tuples = all_tuples(K, B);
          std::vector<std::vector<std::vector<int>>> sel;
          for (const auto& t : tuples) {
            std::vector<std::vector<int>> a;
            for (int l = 0; l < plan.groups(); ++l) a.emplace_back(static_cast<std::size_t>(K * plan.symbols(l)), 0);
            for (int k = 0; k < K; ++k) {
              const auto g = split(t[static_cast<std::size_t>(k)], plan);
              for (int l = 0; l < plan.groups(); ++l)
                a[static_cast<std::size_t>(l)][static_cast<std::size_t>(k * plan.symbols(l) + g[static_cast<std::size_t>(l)])] = 1;
            }
            for (const auto& block : a) EXPECT_EQ(std::count(block.begin(), block.end(), 1), K);
            sel.push_back(std::move(a));
          }
          for (std::size_t i = 0; i < tuples.size(); i += 3)
            for (std::size_t j = 0; j < tuples.size(); j += 2) {
              const auto vi = aggregate(d, tuples[i]);
              const auto vj = aggregate(d, tuples[j]);
              double lhs = 0.0, rhs = 0.0;
              for (int l = 0; l < plan.groups(); ++l) {
                lhs += std::norm(vi[static_cast<std::size_t>(l)] - vj[static_cast<std::size_t>(l)]);
                cplx ex{};
                const auto& x = d.slot_codebook(l);
                for (std::size_t n = 0; n < x.size(); ++n)
                  ex += static_cast<double>(sel[i][static_cast<std::size_t>(l)][n] - sel[j][static_cast<std::size_t>(l)][n]) * x[n];
                rhs += std::norm(ex);
              }
              EXPECT_NEAR(lhs, rhs, 1e-10);
            }
        }
      }
}

TEST(DMin, AntipodalExample) {
  const auto spec = make(FunctionKind::sum, 2, 1);
  const auto cs = build_constraints(spec, enumerate_outputs(spec), GroupPlan::uniform(1, 1));
  auto d = ModulationDesign::zeros(cs.plan, 2);
  d.codebooks[0] = {-0.5, 0.5, -0.5, 0.5};
  const auto pts = slot_points(d, 0);
  std::set<double> distinct;
  for (const auto& p : pts) distinct.insert(p.real());
  EXPECT_EQ(distinct, (std::set<double>{-1.0, 0.0, 1.0}));
  std::multiset<double> scaled;
  for (std::size_t j = 0; j < cs.size(); ++j) scaled.insert(scaled_distance(d, cs, j));
  EXPECT_EQ(*scaled.begin(), 1.0);
  EXPECT_EQ(*scaled.rbegin(), 2.0);
  const auto r = d_min(d, cs);
  EXPECT_FALSE(r.empty);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  const std::vector<double> one{1.0};
  EXPECT_DOUBLE_EQ(d_min(d, cs, one).value, 1.0);
}

TEST(DMin, CollisionGivesZero) {
  const auto spec = make(FunctionKind::sum, 2, 2);
  const auto plan = GroupPlan::uniform(2, 2);
  const auto cs = build_constraints(spec, enumerate_outputs(spec), plan);
  auto d = ModulationDesign::zeros(plan, 2);
  // node 0 has two equal symbols, so its digit is invisible in every slot
  d.codebooks[0] = {0.3, 0.3, 0.1, 0.5};
  EXPECT_EQ(d_min(d, cs).value, 0.0);
}

TEST(DMin, DedupSoundnessAgainstAllTuplePairs) {
  for (auto kind : {FunctionKind::sum, FunctionKind::product, FunctionKind::max})
    for (int K = 2; K <= 3; ++K)
      for (int B = 2; B <= 4; ++B)
        for (int L = 1; L <= std::min(B, 3); ++L) {
          std::vector<GroupPlan> plans{GroupPlan::uniform(B, L)};
          for (const auto& b : compositions(B, L)) plans.push_back(GroupPlan::adaptive(b, B));
          for (const auto& plan : plans) {
            const auto spec = make(kind, K, B);
            const auto outputs = enumerate_outputs(spec, 0.8);
            const auto cs = build_constraints(spec, outputs, plan);
            const auto d = random_design(plan, K, 7u + static_cast<std::uint64_t>(K * 100 + B * 10 + L));
            const double ours = d_min(d, cs).value;
            const double brute = brute_dmin(d, spec, outputs);
            EXPECT_NEAR(ours, brute, 1e-10 * std::max(1.0, brute)) << to_string(kind) << " K=" << K << " " << plan.label();
            if (plan.mode() == PartitionMode::adaptive) {
              const auto w = slot_weights(plan, 1.0);
              EXPECT_NEAR(d_min(d, cs, w).value, brute_dmin(d, spec, outputs, w), 1e-10);
            }
          }
        }
}

TEST(DMin, PositiveIffNoCollision) {
  const auto spec = make(FunctionKind::max, 2, 2);
  const auto outputs = enumerate_outputs(spec);
  const auto plan = GroupPlan::uniform(2, 2);
  const auto cs = build_constraints(spec, outputs, plan);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(-1, 1);
  int collided = 0, separated = 0;
  for (int trial = 0; trial < 300; ++trial) {
    // coarse integer codebooks collide often
    auto d = ModulationDesign::zeros(plan, 2);
    for (auto& v : d.codebooks[0]) v = {static_cast<double>(pick(rng)), 0.0};
    bool collision = false;
    std::map<std::pair<long, long>, std::set<double>> by_point;
    for (const auto& t : all_tuples(2, 2)) {
      const auto v = aggregate(d, t);
      by_point[{std::lround(v[0].real()), std::lround(v[1].real())}].insert(evaluate(spec, t));
    }
    for (const auto& [p, vals] : by_point) collision = collision || vals.size() > 1;
    const double dm = d_min(d, cs).value;
    EXPECT_EQ(dm > 0.0, !collision);
    (collision ? collided : separated)++;
  }
  EXPECT_GT(collided, 0);
  EXPECT_GT(separated, 0);
}

TEST(DMin, EpsilonHomogeneity) {
  const auto spec = make(FunctionKind::product, 3, 3);
  for (const auto& plan : {GroupPlan::uniform(3, 2), GroupPlan::adaptive({1, 2}, 3)}) {
    const auto a = build_constraints(spec, enumerate_outputs(spec, 1.0), plan);
    const auto b = build_constraints(spec, enumerate_outputs(spec, 2.5), plan);
    ASSERT_EQ(a.size(), b.size());
    const auto d = random_design(plan, 3, 9);
    const auto ra = d_min(d, a), rb = d_min(d, b);
    EXPECT_NEAR(rb.value, ra.value / 2.5, 1e-14);
    EXPECT_EQ(ra.argmin, rb.argmin);
    for (std::size_t j = 0; j < a.size(); j += 17)
      EXPECT_NEAR(scaled_distance(d, b, j), scaled_distance(d, a, j) / 2.5, 1e-12);
  }
}

TEST(SlotPoints, MatchesAggregate) {
  const auto plan = GroupPlan::adaptive({1, 2}, 3);
  const auto d = random_design(plan, 3, 21);
  for (int l = 0; l < 2; ++l) {
    const int Q = plan.symbols(l);
    const auto pts = slot_points(d, l);
    for (std::size_t c = 0; c < pts.size(); ++c) {
      cplx expect{};
      for (int k = 0, rest = static_cast<int>(c); k < 3; ++k, rest /= Q)
        expect += d.symbol(l, 2 - k, rest % Q);
      EXPECT_NEAR(std::abs(pts[c] - expect), 0.0, 1e-14);
    }
  }
}
