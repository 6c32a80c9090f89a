#include <gtest/gtest.h>

#include "helpers.h"
#include "nanoflow/metrics.h"

using namespace nanoflow;

namespace {

std::vector<State> states(const CorpusProgram& p) { return test_states(p); }

}  // namespace

TEST(Lcr, FourAssignmentHandValues) {
  auto e = testutil::corpus_entry("lcr4");
  for (auto st : {Strategy::Taint, Strategy::Observable, Strategy::NSU, Strategy::PU}) {
    auto r = testutil::run_with(e.program, e.tests[0].state, st, Mode::Measure, e.policy);
    for (auto mode : {LcrMode::Events, LcrMode::Locations}) {
      auto s = lcr_series(r.assign_log, mode);
      ASSERT_EQ(s.size(), 4u);
      std::vector<std::pair<std::uint64_t, std::uint64_t>> got;
      for (auto& p : s) got.push_back({p.num, p.den});
      EXPECT_EQ(got, (std::vector<std::pair<std::uint64_t, std::uint64_t>>{
                         {0, 1}, {1, 2}, {1, 3}, {2, 4}}));
      EXPECT_DOUBLE_EQ(s[3].ratio(), 0.5);
    }
  }
}

TEST(Lcr, LocationsModeCountsTargetsOnce) {
  std::vector<AssignRecord> log{{{"t", 1, 1}, true, "x"}, {{"t", 2, 1}, false, "x"},
                                {{"t", 3, 1}, false, "y"}};
  auto s = lcr_series(log, LcrMode::Locations);
  EXPECT_EQ(s[1].num, 1u);
  EXPECT_EQ(s[1].den, 1u);
  EXPECT_EQ(s[2].den, 2u);
  EXPECT_TRUE(lcr_series({}).empty());
}

TEST(Lcr, StaysWithinUnitIntervalOnCorpus) {
  for (auto& e : load_corpus(testutil::corpus_dir()))
    for (auto& t : e.tests)
      for (auto st : {Strategy::Taint, Strategy::Observable, Strategy::NSU, Strategy::PU}) {
        auto r = testutil::run_with(e.program, t.state, st, Mode::Measure, e.policy);
        for (auto mode : {LcrMode::Events, LcrMode::Locations})
          for (auto& p : lcr_series(r.assign_log, mode)) {
            EXPECT_LE(p.num, p.den);
            EXPECT_GE(p.ratio(), 0.0);
            EXPECT_LE(p.ratio(), 1.0);
          }
      }
}

TEST(Sbc, SingleUntakenBranchIsZero) {
  auto e = testutil::corpus_entry("sbc");
  std::vector<std::vector<BranchRecord>> logs;
  for (auto& t : e.tests)
    logs.push_back(
        testutil::run_with(e.program, t.state, Strategy::PU, Mode::Measure, e.policy).branch_log);
  auto rep = sbc(logs);
  ASSERT_EQ(rep.conditionals.size(), 1u);
  EXPECT_EQ(rep.conditionals.begin()->first, (Loc{"sbc.njs", 2, 1}));
  EXPECT_FALSE(rep.conditionals.begin()->second.true_covered);
  EXPECT_TRUE(rep.conditionals.begin()->second.false_covered);
  EXPECT_EQ(rep.both, 0u);
  EXPECT_DOUBLE_EQ(rep.ratio(), 0.0);
}

TEST(Sbc, BothSidesAcrossTests) {
  auto e = testutil::corpus_entry("secrecy_implicit");
  std::vector<std::vector<BranchRecord>> logs;
  for (auto& t : e.tests)
    logs.push_back(
        testutil::run_with(e.program, t.state, Strategy::PU, Mode::Measure, e.policy).branch_log);
  auto rep = sbc(logs);
  EXPECT_EQ(rep.conditionals.size(), 1u);
  EXPECT_EQ(rep.both, 1u);
  EXPECT_DOUBLE_EQ(rep.ratio(), 1.0);
}

TEST(Sbc, InsensitiveGuardsIgnored) {
  auto e = testutil::corpus_entry("micro_explicit");
  auto r = testutil::run_with(e.program, e.tests[0].state, Strategy::PU, Mode::Measure, e.policy);
  auto rep = sbc({r.branch_log});
  EXPECT_TRUE(rep.conditionals.empty());
  EXPECT_DOUBLE_EQ(rep.ratio(), 1.0);
}

TEST(Permissiveness, Location) {
  auto e = testutil::corpus_entry("location");
  auto rep = permissiveness(e.program, states(e), e.policy);
  EXPECT_EQ(rep.nsu_stop_locs, (std::set<Loc>{{"location.njs", 3, 3}}));
  EXPECT_EQ(rep.pu_stop_locs, (std::set<Loc>{{"location.njs", 5, 1}}));
}

TEST(Permissiveness, UpgradedLocationNeverStopsPu) {
  auto e = testutil::corpus_entry("location_upgrade");
  auto rep = permissiveness(e.program, states(e), e.policy);
  EXPECT_TRUE(rep.pu_stop_locs.empty());
  EXPECT_EQ(rep.nsu_stop_locs.size(), 1u);
}

TEST(Permissiveness, CollectsEveryStopInOneTest) {
  State s;
  s.env["h"] = Value::of(true, Label::H);
  s.env["a"] = Value::of(std::int64_t{0});
  s.env["b"] = Value::of(std::int64_t{0});
  auto p = parse("if (h) {\n  a = 1;\n  b = 2;\n}\nx = a;\ny = b;", "t");
  auto rep = permissiveness(p, {s}, {});
  EXPECT_EQ(rep.nsu_stop_locs, (std::set<Loc>{{"t", 2, 3}, {"t", 3, 3}}));
  EXPECT_EQ(rep.pu_stop_locs, (std::set<Loc>{{"t", 5, 1}, {"t", 6, 1}}));
}
