#include "nanoflow/metrics.h"

namespace nanoflow {

std::vector<LcrPoint> lcr_series(const std::vector<AssignRecord>& log, LcrMode mode) {
  std::vector<LcrPoint> out;
  std::uint64_t sens = 0;
  std::set<std::string> seen, seen_sensitive;
  for (std::size_t i = 0; i < log.size(); ++i) {
    LcrPoint p;
    p.index = i + 1;
    if (mode == LcrMode::Events) {
      sens += log[i].sensitive ? 1 : 0;
      p.num = sens;
      p.den = i + 1;
    } else {
      seen.insert(log[i].target);
      if (log[i].sensitive) seen_sensitive.insert(log[i].target);
      p.num = seen_sensitive.size();
      p.den = seen.size();
    }
    out.push_back(p);
  }
  return out;
}

SbcReport sbc(const std::vector<std::vector<BranchRecord>>& logs) {
  std::set<Loc> c;
  std::map<Loc, BranchCoverage> cov;
  for (auto& log : logs)
    for (auto& b : log) {
      if (b.guard_sensitive) c.insert(b.loc);
      auto& e = cov[b.loc];
      (b.taken ? e.true_covered : e.false_covered) = true;
    }
  SbcReport r;
  for (auto& loc : c) {
    r.conditionals[loc] = cov[loc];
    if (cov[loc].true_covered && cov[loc].false_covered) ++r.both;
  }
  return r;
}

PermissivenessReport permissiveness(const StmtPtr& program, const std::vector<State>& tests,
                                    const Policy& policy, std::uint64_t budget,
                                    int max_iterations) {
  PermissivenessReport rep;
  for (auto& t : tests) {
    RunOptions nsu;
    nsu.cfg = {Strategy::NSU, Mode::Enforce};
    nsu.budget = budget;
    nsu.stop_on_sink = false;
    nsu.record_trace = false;
    for (int i = 0; i < max_iterations; ++i) {
      auto r = run(program, t, policy, nsu);
      if (r.outcome != Outcome::Stopped || r.stop->kind != StopReason::Kind::NSUWrite) break;
      rep.nsu_stop_locs.insert(r.stop_loc);
      nsu.suppress_nsu.insert(r.stop_loc);
    }

    // A PU stop is cleared by upgrading the used variable before the stop.
    UpgradePlan plan;
    RunOptions pu;
    pu.cfg = {Strategy::PU, Mode::Enforce};
    pu.budget = budget;
    pu.stop_on_sink = false;
    pu.record_trace = false;
    pu.plan = &plan;
    for (int i = 0; i < max_iterations; ++i) {
      auto r = run(program, t, policy, pu);
      if (r.outcome != Outcome::Stopped || r.stop->kind != StopReason::Kind::PUUse) break;
      rep.pu_stop_locs.insert(r.stop_loc);
      if (!plan.insertions.insert({r.stop_loc, r.stop->var}).second) break;
    }
  }
  return rep;
}

}  // namespace nanoflow
