#include "nanoflow/upgrades.h"

#include <functional>

namespace nanoflow {

InferenceResult infer_upgrades(const StmtPtr& program, const std::vector<State>& tests,
                               const Policy& policy, const InferenceOptions& opts,
                               const UpgradePlan& start) {
  int max_rounds = opts.max_rounds > 0 ? opts.max_rounds : count_assignments(program) + 1;
  InferenceResult res;
  res.plan = start;
  RunOptions ro;
  ro.cfg = {Strategy::PU, Mode::Enforce};
  ro.budget = opts.budget;
  ro.stop_on_sink = false;
  ro.record_trace = false;
  ro.plan = &res.plan;
  for (;;) {
    if (res.rounds >= max_rounds) throw RoundLimitExceeded(max_rounds);
    ++res.rounds;
    bool clean = true;
    for (auto& t : tests) {
      auto r = run(program, t, policy, ro);
      if (r.outcome == Outcome::Stopped && r.stop->kind == StopReason::Kind::PUUse) {
        res.plan.insertions.insert({r.stop_loc, r.stop->var});
        clean = false;
        break;
      }
    }
    if (clean) return res;
  }
}

bool verify_fixpoint(const StmtPtr& program, const UpgradePlan& plan,
                     const std::vector<State>& tests, const Policy& policy,
                     const InferenceOptions& opts) {
  try {
    return infer_upgrades(program, tests, policy, opts, plan).plan == plan;
  } catch (const RoundLimitExceeded&) {
    return false;
  }
}

static StmtPtr with_upgrades(const StmtPtr& s, const std::vector<std::string>& vars) {
  std::vector<StmtPtr> items;
  for (auto& x : vars) items.push_back(Stmt::upgrade(x, s->loc));
  items.push_back(s);
  return Stmt::block(items);
}

StmtPtr apply_plan(const StmtPtr& program, const UpgradePlan& plan) {
  std::map<Loc, std::vector<std::string>> at;
  for (auto& [loc, x] : plan.insertions) at[loc].push_back(x);
  std::function<StmtPtr(const StmtPtr&)> go = [&](const StmtPtr& s) -> StmtPtr {
    switch (s->kind) {
      case Stmt::Kind::Seq: return Stmt::seq(go(s->first), go(s->second));
      case Stmt::Kind::If: {
        auto r = std::make_shared<Stmt>(*s);
        r->first = go(s->first);
        r->second = go(s->second);
        auto it = at.find(s->loc);
        return it == at.end() ? r : with_upgrades(r, it->second);
      }
      case Stmt::Kind::While: {
        auto r = std::make_shared<Stmt>(*s);
        r->first = go(s->first);
        auto it = at.find(s->loc);
        if (it == at.end()) return r;
        std::vector<StmtPtr> tail{r->first};
        for (auto& x : it->second) tail.push_back(Stmt::upgrade(x, s->loc));
        r->first = Stmt::block(tail);
        return with_upgrades(r, it->second);
      }
      case Stmt::Kind::Pop: return s;
      default: {
        auto it = at.find(s->loc);
        return it == at.end() ? s : with_upgrades(s, it->second);
      }
    }
  };
  return go(program);
}

}  // namespace nanoflow
