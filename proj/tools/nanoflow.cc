// nanoflow: command-line front end.
//
// Exit codes: 0 ok, 2 run stopped by the monitor, 3 program or analysis
// error, 64 usage (including unreadable policy files), 1 failed checks.

#include <atomic>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "nanoflow/corpus.h"
#include "nanoflow/io.h"
#include "nanoflow/metrics.h"
#include "nanoflow/secrecy.h"
#include "nanoflow/upgrades.h"

using namespace nanoflow;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kStopped = 2;
constexpr int kError = 3;
constexpr int kUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

StmtPtr load_program(const std::string& path) {
  return parse(read_file(path), std::filesystem::path(path).filename().string());
}

PolicyFile policy_or_usage(const std::string& path) {
  try {
    return load_policy(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

State initial_state(const PolicyFile& pf, const std::string& test_path) {
  if (test_path.empty()) return pf.init;
  TestCase t = load_test_case(test_path);
  return merge_env(pf.env, t.env);
}

std::vector<State> suite(const PolicyFile& pf, const std::string& dir) {
  std::vector<State> out;
  if (dir.empty()) {
    out.push_back(pf.init);
    return out;
  }
  for (auto& t : load_tests(dir)) out.push_back(merge_env(pf.env, t.env));
  return out;
}

ojson stop_json(const RunResult& r) {
  if (!r.stop) return nullptr;
  ojson j;
  j["reason"] = r.stop->str();
  j["var"] = r.stop->var;
  j["loc"] = r.stop_loc.str();
  return j;
}

ojson locs_json(const std::set<Loc>& locs) {
  ojson a = ojson::array();
  for (auto& l : locs) a.push_back(l.str());
  return a;
}

void emit_json(const ojson& j) { std::cout << j.dump(2) << "\n"; }

// ---- run

struct RunArgs {
  std::string strategy, mode, policy, upgrades, trace_out, test, program;
  std::uint64_t budget = 1'000'000;
};

int cmd_run(const RunArgs& a) {
  PolicyFile pf = policy_or_usage(a.policy);
  StrategyConfig cfg;
  cfg.strategy = pf.strategy.value_or(Strategy::PU);
  cfg.mode = pf.mode.value_or(Mode::Measure);
  if (!a.strategy.empty()) {
    auto s = strategy_from(a.strategy);
    if (!s) throw UsageError("unknown strategy " + a.strategy);
    cfg.strategy = *s;
  }
  if (!a.mode.empty()) {
    auto m = mode_from(a.mode);
    if (!m) throw UsageError("unknown mode " + a.mode);
    cfg.mode = *m;
  }
  UpgradePlan plan;
  if (!a.upgrades.empty()) plan = load_plan(a.upgrades);
  StmtPtr prog = load_program(a.program);
  RunOptions ro;
  ro.cfg = cfg;
  ro.budget = a.budget;
  ro.plan = a.upgrades.empty() ? nullptr : &plan;
  RunResult r = run(prog, initial_state(pf, a.test), pf.policy, ro);
  if (!a.trace_out.empty()) write_trace(r.trace, a.trace_out);

  ojson j;
  j["strategy"] = strategy_name(cfg.strategy);
  j["mode"] = mode_name(cfg.mode);
  j["outcome"] = outcome_name(r.outcome);
  j["stop"] = stop_json(r);
  j["counters"] = counts_json(r.counters);
  j["sink"] = counts_json(r.sink_count);
  ojson v = ojson::array();
  for (auto& x : r.violations) {
    ojson e;
    e["reason"] = x.reason.str();
    e["loc"] = x.loc.str();
    v.push_back(e);
  }
  j["violations"] = v;
  ojson outs = ojson::array();
  for (auto& o : r.outputs) outs.push_back(observation_json(o));
  j["outputs"] = outs;
  j["steps"] = r.steps;
  emit_json(j);
  if (r.outcome == Outcome::Stopped) return kStopped;
  if (r.outcome == Outcome::BudgetExhausted) return kError;
  return 0;
}

// ---- analyze

ojson detectable_json(Classification c, bool explicit_path) {
  ojson d;
  for (auto s : {Strategy::Taint, Strategy::Observable, Strategy::NSU, Strategy::PU})
    d[strategy_name(s)] = detectable_by(c, s, explicit_path);
  return d;
}

ojson flow_json(const Loc& src, const Loc& snk, const std::vector<std::size_t>& events,
                const Trace& sub) {
  ojson f;
  f["source"] = src.str();
  f["sink"] = snk.str();
  ojson ids = ojson::array();
  for (auto i : events) ids.push_back(i + 1);
  f["events"] = ids;
  Classification c = classify_subtrace(sub);
  bool ep = has_explicit_path(sub);
  f["classification"] = classification_name(c);
  f["explicit_path"] = ep;
  f["detectable"] = detectable_json(c, ep);
  return f;
}

int cmd_analyze(const std::string& trace_path, const std::string& src, const std::string& snk) {
  Trace t = read_trace(trace_path);
  ojson j;
  j["events"] = t.events.size();
  j["counters"] = counts_json(interpret_trace(t).counts());
  if (!src.empty() || !snk.empty()) {
    if (src.empty() || snk.empty()) throw UsageError("--source and --sink go together");
    LocPattern ps = LocPattern::parse(src), pk = LocPattern::parse(snk);
    Edg g = build_edg(t);
    auto idx = subtrace_indices(g, t, ps, pk);
    Trace sub = source_to_sink_subtrace(g, t, ps, pk);
    if (sub.events.empty()) throw EmptySubtrace();
    ojson f = flow_json(Loc{ps.file, ps.line, ps.column}, Loc{pk.file, pk.line, pk.column}, idx, sub);
    f["source"] = src;
    f["sink"] = snk;
    j["subtrace"] = f;
    emit_json(j);
    return 0;
  }
  auto flows = source_sink_flows(t);
  ojson fs = ojson::array();
  std::vector<Trace> subs;
  for (auto& f : flows) {
    fs.push_back(flow_json(f.source, f.sink, f.events, f.subtrace));
    subs.push_back(f.subtrace);
  }
  j["flows"] = fs;
  ojson us = ojson::array();
  for (auto& u : unique_flows(subs)) {
    ojson e;
    e["locations"] = locs_json(u.locations);
    e["classification"] = classification_name(u.classification);
    e["multiplicity"] = u.multiplicity;
    us.push_back(e);
  }
  j["unique_flows"] = us;
  emit_json(j);
  return 0;
}

// ---- infer-upgrades

int cmd_infer(const std::string& policy, const std::string& tests, int max_rounds,
              const std::string& out, bool show_program, const std::string& program) {
  PolicyFile pf = policy_or_usage(policy);
  StmtPtr prog = load_program(program);
  auto states = suite(pf, tests);
  InferenceOptions io;
  io.max_rounds = max_rounds;
  InferenceResult r;
  try {
    r = infer_upgrades(prog, states, pf.policy, io);
  } catch (const RoundLimitExceeded& e) {
    ojson j;
    j["error"] = e.what();
    emit_json(j);
    return kError;
  }
  ojson plan = plan_to_json(r.plan);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << plan.dump(2) << "\n";
  }
  ojson j;
  j["rounds"] = r.rounds;
  j["insertions"] = plan["insertions"];
  j["fixpoint"] = verify_fixpoint(prog, r.plan, states, pf.policy, io);
  if (show_program) j["program"] = print(apply_plan(prog, r.plan));
  emit_json(j);
  return 0;
}

// ---- check-secrecy

int cmd_secrecy(const std::string& condition, const std::string& policy, const std::string& test,
                std::uint64_t budget, const std::string& program) {
  PolicyFile pf = policy_or_usage(policy);
  StmtPtr prog = load_program(program);
  State init = initial_state(pf, test);
  Verdict v;
  ojson j;
  j["condition"] = condition;
  if (condition == "explicit") {
    v = check_explicit_secrecy(prog, init, pf.policy, {}, budget);
    j["extracted"] = print(extract_explicit(prog, init, pf.policy, budget).body);
  } else if (condition == "observable") {
    v = check_observable_secrecy(prog, init, pf.policy, {}, budget);
    j["extracted"] = print(extract_observable(prog, init, pf.policy, budget).body);
  } else if (condition == "noninterference") {
    v = check_noninterference(prog, init, pf.policy, {}, budget);
  } else {
    throw UsageError("unknown condition " + condition);
  }
  j["verdict"] = verdict_name(v.kind);
  j["variants"] = v.variants;
  if (v.counterexample) j["counterexample"] = ojson::parse(state_to_json(*v.counterexample).dump());
  if (!v.reason.empty()) j["reason"] = v.reason;
  emit_json(j);
  return 0;
}

// ---- metrics

int cmd_metrics(const std::string& policy, const std::string& tests, const std::string& strategy,
                const std::string& program) {
  PolicyFile pf = policy_or_usage(policy);
  StmtPtr prog = load_program(program);
  std::vector<TestCase> cases;
  if (tests.empty()) {
    cases.push_back({"default", pf.init, pf.env});
  } else {
    for (auto& t : load_tests(tests)) {
      t.state = merge_env(pf.env, t.env);
      cases.push_back(std::move(t));
    }
  }
  auto strat = strategy_from(strategy);
  if (!strat) throw UsageError("unknown strategy " + strategy);
  RunOptions ro;
  ro.cfg = {*strat, Mode::Measure};
  ro.record_trace = false;
  ojson lcr = ojson::array();
  std::vector<std::vector<BranchRecord>> logs;
  std::vector<State> states;
  for (auto& c : cases) {
    RunResult r = run(prog, c.state, pf.policy, ro);
    ojson series = ojson::array();
    for (auto& p : lcr_series(r.assign_log)) {
      ojson e;
      e["index"] = p.index;
      e["num"] = p.num;
      e["den"] = p.den;
      series.push_back(e);
    }
    ojson e;
    e["test"] = c.name;
    e["series"] = series;
    lcr.push_back(e);
    logs.push_back(r.branch_log);
    states.push_back(c.state);
  }
  SbcReport s = sbc(logs);
  ojson conds = ojson::array();
  for (auto& [loc, cov] : s.conditionals) {
    ojson e;
    e["loc"] = loc.str();
    e["true"] = cov.true_covered;
    e["false"] = cov.false_covered;
    conds.push_back(e);
  }
  ojson sj;
  sj["conditionals"] = conds;
  sj["covered"] = s.both;
  sj["total"] = s.conditionals.size();
  sj["ratio"] = s.ratio();
  PermissivenessReport p = permissiveness(prog, states, pf.policy);
  ojson pj;
  pj["nsu_stop_locs"] = locs_json(p.nsu_stop_locs);
  pj["pu_stop_locs"] = locs_json(p.pu_stop_locs);
  ojson j;
  j["strategy"] = strategy_name(*strat);
  j["lcr"] = lcr;
  j["sbc"] = sj;
  j["permissiveness"] = pj;
  emit_json(j);
  return 0;
}

// ---- theorems

int cmd_theorems(std::size_t n, std::uint64_t seed, std::uint64_t budget) {
  TheoremReport r = theorem_suite(n, seed, {}, budget);
  ojson j;
  j["cases"] = r.cases;
  j["explicit_checked"] = r.explicit_checked;
  j["observable_checked"] = r.observable_checked;
  j["undecided"] = r.undecided;
  j["run_errors"] = r.run_errors;
  ojson fs = ojson::array();
  for (auto& f : r.failures) {
    ojson e;
    e["theorem"] = f.theorem;
    e["program"] = f.source;
    e["init"] = f.init;
    fs.push_back(e);
  }
  j["failures"] = fs;
  emit_json(j);
  return r.failures.empty() ? 0 : 1;
}

// ---- corpus

int cmd_corpus(const std::string& dir, unsigned jobs) {
  auto programs = load_corpus(dir);
  struct Job {
    const CorpusProgram* prog;
    const TestCase* test;
    Strategy strategy;
  };
  std::vector<Job> work;
  for (auto& p : programs)
    for (auto& t : p.tests)
      for (auto s : {Strategy::Taint, Strategy::Observable, Strategy::NSU, Strategy::PU})
        work.push_back({&p, &t, s});

  std::vector<ojson> rows(work.size());
  std::vector<int> bad(work.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < work.size();) {
      auto& w = work[i];
      ojson row;
      row["program"] = w.prog->name;
      row["test"] = w.test->name;
      row["strategy"] = strategy_name(w.strategy);
      RunOptions ro;
      ro.cfg = {w.strategy, Mode::Measure};
      try {
        RunResult r = run(w.prog->program, w.test->state, w.prog->policy, ro);
        FlowCount off = interpret_trace(r.trace).counts();
        row["counters"] = counts_json(r.counters);
        row["sink"] = counts_json(r.sink_count);
        // Taint ignores the context, so its trace is only checked for shape.
        bool agree = w.strategy == Strategy::Taint || off == r.counters;
        row["offline_agrees"] = agree;
        if (!agree) bad[i] = 1;
        auto& ex = w.prog->expect;
        const char* sn = strategy_name(w.strategy);
        if (ex.is_object() && ex.contains(w.test->name) && ex[w.test->name].contains(sn)) {
          auto& e = ex[w.test->name][sn];
          auto fc = [](const nlohmann::json& a) {
            return FlowCount{a[0].get<std::uint64_t>(), a[1].get<std::uint64_t>(),
                             a[2].get<std::uint64_t>()};
          };
          FlowCount c = fc(e["counters"]), k = fc(e["sink"]);
          bool ok = c == r.counters && k == r.sink_count;
          row["expected_matches"] = ok;
          if (!ok) bad[i] = 1;
        }
      } catch (const std::exception& e) {
        row["error"] = e.what();
        bad[i] = 1;
      }
      rows[i] = row;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < std::max(1u, jobs); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  ojson j;
  ojson rs = ojson::array();
  for (auto& r : rows) rs.push_back(r);
  j["runs"] = rs;
  std::size_t failures = 0;
  for (int b : bad) failures += b;
  j["failures"] = failures;
  emit_json(j);
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nanoflow: dynamic information-flow analysis for NanoJS"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "execute a program under a monitor");
  run_cmd->add_option("--strategy", ra.strategy, "taint|observable|nsu|pu");
  run_cmd->add_option("--mode", ra.mode, "enforce|measure");
  run_cmd->add_option("--policy", ra.policy, "policy JSON")->required();
  run_cmd->add_option("--upgrades", ra.upgrades, "upgrade plan JSON");
  run_cmd->add_option("--trace-out", ra.trace_out, "write the trace as JSON lines");
  run_cmd->add_option("--test", ra.test, "test case JSON overriding policy bindings");
  run_cmd->add_option("--budget", ra.budget, "step budget");
  run_cmd->add_option("program", ra.program)->required();

  std::string trace, source, sink;
  auto* an = app.add_subcommand("analyze", "offline analysis of a recorded trace");
  an->add_option("--trace", trace)->required();
  an->add_option("--source", source, "file:line[:col]");
  an->add_option("--sink", sink, "file:line[:col]");

  std::string policy, tests, out, program, test, condition = "explicit", strategy = "pu";
  int max_rounds = 0;
  bool show_program = false;
  std::uint64_t budget = 1'000'000;
  auto* inf = app.add_subcommand("infer-upgrades", "insert upgrade statements by testing");
  inf->add_option("--policy", policy)->required();
  inf->add_option("--tests", tests, "directory of test case JSON files");
  inf->add_option("--max-rounds", max_rounds);
  inf->add_option("--out", out, "write the plan here");
  inf->add_flag("--print-program", show_program, "include the rewritten program");
  inf->add_option("program", program)->required();

  auto* sec = app.add_subcommand("check-secrecy", "explicit/observable secrecy of one run");
  sec->add_option("--condition", condition, "explicit|observable|noninterference");
  sec->add_option("--policy", policy)->required();
  sec->add_option("--test", test);
  sec->add_option("--budget", budget);
  sec->add_option("program", program)->required();

  auto* met = app.add_subcommand("metrics", "label creep, branch coverage, permissiveness");
  met->add_option("--policy", policy)->required();
  met->add_option("--tests", tests);
  met->add_option("--strategy", strategy);
  met->add_option("program", program)->required();

  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::uint64_t tbudget = 100'000;
  auto* th = app.add_subcommand("theorems", "random-program check of both secrecy theorems");
  th->add_option("-n", n);
  th->add_option("--seed", seed);
  th->add_option("--budget", tbudget);

  std::string dir = "corpus";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* cor = app.add_subcommand("corpus", "run every corpus program and test");
  cor->add_option("--dir", dir);
  cor->add_option("--jobs", jobs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(ra);
    if (*an) return cmd_analyze(trace, source, sink);
    if (*inf) return cmd_infer(policy, tests, max_rounds, out, show_program, program);
    if (*sec) return cmd_secrecy(condition, policy, test, budget, program);
    if (*met) return cmd_metrics(policy, tests, strategy, program);
    if (*th) return cmd_theorems(n, seed, tbudget);
    if (*cor) return cmd_corpus(dir, jobs);
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kUsage;
  } catch (const SyntaxError& e) {
    std::cerr << "syntax error: " << e.what() << "\n";
    return kError;
  } catch (const RunError& e) {
    std::cerr << "run error at " << e.loc().str() << ": " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kUsage;
}
