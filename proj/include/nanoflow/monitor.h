// Small-step monitored interpreter with flow counting.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nanoflow/label.h"
#include "nanoflow/lang.h"
#include "nanoflow/trace.h"

namespace nanoflow {

using Addr = std::uint64_t;

struct Value {
  BaseValue base;
  std::optional<Addr> addr;
  Label label = Label::L;
  FlowCount count;
  ValueId vid = 0;

  bool is_addr() const { return addr.has_value(); }
  static Value of(BaseValue b, Label l = Label::L) {
    Value v;
    v.base = std::move(b);
    v.label = l;
    return v;
  }
  static Value ref(Addr a, Label l = Label::L) {
    Value v;
    v.addr = a;
    v.label = l;
    return v;
  }
};

using Env = std::map<std::string, Value>;
using Object = std::map<std::string, Value>;
using Heap = std::map<Addr, Object>;

struct State {
  Env env;
  Heap heap;
};

class RunError : public std::runtime_error {
 public:
  enum class Kind { UnboundName, NoSuchField, TypeError, Overflow, CyclicHeap };
  RunError(Kind k, Loc loc, const std::string& msg);
  Kind kind() const { return kind_; }
  const Loc& loc() const { return loc_; }
  static const char* kind_name(Kind k);

 private:
  Kind kind_;
  Loc loc_;
};

enum class Mode { Enforce, Measure };
const char* mode_name(Mode m);
std::optional<Mode> mode_from(std::string_view s);

struct StrategyConfig {
  Strategy strategy = Strategy::PU;
  Mode mode = Mode::Measure;
};

struct Policy {
  // Marked H before the first step, each with its own source event.
  std::vector<std::string> sources;
};

struct StopReason {
  enum class Kind { NSUWrite, PUUse, SinkViolation };
  Kind kind = Kind::SinkViolation;
  std::string var;
  bool operator==(const StopReason&) const = default;
  std::string str() const;
};

struct Violation {
  StopReason reason;
  Loc loc;
};

struct AssignRecord {
  Loc loc;
  bool sensitive = false;
  std::string target;  // variable name, or "#addr.field"
};

struct BranchRecord {
  Loc loc;
  bool guard_sensitive = false;
  bool taken = false;
};

// Flattened observation of one sink argument: base values with field paths.
using Observation = std::set<std::pair<BaseValue, std::vector<std::string>>>;

Observation to_val(const Heap& h, const Value& v);

// Inserted upgrades, applied by intercepting the statement at `loc`.
struct UpgradePlan {
  std::set<std::pair<Loc, std::string>> insertions;
  bool operator==(const UpgradePlan&) const = default;
};

// Callbacks used by the secrecy extractors.
class ExecObserver {
 public:
  virtual ~ExecObserver() = default;
  virtual void on_assign(const StmtPtr&) {}
  virtual void on_sink(const StmtPtr&) {}
  virtual void on_branch(const StmtPtr& if_stmt, bool taken) { (void)if_stmt, (void)taken; }
  virtual void on_pop() {}
};

struct RunOptions {
  StrategyConfig cfg;
  std::uint64_t budget = 1'000'000;
  const UpgradePlan* plan = nullptr;
  // Off during upgrade inference so sink violations do not end a test early.
  bool stop_on_sink = true;
  // NSU stops at these locations are downgraded to recorded violations.
  std::set<Loc> suppress_nsu;
  ExecObserver* observer = nullptr;
  bool record_trace = true;
};

enum class Outcome { Completed, Stopped, BudgetExhausted };
const char* outcome_name(Outcome o);

struct StackEntry {
  Label label = Label::L;
  ValueId vid = 0;
  bool emitted = false;  // a push event was recorded
  Loc loc;
};

struct RunResult {
  Outcome outcome = Outcome::Completed;
  std::optional<StopReason> stop;
  Loc stop_loc;
  Trace trace;
  FlowCount counters;
  FlowCount sink_count;
  std::vector<AssignRecord> assign_log;
  std::vector<BranchRecord> branch_log;
  std::vector<Violation> violations;
  std::vector<Observation> outputs;
  State final_state;
  std::uint64_t steps = 0;
};

FlowCount delta(Label old_label, Label new_label, const std::vector<StackEntry>& stack);

Label reach_join_label(const Value& v, const Heap& h);
FlowCount reach_join_count(const Value& v, const Heap& h);

class Machine {
 public:
  Machine(StmtPtr program, State init, const Policy& policy, RunOptions opts);
  ~Machine();
  Machine(Machine&&) noexcept;

  // Applies exactly one rule. Returns false once the run is over.
  bool step();
  RunResult finish();

  // Expression evaluation against the current state (used by tests).
  Value eval(const ExprPtr& e);

  const Env& env() const;
  const Heap& heap() const;
  const std::vector<StackEntry>& stack() const;
  FlowCount counters() const;
  FlowCount sink_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RunResult run(const StmtPtr& program, const State& init, const Policy& policy,
              const RunOptions& opts);

// Convenience evaluation in a fresh machine.
Value eval_expr(const ExprPtr& e, const Env& env, const Heap& heap);

}  // namespace nanoflow
