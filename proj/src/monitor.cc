#include "nanoflow/monitor.h"

#include <algorithm>
#include <functional>

namespace nanoflow {

const char* label_name(Label l) {
  switch (l) {
    case Label::L: return "L";
    case Label::H: return "H";
    case Label::P: return "P";
  }
  return "?";
}

std::optional<Label> label_from(std::string_view s) {
  if (s == "L") return Label::L;
  if (s == "H") return Label::H;
  if (s == "P") return Label::P;
  return std::nullopt;
}

std::string FlowCount::str() const {
  return "(" + std::to_string(expl) + "," + std::to_string(obs) + "," + std::to_string(hid) + ")";
}

const char* mode_name(Mode m) { return m == Mode::Enforce ? "enforce" : "measure"; }

std::optional<Mode> mode_from(std::string_view s) {
  if (s == "enforce") return Mode::Enforce;
  if (s == "measure") return Mode::Measure;
  return std::nullopt;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::Stopped: return "stopped";
    case Outcome::BudgetExhausted: return "budget-exhausted";
  }
  return "?";
}

const char* RunError::kind_name(Kind k) {
  switch (k) {
    case Kind::UnboundName: return "UnboundName";
    case Kind::NoSuchField: return "NoSuchField";
    case Kind::TypeError: return "TypeError";
    case Kind::Overflow: return "Overflow";
    case Kind::CyclicHeap: return "CyclicHeap";
  }
  return "?";
}

RunError::RunError(Kind k, Loc loc, const std::string& msg)
    : std::runtime_error(loc.str() + ": " + kind_name(k) + ": " + msg), kind_(k), loc_(std::move(loc)) {}

std::string StopReason::str() const {
  switch (kind) {
    case Kind::NSUWrite: return "NSUWrite(" + var + ")";
    case Kind::PUUse: return "PUUse(" + var + ")";
    case Kind::SinkViolation: return "SinkViolation";
  }
  return "?";
}

FlowCount delta(Label old_label, Label new_label, const std::vector<StackEntry>& stack) {
  bool ss = std::any_of(stack.begin(), stack.end(),
                        [](const StackEntry& e) { return sensitive(e.label); });
  return delta(old_label, new_label, ss);
}

namespace {

void walk(const Value& v, const Heap& h, const std::function<void(const Value&)>& f,
          std::size_t depth = 0) {
  if (depth > h.size() + 1)
    throw RunError(RunError::Kind::CyclicHeap, {}, "cycle through #" + std::to_string(*v.addr));
  f(v);
  if (!v.is_addr()) return;
  auto it = h.find(*v.addr);
  if (it == h.end()) return;
  for (auto& [_, fv] : it->second) walk(fv, h, f, depth + 1);
}

}  // namespace

Label reach_join_label(const Value& v, const Heap& h) {
  Label l = Label::L;
  walk(v, h, [&](const Value& x) { l = join(l, x.label); });
  return l;
}

FlowCount reach_join_count(const Value& v, const Heap& h) {
  FlowCount c;
  walk(v, h, [&](const Value& x) { c += x.count; });
  return c;
}

static void to_val_into(const Heap& h, const Value& v, std::vector<std::string>& path,
                        Observation& out, std::size_t depth) {
  if (depth > h.size() + 1)
    throw RunError(RunError::Kind::CyclicHeap, {}, "cycle in toVal");
  if (!v.is_addr()) {
    out.emplace(v.base, path);
    return;
  }
  auto it = h.find(*v.addr);
  if (it == h.end()) return;
  for (auto& [f, fv] : it->second) {
    path.push_back(f);
    to_val_into(h, fv, path, out, depth + 1);
    path.pop_back();
  }
}

Observation to_val(const Heap& h, const Value& v) {
  Observation out;
  std::vector<std::string> path;
  to_val_into(h, v, path, out, 0);
  return out;
}

namespace {

struct StopSignal {
  StopReason reason;
  Loc loc;
};

bool reachable(const Heap& h, Addr from, Addr target) {
  if (from == target) return true;
  auto it = h.find(from);
  if (it == h.end()) return false;
  for (auto& [_, fv] : it->second)
    if (fv.is_addr() && reachable(h, *fv.addr, target)) return true;
  return false;
}

}  // namespace

struct Machine::Impl {
  RunOptions opts;
  StmtPtr program;
  std::vector<StmtPtr> work;  // top of stack = next statement
  Env env;
  Heap heap;
  std::vector<StackEntry> stack;
  FlowCount counters, sink_count;
  std::vector<AssignRecord> assign_log;
  std::vector<BranchRecord> branch_log;
  std::vector<Violation> violations;
  std::vector<Observation> outputs;
  std::map<Loc, std::vector<std::string>> intercept;
  ValueId next_vid = 0;
  Addr next_addr = 0;
  std::uint64_t steps = 0;
  bool done = false;
  Loc stmt_loc;
  Outcome outcome = Outcome::Completed;
  std::optional<StopReason> stop;
  Loc stop_loc;

  // Trace recording over raw ids; finish() renumbers them.
  std::vector<Event> events;
  std::map<ValueId, ValueInfo> info;
  std::map<ValueId, ValueId> alias;

  bool pu() const { return opts.cfg.strategy == Strategy::PU; }
  bool enforce() const { return opts.cfg.mode == Mode::Enforce; }

  void mint(Value& v) { v.vid = ++next_vid; }

  void note(const Value& v) {
    if (!opts.record_trace || info.count(v.vid)) return;
    ValueInfo vi;
    vi.show = v.is_addr() ? "#" + std::to_string(*v.addr) : render(v.base);
    vi.label = v.label;
    info.emplace(v.vid, std::move(vi));
  }

  void emit(Event e) {
    if (opts.record_trace) events.push_back(std::move(e));
  }

  bool stack_sensitive() const {
    return std::any_of(stack.begin(), stack.end(),
                       [](const StackEntry& e) { return sensitive(e.label); });
  }

  // Reported at the statement, which is where an upgrade would go.
  void pu_use(const std::string& var) {
    StopReason r{StopReason::Kind::PUUse, var};
    if (enforce()) throw StopSignal{r, stmt_loc};
    violations.push_back({r, stmt_loc});
  }

  // Relabels v, minting a fresh id and linking it to the old one.
  Value relabel(const Value& v, Label l) {
    Value w = v;
    w.label = l;
    mint(w);
    if (opts.record_trace) alias[w.vid] = v.vid;
    return w;
  }

  const Value& read_var(const std::string& name, const Loc& loc) {
    auto it = env.find(name);
    if (it == env.end()) throw RunError(RunError::Kind::UnboundName, loc, "'" + name + "' is not bound");
    if (pu() && it->second.label == Label::P) pu_use(name);
    return it->second;
  }

  Object& object_of(const Value& v, const std::string& name, const Loc& loc) {
    if (!v.is_addr()) throw RunError(RunError::Kind::TypeError, loc, "'" + name + "' is not an object");
    return heap.at(*v.addr);
  }

  static std::int64_t as_int(const Value& v, const Loc& loc, const char* op) {
    auto p = std::get_if<std::int64_t>(&v.base);
    if (v.is_addr() || !p)
      throw RunError(RunError::Kind::TypeError, loc, std::string("'") + op + "' expects integers");
    return *p;
  }
  static bool as_bool(const Value& v, const Loc& loc, const char* what) {
    auto p = std::get_if<bool>(&v.base);
    if (v.is_addr() || !p)
      throw RunError(RunError::Kind::TypeError, loc, std::string(what) + " expects booleans");
    return *p;
  }

  BaseValue apply(BinOp op, const Value& a, const Value& b, const Loc& loc) {
    auto overflow = [&]() -> BaseValue {
      throw RunError(RunError::Kind::Overflow, loc, std::string("integer overflow in '") + binop_text(op) + "'");
    };
    switch (op) {
      case BinOp::Add: {
        bool sa = !a.is_addr() && std::holds_alternative<std::string>(a.base);
        bool sb = !b.is_addr() && std::holds_alternative<std::string>(b.base);
        if (sa || sb) {
          if (a.is_addr() || b.is_addr())
            throw RunError(RunError::Kind::TypeError, loc, "'+' on an object");
          return to_display(a.base) + to_display(b.base);
        }
        std::int64_t r;
        if (__builtin_add_overflow(as_int(a, loc, "+"), as_int(b, loc, "+"), &r)) return overflow();
        return r;
      }
      case BinOp::Sub: {
        std::int64_t r;
        if (__builtin_sub_overflow(as_int(a, loc, "-"), as_int(b, loc, "-"), &r)) return overflow();
        return r;
      }
      case BinOp::Mul: {
        std::int64_t r;
        if (__builtin_mul_overflow(as_int(a, loc, "*"), as_int(b, loc, "*"), &r)) return overflow();
        return r;
      }
      case BinOp::StrictEq:
      case BinOp::StrictNe: {
        bool eq;
        if (a.is_addr() || b.is_addr()) eq = a.addr == b.addr;
        else eq = a.base == b.base;
        return op == BinOp::StrictEq ? eq : !eq;
      }
      case BinOp::Lt: {
        auto sa = std::get_if<std::string>(&a.base);
        auto sb = std::get_if<std::string>(&b.base);
        if (!a.is_addr() && !b.is_addr() && sa && sb) return *sa < *sb;
        return as_int(a, loc, "<") < as_int(b, loc, "<");
      }
      case BinOp::And: return as_bool(a, loc, "'&&'") && as_bool(b, loc, "'&&'");
      case BinOp::Or: return as_bool(a, loc, "'||'") || as_bool(b, loc, "'||'");
    }
    return Null{};
  }

  Value eval(const ExprPtr& e) {
    switch (e->kind) {
      case Expr::Kind::Literal: {
        Value v = Value::of(e->lit);
        mint(v);
        return v;
      }
      case Expr::Kind::Var: return read_var(e->name, e->loc);
      case Expr::Kind::Field: {
        const Value& o = read_var(e->name, e->loc);
        Object& obj = object_of(o, e->name, e->loc);
        auto it = obj.find(e->field);
        if (it == obj.end())
          throw RunError(RunError::Kind::NoSuchField, e->loc,
                         "#" + std::to_string(*o.addr) + " has no field '" + e->field + "'");
        if (pu() && it->second.label == Label::P) pu_use(e->name);
        return it->second;
      }
      case Expr::Kind::Binary: {
        Value a = eval(e->lhs);
        Value b = eval(e->rhs);
        Value r = Value::of(apply(e->op, a, b, e->loc), join(a.label, b.label));
        r.count = a.count + b.count;
        mint(r);
        if (sensitive(a.label) || sensitive(b.label)) {
          note(a), note(b), note(r);
          emit(Event::op(a.vid, b.vid, r.vid, e->loc));
        }
        return r;
      }
      case Expr::Kind::Not: {
        Value a = eval(e->lhs);
        Value r = Value::of(!as_bool(a, e->loc, "'!'"), a.label);
        r.count = a.count;
        mint(r);
        if (sensitive(a.label)) {
          note(a), note(r);
          emit(Event::op(a.vid, std::nullopt, r.vid, e->loc));
        }
        return r;
      }
      case Expr::Kind::Object: {
        Object obj;
        for (auto& [f, fe] : e->fields) obj[f] = eval(fe);
        Addr a = ++next_addr;
        heap[a] = std::move(obj);
        Value r = Value::ref(a);
        mint(r);
        return r;
      }
    }
    return {};
  }

  // Label of a value written under the current stack.
  Label written_label(Label le, Label lold, bool ss) const {
    if (!ss || sensitive(le)) return le;
    switch (opts.cfg.strategy) {
      case Strategy::Taint: return le;
      case Strategy::Observable:
      case Strategy::NSU: return Label::H;
      case Strategy::PU: return sensitive(lold) ? Label::H : Label::P;
    }
    return le;
  }

  // Shared tail of assign and assignField. Returns the value to store.
  Value write(Value v, const Value* old, const std::string& what, const Loc& loc) {
    Label lold = old ? old->label : Label::L;
    bool ss = stack_sensitive();
    FlowCount d = delta(lold, v.label, ss);
    if (opts.cfg.strategy == Strategy::NSU && ss && !sensitive(lold)) {
      StopReason r{StopReason::Kind::NSUWrite, what};
      if (enforce() && !opts.suppress_nsu.count(loc)) throw StopSignal{r, loc};
      violations.push_back({r, loc});
    }
    Label nl = written_label(v.label, lold, ss);
    if (nl != v.label) v = relabel(v, nl);
    v.count += d;
    counters += d;
    if (sensitive(v.label)) {
      if (old) note(*old);
      note(v);
      emit(Event::write(old ? std::optional<ValueId>(old->vid) : std::nullopt, v.vid, loc));
    }
    return v;
  }

  Value upgrade_value(const Value& v, const Loc& loc, bool as_source) {
    Value w = v;
    if (as_source) {
      if (v.label != Label::H) {
        w.label = Label::H;
        mint(w);
      }
      note(w);
      emit(Event::source(w.vid, loc));
    } else if (v.label == Label::L) {
      w.label = Label::H;
      w.count.hid += 1;
      mint(w);
      counters.hid += 1;
      note(v), note(w);
      emit(Event::upgrade(v.vid, w.vid, loc));
    } else if (v.label == Label::P) {
      w = relabel(v, Label::H);
    }
    if (w.is_addr()) {
      auto& obj = heap.at(*w.addr);
      for (auto& [f, fv] : obj) fv = upgrade_value(fv, loc, as_source);
    }
    return w;
  }

  void do_upgrade(const std::string& x, const Loc& loc, bool as_source, bool lenient) {
    auto it = env.find(x);
    if (it == env.end()) {
      if (lenient) return;
      throw RunError(RunError::Kind::UnboundName, loc, "'" + x + "' is not bound");
    }
    it->second = upgrade_value(it->second, loc, as_source);
  }

  void exec(const StmtPtr& s) {
    if (s->kind != Stmt::Kind::Pop) stmt_loc = s->loc;
    if (s->kind != Stmt::Kind::Pop && !s->unfolded && !intercept.empty()) {
      auto it = intercept.find(s->loc);
      if (it != intercept.end())
        for (auto& x : it->second) do_upgrade(x, s->loc, false, true);
    }
    switch (s->kind) {
      case Stmt::Kind::Seq:
      case Stmt::Kind::Skip: return;
      case Stmt::Kind::Assign: {
        Value v = eval(s->expr);
        auto it = env.find(s->target);
        Value stored = write(v, it == env.end() ? nullptr : &it->second, s->target, s->loc);
        env[s->target] = stored;
        assign_log.push_back({s->loc, sensitive(stored.label), s->target});
        if (opts.observer) opts.observer->on_assign(s);
        return;
      }
      case Stmt::Kind::AssignField: {
        Value o = read_var(s->target, s->loc);
        object_of(o, s->target, s->loc);
        Value v = eval(s->expr);
        if (v.is_addr() && reachable(heap, *v.addr, *o.addr))
          throw RunError(RunError::Kind::CyclicHeap, s->loc,
                         "assignment would make #" + std::to_string(*o.addr) + " reach itself");
        Object& obj = heap.at(*o.addr);
        auto it = obj.find(s->field);
        Value stored = write(v, it == obj.end() ? nullptr : &it->second,
                             s->target + "." + s->field, s->loc);
        obj[s->field] = stored;
        assign_log.push_back({s->loc, sensitive(stored.label),
                              "#" + std::to_string(*o.addr) + "." + s->field});
        if (opts.observer) opts.observer->on_assign(s);
        return;
      }
      case Stmt::Kind::If: {
        Value g = eval(s->expr);
        bool taken = as_bool(g, s->expr->loc, "a condition");
        branch_log.push_back({s->loc, sensitive(g.label), taken});
        const StmtPtr& chosen = taken ? s->first : s->second;
        bool emitted = sensitive(g.label) && chosen->kind != Stmt::Kind::Skip;
        stack.push_back({g.label, g.vid, emitted, s->loc});
        if (emitted) {
          note(g);
          emit(Event::push(g.vid, s->loc));
        }
        if (opts.observer) opts.observer->on_branch(s, taken);
        work.push_back(Stmt::pop(s->loc));
        work.push_back(chosen);
        return;
      }
      case Stmt::Kind::Pop: {
        StackEntry top = stack.back();
        stack.pop_back();
        if (top.emitted) emit(Event::pop(s->loc));
        if (opts.observer) opts.observer->on_pop();
        return;
      }
      case Stmt::Kind::While:
        work.push_back(desugar_while(s));
        return;
      case Stmt::Kind::Sink: {
        Value v = eval(s->expr);
        if (pu()) {
          for (auto& x : free_vars(s->expr)) {
            auto it = env.find(x);
            bool partial = false;
            if (it != env.end())
              walk(it->second, heap, [&](const Value& r) { partial |= r.label == Label::P; });
            if (partial) pu_use(x);
          }
        }
        Label la = reach_join_label(v, heap);
        if (sensitive(la)) {
          StopReason r{StopReason::Kind::SinkViolation, ""};
          if (enforce() && opts.stop_on_sink) throw StopSignal{r, s->loc};
          violations.push_back({r, s->loc});
        }
        sink_count += reach_join_count(v, heap) + delta(Label::L, la, stack_sensitive());
        walk(v, heap, [&](const Value& r) {
          if (sensitive(r.label)) {
            note(r);
            emit(Event::sink(r.vid, s->loc));
          }
        });
        outputs.push_back(to_val(heap, v));
        if (opts.observer) opts.observer->on_sink(s);
        return;
      }
      case Stmt::Kind::Upgrade:
        do_upgrade(s->target, s->loc, false, false);
        return;
      case Stmt::Kind::MarkSrc:
        do_upgrade(s->target, s->loc, true, false);
        return;
    }
  }
};

Machine::Machine(StmtPtr program, State init, const Policy& policy, RunOptions opts)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.opts = std::move(opts);
  m.program = program;
  m.env = std::move(init.env);
  m.heap = std::move(init.heap);
  for (auto& [_, v] : m.env) m.mint(v);
  for (auto& [a, obj] : m.heap) {
    m.next_addr = std::max(m.next_addr, a);
    for (auto& [_, v] : obj) m.mint(v);
  }
  if (m.opts.plan)
    for (auto& [loc, x] : m.opts.plan->insertions) m.intercept[loc].push_back(x);
  // Initially sensitive bindings and policy sources both become sources.
  std::set<std::string> sources(policy.sources.begin(), policy.sources.end());
  for (auto& [name, v] : m.env)
    if (sensitive(v.label)) sources.insert(name);
  for (auto& name : sources) {
    if (!m.env.count(name)) continue;
    m.do_upgrade(name, Loc{"@" + name, 1, 1}, true, false);
  }
  m.work.push_back(program);
}

Machine::~Machine() = default;
Machine::Machine(Machine&&) noexcept = default;

bool Machine::step() {
  auto& m = *impl_;
  if (m.done) return false;
  while (!m.work.empty() && m.work.back()->kind == Stmt::Kind::Seq) {
    StmtPtr s = m.work.back();
    m.work.pop_back();
    m.work.push_back(s->second);
    m.work.push_back(s->first);
  }
  if (m.work.empty()) {
    m.outcome = Outcome::Completed;
    m.done = true;
    return false;
  }
  if (m.steps >= m.opts.budget) {
    m.outcome = Outcome::BudgetExhausted;
    m.done = true;
    return false;
  }
  StmtPtr s = m.work.back();
  m.work.pop_back();
  ++m.steps;
  try {
    m.exec(s);
  } catch (const StopSignal& sig) {
    m.outcome = Outcome::Stopped;
    m.stop = sig.reason;
    m.stop_loc = sig.loc;
    m.done = true;
    return false;
  }
  return true;
}

RunResult Machine::finish() {
  auto& m = *impl_;
  while (step()) {
  }
  // A stopped run leaves contexts open; close them so the trace is balanced.
  for (auto it = m.stack.rbegin(); it != m.stack.rend(); ++it)
    if (it->emitted) m.emit(Event::pop(it->loc));
  RunResult r;
  r.outcome = m.outcome;
  r.stop = m.stop;
  r.stop_loc = m.stop_loc;
  r.counters = m.counters;
  r.sink_count = m.sink_count;
  r.assign_log = std::move(m.assign_log);
  r.branch_log = std::move(m.branch_log);
  r.violations = std::move(m.violations);
  r.outputs = std::move(m.outputs);
  r.steps = m.steps;
  r.final_state = {m.env, m.heap};
  r.trace.strategy = strategy_name(m.opts.cfg.strategy);

  // Renumber: only values mentioned by events keep an id, in creation order.
  std::set<ValueId> used;
  for (auto& e : m.events)
    for (auto id : e.ids()) used.insert(id);
  std::map<ValueId, ValueId> renum;
  ValueId k = 0;
  for (auto id : used) renum[id] = ++k;
  auto nearest = [&](ValueId id) -> std::optional<ValueId> {
    for (auto it = m.alias.find(id); it != m.alias.end(); it = m.alias.find(it->second))
      if (used.count(it->second)) return renum[it->second];
    return std::nullopt;
  };
  for (auto id : used) {
    ValueInfo vi = m.info.at(id);
    vi.from = nearest(id);
    r.trace.values[renum[id]] = vi;
  }
  for (auto e : m.events) {
    e.v = e.kind == EventKind::Pop ? 0 : renum[e.v];
    if (e.old) e.old = renum[*e.old];
    if (e.kind == EventKind::Op) e.a1 = renum[e.a1];
    if (e.a2) e.a2 = renum[*e.a2];
    r.trace.events.push_back(std::move(e));
  }
  return r;
}

Value Machine::eval(const ExprPtr& e) { return impl_->eval(e); }
const Env& Machine::env() const { return impl_->env; }
const Heap& Machine::heap() const { return impl_->heap; }
const std::vector<StackEntry>& Machine::stack() const { return impl_->stack; }
FlowCount Machine::counters() const { return impl_->counters; }
FlowCount Machine::sink_count() const { return impl_->sink_count; }

RunResult run(const StmtPtr& program, const State& init, const Policy& policy,
              const RunOptions& opts) {
  Machine m(program, init, policy, opts);
  return m.finish();
}

Value eval_expr(const ExprPtr& e, const Env& env, const Heap& heap) {
  RunOptions o;
  o.cfg = {Strategy::Observable, Mode::Measure};
  o.record_trace = false;
  Machine m(Stmt::skip(), State{env, heap}, Policy{}, o);
  return m.eval(e);
}

}  // namespace nanoflow
