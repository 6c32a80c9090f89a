#include "nanoflow/secrecy.h"

#include <functional>
#include <set>
#include <sstream>

namespace nanoflow {

void EvalContext::then_stmt(const StmtPtr& c) { frames_.push_back({Frame::Kind::Seq, c}); }

void EvalContext::enter_branch(const StmtPtr& if_stmt, bool taken) {
  frames_.push_back({taken ? Frame::Kind::IfThen : Frame::Kind::IfElse, if_stmt});
}

static StmtPtr plug_frames(const std::vector<EvalContext::Frame>& fs, std::size_t from,
                           StmtPtr c) {
  using K = EvalContext::Frame::Kind;
  for (std::size_t i = fs.size(); i-- > from;) {
    auto& f = fs[i];
    switch (f.kind) {
      case K::Seq: c = Stmt::seq(f.stmt, c); break;
      case K::IfThen: c = Stmt::if_(f.stmt->expr, c, Stmt::skip(f.stmt->loc), f.stmt->loc); break;
      case K::IfElse: c = Stmt::if_(f.stmt->expr, Stmt::skip(f.stmt->loc), c, f.stmt->loc); break;
    }
  }
  return c;
}

void EvalContext::leave_branch() {
  std::size_t i = frames_.size();
  while (i > 0 && frames_[i - 1].kind == Frame::Kind::Seq) --i;
  if (i == 0) throw std::logic_error("leave_branch outside any branch");
  --i;
  StmtPtr closed = plug_frames(frames_, i, Stmt::skip(frames_[i].stmt->loc));
  frames_.resize(i);
  frames_.push_back({Frame::Kind::Seq, closed});
}

StmtPtr EvalContext::plug(const StmtPtr& c) const { return plug_frames(frames_, 0, c); }

namespace {

class ExplicitExtractor : public ExecObserver {
 public:
  std::vector<StmtPtr> stmts;
  void on_assign(const StmtPtr& s) override { stmts.push_back(s); }
  void on_sink(const StmtPtr& s) override { stmts.push_back(s); }
};

class ObservableExtractor : public ExecObserver {
 public:
  EvalContext cxt;
  void on_assign(const StmtPtr& s) override { cxt.then_stmt(s); }
  void on_sink(const StmtPtr& s) override { cxt.then_stmt(s); }
  void on_branch(const StmtPtr& s, bool taken) override { cxt.enter_branch(s, taken); }
  void on_pop() override { cxt.leave_branch(); }
};

RunResult extraction_run(const StmtPtr& program, const State& init, const Policy& policy,
                         std::uint64_t budget, ExecObserver* obs) {
  RunOptions ro;
  ro.cfg = {Strategy::Observable, Mode::Measure};
  ro.budget = budget;
  ro.record_trace = false;
  ro.observer = obs;
  auto r = run(program, init, policy, ro);
  if (r.outcome == Outcome::BudgetExhausted)
    throw std::runtime_error("budget exhausted during extraction");
  return r;
}

}  // namespace

ExtractedProgram extract_explicit(const StmtPtr& program, const State& init,
                                  const Policy& policy, std::uint64_t budget) {
  ExplicitExtractor x;
  extraction_run(program, init, policy, budget, &x);
  return {normalize_skips(Stmt::block(x.stmts))};
}

ExtractedProgram extract_observable(const StmtPtr& program, const State& init,
                                    const Policy& policy, std::uint64_t budget) {
  ObservableExtractor x;
  extraction_run(program, init, policy, budget, &x);
  return {normalize_skips(x.cxt.plug(Stmt::skip()))};
}

std::vector<BaseValue> LowDomain::choices_for(const BaseValue& b) const {
  std::vector<BaseValue> out;
  if (std::holds_alternative<bool>(b))
    for (bool x : bools) out.push_back(x);
  else if (std::holds_alternative<std::int64_t>(b))
    for (auto x : ints) out.push_back(x);
  else if (std::holds_alternative<std::string>(b))
    for (auto& x : strings) out.push_back(x);
  else
    out.push_back(b);
  return out;
}

bool low_equivalent(const State& a, const State& b) {
  if (a.env.size() != b.env.size()) return false;
  for (auto& [x, va] : a.env) {
    auto it = b.env.find(x);
    if (it == b.env.end() || it->second.label != va.label) return false;
    if (!sensitive(va.label) && to_val(a.heap, va) != to_val(b.heap, it->second)) return false;
  }
  if (a.heap.size() != b.heap.size()) return false;
  for (auto ia = a.heap.begin(), ib = b.heap.begin(); ia != a.heap.end(); ++ia, ++ib)
    if (ia->first != ib->first) return false;
  return true;
}

const char* verdict_name(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Holds: return "holds";
    case Verdict::Kind::Fails: return "fails";
    case Verdict::Kind::Undecided: return "undecided";
  }
  return "?";
}

static void mark_src_targets(const StmtPtr& s, std::set<std::string>& out) {
  if (!s) return;
  if (s->kind == Stmt::Kind::MarkSrc) out.insert(s->target);
  mark_src_targets(s->first, out);
  mark_src_targets(s->second, out);
}

std::vector<std::string> sensitive_names(const StmtPtr& program, const State& init,
                                         const Policy& policy) {
  std::set<std::string> names(policy.sources.begin(), policy.sources.end());
  for (auto& [x, v] : init.env)
    if (sensitive(v.label)) names.insert(x);
  mark_src_targets(program, names);
  std::vector<std::string> out;
  for (auto& x : names)
    if (init.env.count(x)) out.push_back(x);
  return out;
}

namespace {

// A base value inside the initial state: a variable, or a field path below it.
struct Position {
  std::string var;
  std::vector<std::string> path;
  BaseValue original;
};

void collect_positions(const State& s, const std::string& var, const Value& v,
                       std::vector<std::string>& path, std::set<Addr>& seen,
                       std::vector<Position>& out) {
  if (!v.is_addr()) {
    out.push_back({var, path, v.base});
    return;
  }
  if (!seen.insert(*v.addr).second) return;
  for (auto& [f, fv] : s.heap.at(*v.addr)) {
    path.push_back(f);
    collect_positions(s, var, fv, path, seen, out);
    path.pop_back();
  }
}

void set_position(State& s, const Position& p, const BaseValue& b) {
  Value* v = &s.env.at(p.var);
  for (auto& f : p.path) v = &s.heap.at(*v->addr).at(f);
  v->base = b;
}

struct Observed {
  std::vector<Observation> outputs;
  std::string error;
  bool operator==(const Observed&) const = default;
};

std::optional<Observed> observe(const StmtPtr& program, const State& init, const Policy& policy,
                                std::uint64_t budget) {
  RunOptions ro;
  ro.cfg = {Strategy::Taint, Mode::Measure};
  ro.budget = budget;
  ro.stop_on_sink = false;
  ro.record_trace = false;
  Observed o;
  try {
    auto r = run(program, init, policy, ro);
    if (r.outcome == Outcome::BudgetExhausted) return std::nullopt;
    o.outputs = std::move(r.outputs);
  } catch (const RunError& e) {
    o.error = RunError::kind_name(e.kind());
  }
  return o;
}

}  // namespace

Verdict check_noninterference(const StmtPtr& program, const State& init, const Policy& policy,
                              const LowDomain& domain, std::uint64_t budget,
                              const std::vector<std::string>& vary) {
  Verdict v;
  std::vector<std::string> names = vary.empty() ? sensitive_names(program, init, policy) : vary;
  std::vector<Position> pos;
  for (auto& x : names) {
    auto it = init.env.find(x);
    if (it == init.env.end()) continue;
    std::vector<std::string> path;
    std::set<Addr> seen;
    collect_positions(init, x, it->second, path, seen, pos);
  }
  std::vector<std::vector<BaseValue>> choices;
  std::size_t total = 1;
  for (auto& p : pos) {
    choices.push_back(domain.choices_for(p.original));
    total *= choices.back().size();
    if (total > domain.max_variants) {
      v.kind = Verdict::Kind::Undecided;
      v.reason = "more than " + std::to_string(domain.max_variants) + " low-equivalent variants";
      return v;
    }
  }
  auto ref = observe(program, init, policy, budget);
  if (!ref) {
    v.kind = Verdict::Kind::Undecided;
    v.reason = "budget exhausted on the reference run";
    return v;
  }
  std::vector<std::size_t> idx(pos.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    State s = init;
    for (std::size_t i = 0; i < pos.size(); ++i) set_position(s, pos[i], choices[i][idx[i]]);
    ++v.variants;
    auto o = observe(program, s, policy, budget);
    if (!o) {
      v.kind = Verdict::Kind::Undecided;
      v.reason = "budget exhausted on a variant";
      return v;
    }
    if (!(*o == *ref)) {
      v.kind = Verdict::Kind::Fails;
      v.counterexample = std::move(s);
      return v;
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (++idx[i] < choices[i].size()) break;
      idx[i] = 0;
    }
  }
  return v;
}

template <class Extract>
static Verdict check_extracted(Extract extract, const StmtPtr& program, const State& init,
                               const Policy& policy, const LowDomain& domain,
                               std::uint64_t budget) {
  ExtractedProgram e;
  try {
    e = extract(program, init, policy, budget);
  } catch (const RunError& err) {
    Verdict v;
    v.kind = Verdict::Kind::Undecided;
    v.reason = err.what();
    return v;
  } catch (const std::runtime_error& err) {
    Verdict v;
    v.kind = Verdict::Kind::Undecided;
    v.reason = err.what();
    return v;
  }
  // Sensitive positions come from the source program, not the extract.
  return check_noninterference(e.body, init, policy, domain, budget,
                               sensitive_names(program, init, policy));
}

Verdict check_explicit_secrecy(const StmtPtr& program, const State& init, const Policy& policy,
                               const LowDomain& domain, std::uint64_t budget) {
  return check_extracted(extract_explicit, program, init, policy, domain, budget);
}

Verdict check_observable_secrecy(const StmtPtr& program, const State& init,
                                 const Policy& policy, const LowDomain& domain,
                                 std::uint64_t budget) {
  return check_extracted(extract_observable, program, init, policy, domain, budget);
}

// ---- program generator

namespace {

enum class Ty { Int, Bool, Str };

struct Gen {
  std::mt19937_64& rng;
  std::vector<std::pair<std::string, Ty>> lows, highs;
  std::optional<Ty> field;  // type of o.a when o exists
  int budget = 8;
  int counters = 0;

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }
  Ty any_ty() { return Ty(pick(3)); }

  std::string literal(Ty t) {
    switch (t) {
      case Ty::Int: return std::to_string(pick(4));
      case Ty::Bool: return coin(0.5) ? "true" : "false";
      case Ty::Str: {
        static const char* s[] = {"\"\"", "\"a\"", "\"b\"", "\"ab\""};
        return s[pick(4)];
      }
    }
    return "0";
  }

  std::vector<std::string> vars_of(Ty t, bool with_high) {
    std::vector<std::string> out;
    for (auto& [x, ty] : lows)
      if (ty == t) out.push_back(x);
    if (with_high)
      for (auto& [x, ty] : highs)
        if (ty == t) out.push_back(x);
    if (field && *field == t) out.push_back("o.a");
    return out;
  }

  std::string leaf(Ty t) {
    auto vs = vars_of(t, true);
    // Secrets are favoured so that most programs actually touch them.
    if (!vs.empty() && coin(0.75)) {
      std::vector<std::string> hs;
      for (auto& [x, ty] : highs)
        if (ty == t) hs.push_back(x);
      if (!hs.empty() && coin(0.4)) return hs[pick(int(hs.size()))];
      return vs[pick(int(vs.size()))];
    }
    return literal(t);
  }

  std::string expr(Ty t, int depth) {
    if (depth <= 0 || coin(0.4)) return leaf(t);
    switch (t) {
      case Ty::Int:
        switch (pick(3)) {
          case 0: return expr(Ty::Int, depth - 1) + " + " + expr(Ty::Int, depth - 1);
          case 1: return expr(Ty::Int, depth - 1) + " - " + leaf(Ty::Int);
          default: return leaf(Ty::Int) + " * " + std::to_string(pick(3));
        }
      case Ty::Bool:
        switch (pick(5)) {
          case 0: return leaf(Ty::Int) + " < " + leaf(Ty::Int);
          case 1: {
            Ty u = any_ty();
            return leaf(u) + " === " + leaf(u);
          }
          case 2: return "!" + leaf(Ty::Bool);
          case 3: return "(" + expr(Ty::Bool, depth - 1) + ") && " + leaf(Ty::Bool);
          default: return "(" + expr(Ty::Bool, depth - 1) + ") || " + leaf(Ty::Bool);
        }
      case Ty::Str:
        if (coin(0.5)) return leaf(Ty::Str) + " + " + leaf(Ty::Str);
        return leaf(Ty::Str) + " + " + leaf(Ty::Int);
    }
    return literal(t);
  }

  void line(std::vector<std::string>& out, int indent, const std::string& s) {
    out.push_back(std::string(2 * indent, ' ') + s);
  }

  void stmt(std::vector<std::string>& out, int depth) {
    int choice = pick(10);
    if (choice >= 8 && depth < 2 && budget >= 3) {
      // bounded loop: counter init, loop, increment
      budget -= 3;
      std::string c = "c" + std::to_string(++counters);
      line(out, depth, c + " = 0;");
      std::string g = c + " < " + std::to_string(1 + pick(3));
      if (coin(0.5)) g += " && (" + expr(Ty::Bool, 1) + ")";
      line(out, depth, "while (" + g + ") {");
      block(out, depth + 1, 1 + pick(2));
      line(out, depth + 1, c + " = " + c + " + 1;");
      line(out, depth, "}");
      return;
    }
    if (choice >= 5 && depth < 2 && budget >= 2) {
      --budget;
      line(out, depth, "if (" + expr(Ty::Bool, 2) + ") {");
      block(out, depth + 1, 1 + pick(2));
      if (coin(0.5) && budget >= 1) {
        line(out, depth, "} else {");
        block(out, depth + 1, 1);
      }
      line(out, depth, "}");
      return;
    }
    if (budget <= 0) return;
    --budget;
    if (choice == 4) {
      line(out, depth, "sink(" + expr(any_ty(), 2) + ");");
      return;
    }
    if (field && coin(0.2)) {
      line(out, depth, "o.a = " + expr(*field, 2) + ";");
      return;
    }
    auto& [x, t] = lows[pick(int(lows.size()))];
    line(out, depth, x + " = " + expr(t, 2) + ";");
  }

  void block(std::vector<std::string>& out, int depth, int n) {
    for (int i = 0; i < n && budget > 0; ++i) stmt(out, depth);
  }
};

BaseValue random_base(Ty t, const LowDomain& d, std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  switch (t) {
    case Ty::Int: return d.ints[pick(d.ints.size())];
    case Ty::Bool: return bool(d.bools[pick(d.bools.size())]);
    case Ty::Str: return d.strings[pick(d.strings.size())];
  }
  return Null{};
}

}  // namespace

GeneratedCase generate_case(std::mt19937_64& rng) {
  LowDomain d;
  Gen g{rng, {}, {}, {}};
  GeneratedCase c;
  int nl = 1 + g.pick(3);
  for (int i = 1; i <= nl; ++i) g.lows.push_back({"l" + std::to_string(i), g.any_ty()});
  int nh = g.coin(0.5) ? 2 : 1;
  for (int i = 1; i <= nh; ++i) g.highs.push_back({"h" + std::to_string(i), g.any_ty()});
  if (g.coin(0.3)) g.field = g.any_ty();

  for (auto& [x, t] : g.lows) c.init.env[x] = Value::of(random_base(t, d, rng));
  for (auto& [x, t] : g.highs) c.init.env[x] = Value::of(random_base(t, d, rng), Label::H);
  if (g.field) {
    c.init.heap[1]["a"] = Value::of(random_base(*g.field, d, rng));
    c.init.env["o"] = Value::ref(1);
  }

  std::vector<std::string> lines;
  g.budget = 7;
  while (g.budget > 0) g.stmt(lines, 0);
  // Every program ends by observing something.
  std::string last = g.lows[g.pick(int(g.lows.size()))].first;
  lines.push_back("sink(" + last + ");");
  std::ostringstream src;
  for (auto& l : lines) src << l << "\n";
  c.source = src.str();
  c.program = parse(c.source, "gen.njs");
  return c;
}

static std::string describe_state(const State& s) {
  std::ostringstream os;
  for (auto& [x, v] : s.env) {
    os << x << "=";
    if (v.is_addr()) {
      os << "{";
      for (auto& [f, fv] : s.heap.at(*v.addr)) os << f << ":" << render(fv.base) << " ";
      os << "}";
    } else {
      os << render(v.base);
    }
    os << "/" << label_name(v.label) << " ";
  }
  return os.str();
}

TheoremReport theorem_suite(std::size_t n, std::uint64_t seed, const LowDomain& domain,
                            std::uint64_t budget) {
  TheoremReport rep;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    GeneratedCase c = generate_case(rng);
    ++rep.cases;
    RunOptions ro;
    ro.cfg = {Strategy::Observable, Mode::Measure};
    ro.budget = budget;
    ro.record_trace = false;
    RunResult r;
    try {
      r = run(c.program, c.init, c.policy, ro);
    } catch (const RunError&) {
      ++rep.run_errors;
      continue;
    }
    if (r.outcome == Outcome::BudgetExhausted) {
      ++rep.undecided;
      continue;
    }
    bool undecided = false;
    if (r.sink_count.expl == 0) {
      auto v = check_explicit_secrecy(c.program, c.init, c.policy, domain, budget);
      if (v.kind == Verdict::Kind::Undecided) undecided = true;
      else ++rep.explicit_checked;
      if (v.kind == Verdict::Kind::Fails) rep.failures.push_back({1, c.source, describe_state(c.init)});
    }
    if (r.sink_count.expl == 0 && r.sink_count.obs == 0) {
      auto v = check_observable_secrecy(c.program, c.init, c.policy, domain, budget);
      if (v.kind == Verdict::Kind::Undecided) undecided = true;
      else ++rep.observable_checked;
      if (v.kind == Verdict::Kind::Fails) rep.failures.push_back({2, c.source, describe_state(c.init)});
    }
    if (undecided) ++rep.undecided;
  }
  return rep;
}

}  // namespace nanoflow
