// Test-only reference evaluator: a direct big-step reading of the counting
// rules, written without the work list, value ids or trace machinery of the
// real monitor. Runs in measuring mode only and never stops.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nanoflow/lang.h"
#include "nanoflow/monitor.h"

namespace ref {

using nanoflow::BaseValue;
using nanoflow::FlowCount;
using nanoflow::Label;
using nanoflow::Strategy;

struct RV {
  BaseValue base;
  long addr = 0;  // 0: not a reference
  Label label = Label::L;
  FlowCount count;
};

struct Result {
  FlowCount counters, sink;
  std::map<std::string, RV> env;
  std::map<long, std::map<std::string, RV>> heap;
  std::vector<std::set<std::pair<BaseValue, std::vector<std::string>>>> outputs;
};

class Eval {
 public:
  Eval(Strategy s) : strategy_(s) {}

  Result run(const nanoflow::StmtPtr& p, const nanoflow::State& init,
             const std::vector<std::string>& sources) {
    for (auto& [a, obj] : init.heap) {
      for (auto& [f, v] : obj) r_.heap[long(a)][f] = conv(v);
      next_ = std::max(next_, long(a));
    }
    for (auto& [x, v] : init.env) r_.env[x] = conv(v);
    std::set<std::string> src(sources.begin(), sources.end());
    for (auto& [x, v] : r_.env)
      if (v.label != Label::L) src.insert(x);
    for (auto& x : src)
      if (r_.env.count(x)) mark(r_.env[x]);
    exec(p);
    return r_;
  }

 private:
  Strategy strategy_;
  Result r_;
  std::vector<Label> stack_;
  long next_ = 0;

  static RV conv(const nanoflow::Value& v) {
    RV r;
    r.base = v.base;
    r.addr = v.addr ? long(*v.addr) : 0;
    r.label = v.label;
    r.count = v.count;
    return r;
  }

  static bool sens(Label l) { return l != Label::L; }
  bool ctx() const {
    for (auto l : stack_)
      if (sens(l)) return true;
    return false;
  }
  static Label lub(Label a, Label b) {
    if (a == Label::H || b == Label::H) return Label::H;
    if (a == Label::P || b == Label::P) return Label::P;
    return Label::L;
  }
  static FlowCount plus(FlowCount a, const FlowCount& b) {
    a.expl += b.expl, a.obs += b.obs, a.hid += b.hid;
    return a;
  }
  FlowCount d(Label old, Label nw) const {
    FlowCount c;
    if (sens(nw) && !sens(old)) c.expl = 1;
    if (!sens(old) && ctx()) c.obs = 1;
    return c;
  }

  template <class F>
  void each(RV& v, F f) {
    f(v);
    if (v.addr)
      for (auto& [_, fv] : r_.heap[v.addr]) each(fv, f);
  }

  void mark(RV& v) {
    each(v, [](RV& x) { x.label = Label::H; });
  }

  void upgrade(RV& v) {
    each(v, [&](RV& x) {
      if (x.label == Label::L) {
        x.count.hid += 1;
        r_.counters.hid += 1;
      }
      x.label = Label::H;
    });
  }

  static std::int64_t num(const RV& v) { return std::get<std::int64_t>(v.base); }

  RV eval(const nanoflow::ExprPtr& e) {
    using K = nanoflow::Expr::Kind;
    using nanoflow::BinOp;
    switch (e->kind) {
      case K::Literal: return RV{e->lit, 0, Label::L, {}};
      case K::Var: return r_.env.at(e->name);
      case K::Field: return r_.heap.at(r_.env.at(e->name).addr).at(e->field);
      case K::Not: {
        RV a = eval(e->lhs);
        return RV{!std::get<bool>(a.base), 0, a.label, a.count};
      }
      case K::Object: {
        std::map<std::string, RV> o;
        for (auto& [f, fe] : e->fields) o[f] = eval(fe);
        r_.heap[++next_] = o;
        return RV{nanoflow::Null{}, next_, Label::L, {}};
      }
      case K::Binary: {
        RV a = eval(e->lhs), b = eval(e->rhs);
        RV r;
        r.label = lub(a.label, b.label);
        r.count = plus(a.count, b.count);
        bool sa = !a.addr && std::holds_alternative<std::string>(a.base);
        bool sb = !b.addr && std::holds_alternative<std::string>(b.base);
        switch (e->op) {
          case BinOp::Add:
            if (sa || sb) r.base = nanoflow::to_display(a.base) + nanoflow::to_display(b.base);
            else r.base = num(a) + num(b);
            break;
          case BinOp::Sub: r.base = num(a) - num(b); break;
          case BinOp::Mul: r.base = num(a) * num(b); break;
          case BinOp::Lt:
            if (sa && sb) r.base = std::get<std::string>(a.base) < std::get<std::string>(b.base);
            else r.base = num(a) < num(b);
            break;
          case BinOp::StrictEq:
          case BinOp::StrictNe: {
            bool eq = (a.addr || b.addr) ? a.addr == b.addr : a.base == b.base;
            r.base = e->op == BinOp::StrictEq ? eq : !eq;
            break;
          }
          case BinOp::And: r.base = std::get<bool>(a.base) && std::get<bool>(b.base); break;
          case BinOp::Or: r.base = std::get<bool>(a.base) || std::get<bool>(b.base); break;
        }
        return r;
      }
    }
    throw std::logic_error("expr");
  }

  // The label a slot gets when `v` is written over a slot labelled `old`.
  Label stored(Label old, Label le) const {
    if (!ctx() || sens(le)) return le;
    switch (strategy_) {
      case Strategy::Taint: return le;
      case Strategy::Observable:
      case Strategy::NSU: return Label::H;
      case Strategy::PU: return sens(old) ? Label::H : Label::P;
    }
    return le;
  }

  RV write(const RV* old, RV v) {
    Label lo = old ? old->label : Label::L;
    FlowCount dd = d(lo, v.label);
    r_.counters = plus(r_.counters, dd);
    v.count = plus(v.count, dd);
    v.label = stored(lo, v.label);
    return v;
  }

  void collect(const RV& v, std::vector<std::string>& path,
               std::set<std::pair<BaseValue, std::vector<std::string>>>& out) {
    if (!v.addr) {
      out.insert({v.base, path});
      return;
    }
    for (auto& [f, fv] : r_.heap.at(v.addr)) {
      path.push_back(f);
      collect(fv, path, out);
      path.pop_back();
    }
  }

  void exec(const nanoflow::StmtPtr& s) {
    using K = nanoflow::Stmt::Kind;
    switch (s->kind) {
      case K::Skip:
      case K::Pop: return;
      case K::Seq:
        exec(s->first);
        exec(s->second);
        return;
      case K::Assign: {
        RV v = eval(s->expr);
        auto it = r_.env.find(s->target);
        RV w = write(it == r_.env.end() ? nullptr : &it->second, v);
        r_.env[s->target] = w;
        return;
      }
      case K::AssignField: {
        long a = r_.env.at(s->target).addr;
        RV v = eval(s->expr);
        auto& obj = r_.heap.at(a);
        auto it = obj.find(s->field);
        RV w = write(it == obj.end() ? nullptr : &it->second, v);
        obj[s->field] = w;
        return;
      }
      case K::If: {
        RV g = eval(s->expr);
        stack_.push_back(g.label);
        exec(std::get<bool>(g.base) ? s->first : s->second);
        stack_.pop_back();
        return;
      }
      case K::While: {
        // if (g) { body; while ... } : the guard stays pushed until the
        // loop as a whole is left
        RV g = eval(s->expr);
        stack_.push_back(g.label);
        if (std::get<bool>(g.base)) {
          exec(s->first);
          exec(s);
        }
        stack_.pop_back();
        return;
      }
      case K::Sink: {
        RV v = eval(s->expr);
        Label la = Label::L;
        FlowCount ka;
        RV copy = v;
        each(copy, [&](RV& x) {
          la = lub(la, x.label);
          ka = plus(ka, x.count);
        });
        r_.sink = plus(r_.sink, plus(ka, d(Label::L, la)));
        std::vector<std::string> path;
        std::set<std::pair<BaseValue, std::vector<std::string>>> o;
        collect(v, path, o);
        r_.outputs.push_back(o);
        return;
      }
      case K::Upgrade: {
        auto it = r_.env.find(s->target);
        if (it != r_.env.end()) upgrade(it->second);
        return;
      }
      case K::MarkSrc: {
        auto it = r_.env.find(s->target);
        if (it != r_.env.end()) mark(it->second);
        return;
      }
    }
  }
};

}  // namespace ref
