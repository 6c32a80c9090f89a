#include "nanoflow/trace.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nanoflow {

using ojson = nlohmann::ordered_json;

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Source: return "source";
    case EventKind::Sink: return "sink";
    case EventKind::Write: return "write";
    case EventKind::Op: return "op";
    case EventKind::Upgrade: return "upgrade";
    case EventKind::Push: return "push";
    case EventKind::Pop: return "pop";
  }
  return "?";
}

std::vector<ValueId> Event::ids() const {
  switch (kind) {
    case EventKind::Source:
    case EventKind::Sink:
    case EventKind::Push: return {v};
    case EventKind::Write:
      if (old) return {*old, v};
      return {v};
    case EventKind::Op:
      if (a2) return {a1, *a2, v};
      return {a1, v};
    case EventKind::Upgrade: return {*old, v};
    case EventKind::Pop: return {};
  }
  return {};
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Taint: return "taint";
    case Strategy::Observable: return "observable";
    case Strategy::NSU: return "nsu";
    case Strategy::PU: return "pu";
  }
  return "?";
}

std::optional<Strategy> strategy_from(std::string_view s) {
  if (s == "taint") return Strategy::Taint;
  if (s == "observable") return Strategy::Observable;
  if (s == "nsu") return Strategy::NSU;
  if (s == "pu") return Strategy::PU;
  return std::nullopt;
}

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::Direct: return "Direct";
    case Classification::ExplicitOnly: return "ExplicitOnly";
    case Classification::ExplicitAndObservable: return "ExplicitAndObservable";
    case Classification::ObservableOnly: return "ObservableOnly";
    case Classification::InvolvesHidden: return "InvolvesHidden";
  }
  return "?";
}

static void check_ids(const Trace& t, const Event& e, std::size_t i) {
  if (t.values.empty()) return;  // hand-built traces may omit the table
  for (auto id : e.ids())
    if (!t.values.count(id))
      throw MalformedTrace("event " + std::to_string(i + 1) + " mentions unknown value v" +
                           std::to_string(id));
}

Interpretation interpret_trace(const Trace& t) {
  Interpretation r;
  std::set<ValueId> tagged_set;
  std::size_t depth = 0;
  // A silently relabelled value inherits the tag of its origin.
  auto tagged = [&](ValueId v) {
    for (;;) {
      if (tagged_set.count(v)) return true;
      auto it = t.values.find(v);
      if (it == t.values.end() || !it->second.from) return false;
      v = *it->second.from;
    }
  };
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    check_ids(t, e, i);
    switch (e.kind) {
      case EventKind::Source:
      case EventKind::Op: tagged_set.insert(e.v); break;
      case EventKind::Write: {
        bool old_tagged = e.old && tagged(*e.old);
        if (!old_tagged && tagged(e.v)) ++r.cE;
        if (!old_tagged && depth > 0) ++r.cO;
        tagged_set.insert(e.v);
        break;
      }
      case EventKind::Upgrade:
        ++r.cH;
        tagged_set.insert(e.v);
        break;
      case EventKind::Push: ++depth; break;
      case EventKind::Pop:
        if (depth == 0) throw MalformedTrace("pop without push at event " + std::to_string(i + 1));
        --depth;
        break;
      case EventKind::Sink: break;
    }
    r.per_event.push_back({r.cE, r.cO, r.cH, depth});
  }
  if (depth != 0) throw MalformedTrace("unbalanced push/pop at end of trace");
  return r;
}

Edg build_edg(const Trace& t) {
  Edg g;
  g.nodes = t.events.size();
  g.succ.assign(g.nodes, {});
  g.pred.assign(g.nodes, {});
  std::map<ValueId, std::vector<std::size_t>> producers;
  std::vector<std::size_t> open;
  auto edge = [&](std::size_t a, std::size_t b) {
    if (g.edges.insert({a, b}).second) {
      g.succ[a].push_back(b);
      g.pred[b].push_back(a);
    }
  };
  auto consume = [&](ValueId v, std::size_t i) {
    for (;;) {
      auto it = producers.find(v);
      if (it != producers.end()) {
        for (auto p : it->second) edge(p, i);
        return;
      }
      auto vi = t.values.find(v);
      if (vi == t.values.end() || !vi->second.from) return;
      v = *vi->second.from;
    }
  };
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    check_ids(t, e, i);
    switch (e.kind) {
      case EventKind::Source: producers[e.v].push_back(i); break;
      case EventKind::Op:
        consume(e.a1, i);
        if (e.a2) consume(*e.a2, i);
        producers[e.v].push_back(i);
        break;
      case EventKind::Write:
        consume(e.v, i);
        for (auto p : open) edge(p, i);
        producers[e.v].push_back(i);
        break;
      case EventKind::Upgrade:
        consume(*e.old, i);
        producers[e.v].push_back(i);
        break;
      case EventKind::Push:
        consume(e.v, i);
        open.push_back(i);
        break;
      case EventKind::Pop:
        if (open.empty()) throw MalformedTrace("pop without push at event " + std::to_string(i + 1));
        open.pop_back();
        break;
      case EventKind::Sink: consume(e.v, i); break;
    }
  }
  return g;
}

LocPattern LocPattern::parse(const std::string& s) {
  // file:line:col or file:line
  try {
    Loc l = Loc::parse(s);
    return {l.file, l.line, l.column};
  } catch (const std::invalid_argument&) {
  }
  auto c = s.rfind(':');
  if (c == std::string::npos || c == 0) throw std::invalid_argument("bad location: " + s);
  LocPattern p;
  p.file = s.substr(0, c);
  try {
    size_t used = 0;
    p.line = std::stoi(s.substr(c + 1), &used);
    if (used != s.size() - c - 1 || p.line <= 0) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad location: " + s);
  }
  return p;
}

bool LocPattern::matches(const Loc& l) const {
  return l.file == file && l.line == line && (column == 0 || l.column == column);
}

static std::vector<std::size_t> matching_pops(const Trace& t) {
  std::vector<std::size_t> pop_of(t.events.size(), SIZE_MAX), open;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].kind == EventKind::Push) open.push_back(i);
    if (t.events[i].kind == EventKind::Pop && !open.empty()) {
      pop_of[open.back()] = i;
      open.pop_back();
    }
  }
  return pop_of;
}

static std::vector<bool> reach(const Edg& g, const std::vector<std::size_t>& from, bool forward,
                               const std::vector<bool>* blocked = nullptr) {
  std::vector<bool> seen(g.nodes, false);
  std::vector<std::size_t> todo;
  for (auto i : from)
    if (!seen[i]) seen[i] = true, todo.push_back(i);
  while (!todo.empty()) {
    auto i = todo.back();
    todo.pop_back();
    for (auto j : forward ? g.succ[i] : g.pred[i]) {
      if (seen[j] || (blocked && (*blocked)[j])) continue;
      seen[j] = true;
      todo.push_back(j);
    }
  }
  return seen;
}

std::vector<std::size_t> subtrace_indices(const Edg& g, const Trace& t, const LocPattern& src,
                                          const LocPattern& snk) {
  std::vector<std::size_t> starts, ends;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if ((e.kind == EventKind::Source || e.kind == EventKind::Upgrade) && src.matches(e.loc))
      starts.push_back(i);
    if (e.kind == EventKind::Sink && snk.matches(e.loc)) ends.push_back(i);
  }
  if (starts.empty()) throw NoSuchLocation("no source or upgrade event at the source location");
  if (ends.empty()) throw NoSuchLocation("no sink event at the sink location");
  auto fwd = reach(g, starts, true);
  auto bwd = reach(g, ends, false);
  auto pop_of = matching_pops(t);
  std::vector<bool> on(t.events.size(), false);
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (!(fwd[i] && bwd[i])) continue;
    on[i] = true;
    // Keep the subtrace balanced: an included push brings its pop.
    if (t.events[i].kind == EventKind::Push && pop_of[i] != SIZE_MAX) on[pop_of[i]] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < on.size(); ++i)
    if (on[i]) out.push_back(i);
  return out;
}

static Trace restrict_to(const Trace& t, const std::vector<std::size_t>& idx) {
  Trace out;
  out.program = t.program;
  out.strategy = t.strategy;
  for (auto i : idx) {
    out.events.push_back(t.events[i]);
    for (auto id : t.events[i].ids()) {
      for (std::optional<ValueId> v = id; v;) {
        auto it = t.values.find(*v);
        if (it == t.values.end() || out.values.count(*v)) break;
        out.values[*v] = it->second;
        v = it->second.from;
      }
    }
  }
  return out;
}

Trace source_to_sink_subtrace(const Edg& g, const Trace& t, const LocPattern& src,
                              const LocPattern& snk) {
  return restrict_to(t, subtrace_indices(g, t, src, snk));
}

Trace source_to_sink_subtrace(const Edg& g, const Trace& t, const Loc& src, const Loc& snk) {
  return source_to_sink_subtrace(g, t, LocPattern{src.file, src.line, src.column},
                                 LocPattern{snk.file, snk.line, snk.column});
}

Classification classify_subtrace(const Trace& sub) {
  if (sub.events.empty()) throw EmptySubtrace();
  for (auto& e : sub.events)
    if (e.kind == EventKind::Upgrade) return Classification::InvolvesHidden;
  auto r = interpret_trace(sub);
  if (r.cE > 0 && r.cO > 0) return Classification::ExplicitAndObservable;
  if (r.cO > 0) return Classification::ObservableOnly;
  if (r.cE > 0) return Classification::ExplicitOnly;
  return Classification::Direct;
}

bool has_explicit_path(const Trace& sub) {
  Edg g = build_edg(sub);
  std::vector<std::size_t> starts;
  std::vector<bool> blocked(g.nodes, false);
  for (std::size_t i = 0; i < sub.events.size(); ++i) {
    auto k = sub.events[i].kind;
    if (k == EventKind::Source || k == EventKind::Upgrade) starts.push_back(i);
    if (k == EventKind::Push) blocked[i] = true;
  }
  auto fwd = reach(g, starts, true, &blocked);
  for (std::size_t i = 0; i < sub.events.size(); ++i)
    if (sub.events[i].kind == EventKind::Sink && fwd[i]) return true;
  return false;
}

bool detectable_by(Classification c, Strategy s, bool explicit_path) {
  switch (s) {
    case Strategy::NSU:
    case Strategy::PU: return true;
    case Strategy::Observable: return c != Classification::InvolvesHidden;
    case Strategy::Taint:
      switch (c) {
        case Classification::Direct:
        case Classification::ExplicitOnly: return true;
        case Classification::ExplicitAndObservable:
        case Classification::ObservableOnly: return explicit_path;
        case Classification::InvolvesHidden: return false;
      }
  }
  return false;
}

static int rank(Classification c) {
  switch (c) {
    case Classification::Direct: return 0;
    case Classification::ExplicitOnly: return 1;
    case Classification::ObservableOnly: return 2;
    case Classification::ExplicitAndObservable: return 3;
    case Classification::InvolvesHidden: return 4;
  }
  return 0;
}

std::vector<UniqueFlow> unique_flows(const std::vector<Trace>& flows) {
  std::vector<UniqueFlow> out;
  for (auto& f : flows) {
    std::set<Loc> locs;
    for (auto& e : f.events) locs.insert(e.loc);
    Classification c = classify_subtrace(f);
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const UniqueFlow& u) { return u.locations == locs; });
    if (it == out.end()) {
      out.push_back({locs, c, 1});
    } else {
      ++it->multiplicity;
      if (rank(c) > rank(it->classification)) it->classification = c;
    }
  }
  return out;
}

std::vector<PairFlow> source_sink_flows(const Trace& t) {
  std::set<Loc> srcs, snks;
  for (auto& e : t.events) {
    if (e.kind == EventKind::Source || e.kind == EventKind::Upgrade) srcs.insert(e.loc);
    if (e.kind == EventKind::Sink) snks.insert(e.loc);
  }
  std::vector<PairFlow> out;
  if (srcs.empty() || snks.empty()) return out;
  Edg g = build_edg(t);
  for (auto& a : srcs)
    for (auto& b : snks) {
      PairFlow f;
      f.source = a;
      f.sink = b;
      f.events = subtrace_indices(g, t, LocPattern{a.file, a.line, a.column},
                                  LocPattern{b.file, b.line, b.column});
      if (f.events.empty()) continue;
      // A flow needs both ends; a sink reached only from elsewhere is not one.
      bool has_src = false, has_snk = false;
      for (auto i : f.events) {
        auto& e = t.events[i];
        has_src |= (e.kind == EventKind::Source || e.kind == EventKind::Upgrade) && e.loc == a;
        has_snk |= e.kind == EventKind::Sink && e.loc == b;
      }
      if (!has_src || !has_snk) continue;
      f.subtrace = restrict_to(t, f.events);
      f.classification = classify_subtrace(f.subtrace);
      f.explicit_path = has_explicit_path(f.subtrace);
      out.push_back(std::move(f));
    }
  return out;
}

// ---- JSON lines

static ojson id_or_null(const std::optional<ValueId>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::string write_trace(const Trace& t) {
  std::ostringstream os;
  ojson meta;
  meta["k"] = "meta";
  meta["version"] = 1;
  meta["program"] = t.program;
  meta["strategy"] = t.strategy;
  os << meta.dump() << '\n';
  for (auto& e : t.events) {
    ojson j;
    j["k"] = event_kind_name(e.kind);
    switch (e.kind) {
      case EventKind::Source:
      case EventKind::Sink:
      case EventKind::Push: j["v"] = e.v; break;
      case EventKind::Write:
      case EventKind::Upgrade:
        j["old"] = id_or_null(e.old);
        j["new"] = e.v;
        break;
      case EventKind::Op:
        j["a1"] = e.a1;
        j["a2"] = id_or_null(e.a2);
        j["new"] = e.v;
        break;
      case EventKind::Pop: break;
    }
    j["loc"] = e.loc.str();
    os << j.dump() << '\n';
  }
  for (auto& [id, vi] : t.values) {
    ojson j;
    j["k"] = "val";
    j["id"] = id;
    j["label"] = label_name(vi.label);
    j["show"] = vi.show;
    if (vi.from) j["from"] = *vi.from;
    os << j.dump() << '\n';
  }
  return os.str();
}

void write_trace(const Trace& t, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << write_trace(t);
  if (!f) throw std::runtime_error("cannot write " + path);
}

Trace read_trace_text(const std::string& text) {
  Trace t;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  auto need_id = [&](const ojson& j, const char* key) -> ValueId {
    if (!j.contains(key) || !j[key].is_number_unsigned())
      throw FormatError(n, std::string("missing or bad '") + key + "'");
    return j[key].get<ValueId>();
  };
  auto opt_id = [&](const ojson& j, const char* key) -> std::optional<ValueId> {
    if (!j.contains(key)) throw FormatError(n, std::string("missing '") + key + "'");
    if (j[key].is_null()) return std::nullopt;
    return need_id(j, key);
  };
  auto loc = [&](const ojson& j) {
    if (!j.contains("loc") || !j["loc"].is_string()) throw FormatError(n, "missing 'loc'");
    try {
      return Loc::parse(j["loc"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw FormatError(n, e.what());
    }
  };
  while (std::getline(is, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const std::exception&) {
      throw FormatError(n, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("k") || !j["k"].is_string())
      throw FormatError(n, "missing 'k'");
    auto k = j["k"].get<std::string>();
    if (k == "meta") {
      t.program = j.value("program", "");
      t.strategy = j.value("strategy", "");
    } else if (k == "val") {
      ValueInfo vi;
      auto l = label_from(j.value("label", ""));
      if (!l) throw FormatError(n, "bad label");
      vi.label = *l;
      vi.show = j.value("show", "");
      if (j.contains("from")) vi.from = need_id(j, "from");
      t.values[need_id(j, "id")] = vi;
    } else if (k == "source") {
      t.events.push_back(Event::source(need_id(j, "v"), loc(j)));
    } else if (k == "sink") {
      t.events.push_back(Event::sink(need_id(j, "v"), loc(j)));
    } else if (k == "push") {
      t.events.push_back(Event::push(need_id(j, "v"), loc(j)));
    } else if (k == "pop") {
      t.events.push_back(Event::pop(loc(j)));
    } else if (k == "write") {
      auto o = opt_id(j, "old");
      t.events.push_back(Event::write(o, need_id(j, "new"), loc(j)));
    } else if (k == "upgrade") {
      t.events.push_back(Event::upgrade(need_id(j, "old"), need_id(j, "new"), loc(j)));
    } else if (k == "op") {
      auto a2 = opt_id(j, "a2");
      t.events.push_back(Event::op(need_id(j, "a1"), a2, need_id(j, "new"), loc(j)));
    } else {
      throw FormatError(n, "unknown event kind '" + k + "'");
    }
  }
  return t;
}

Trace read_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return read_trace_text(ss.str());
}

}  // namespace nanoflow
