// iFlow traces and their offline analyses.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nanoflow/label.h"
#include "nanoflow/lang.h"

namespace nanoflow {

using ValueId = std::uint64_t;

enum class EventKind { Source, Sink, Write, Op, Upgrade, Push, Pop };
const char* event_kind_name(EventKind k);

// Field use per kind:
//   source/sink/push: v
//   write:   old (empty = bottom), v = new value
//   op:      a1, a2 (empty for unary), v = result
//   upgrade: old, v = new value
struct Event {
  EventKind kind = EventKind::Pop;
  ValueId v = 0;
  std::optional<ValueId> old;
  ValueId a1 = 0;
  std::optional<ValueId> a2;
  Loc loc;

  bool operator==(const Event&) const = default;

  static Event source(ValueId v, Loc l) { return {EventKind::Source, v, {}, 0, {}, std::move(l)}; }
  static Event sink(ValueId v, Loc l) { return {EventKind::Sink, v, {}, 0, {}, std::move(l)}; }
  static Event write(std::optional<ValueId> o, ValueId n, Loc l) {
    return {EventKind::Write, n, o, 0, {}, std::move(l)};
  }
  static Event op(ValueId a, std::optional<ValueId> b, ValueId n, Loc l) {
    return {EventKind::Op, n, {}, a, b, std::move(l)};
  }
  static Event upgrade(ValueId o, ValueId n, Loc l) {
    return {EventKind::Upgrade, n, o, 0, {}, std::move(l)};
  }
  static Event push(ValueId v, Loc l) { return {EventKind::Push, v, {}, 0, {}, std::move(l)}; }
  static Event pop(Loc l) { return {EventKind::Pop, 0, {}, 0, {}, std::move(l)}; }

  // Value ids this event mentions, in field order.
  std::vector<ValueId> ids() const;
};

struct ValueInfo {
  std::string show;
  Label label = Label::L;
  // Set when the value was relabelled without an event of its own.
  std::optional<ValueId> from;
  bool operator==(const ValueInfo&) const = default;
};

struct Trace {
  std::string program;
  std::string strategy;
  std::vector<Event> events;
  std::map<ValueId, ValueInfo> values;
  bool operator==(const Trace&) const = default;
};

class MalformedTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FormatError : public std::runtime_error {
 public:
  FormatError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};
class NoSuchLocation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EmptySubtrace : public std::runtime_error {
 public:
  EmptySubtrace() : std::runtime_error("empty subtrace") {}
};

struct CounterState {
  std::uint64_t cE = 0, cO = 0, cH = 0;
  std::size_t depth = 0;
  bool operator==(const CounterState&) const = default;
};

struct Interpretation {
  std::uint64_t cE = 0, cO = 0, cH = 0;
  std::vector<CounterState> per_event;  // state after each event
  FlowCount counts() const { return {cE, cO, cH}; }
};

// Replays the trace with a tagged set and a stack of open pushes.
Interpretation interpret_trace(const Trace& t);

struct Edg {
  std::size_t nodes = 0;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<std::size_t>> succ, pred;
};

Edg build_edg(const Trace& t);

// A location given on the command line; without a column it matches the
// whole line.
struct LocPattern {
  std::string file;
  int line = 0;
  int column = 0;  // 0 = any
  static LocPattern parse(const std::string& s);
  bool matches(const Loc& l) const;
};

Trace source_to_sink_subtrace(const Edg& g, const Trace& t, const LocPattern& src,
                              const LocPattern& snk);
Trace source_to_sink_subtrace(const Edg& g, const Trace& t, const Loc& src, const Loc& snk);
// Event indices of the subtrace rather than a copy.
std::vector<std::size_t> subtrace_indices(const Edg& g, const Trace& t,
                                          const LocPattern& src, const LocPattern& snk);

enum class Classification { Direct, ExplicitOnly, ExplicitAndObservable, ObservableOnly, InvolvesHidden };
const char* classification_name(Classification c);

Classification classify_subtrace(const Trace& sub);

// True when some source-to-sink path in `sub` avoids push events.
bool has_explicit_path(const Trace& sub);

enum class Strategy { Taint, Observable, NSU, PU };
const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from(std::string_view s);

bool detectable_by(Classification c, Strategy s, bool explicit_path = false);

struct UniqueFlow {
  std::set<Loc> locations;
  Classification classification = Classification::Direct;
  std::size_t multiplicity = 0;
};
std::vector<UniqueFlow> unique_flows(const std::vector<Trace>& flows);

// One flow per (source or upgrade location, sink location) pair whose
// subtrace is non-empty.
struct PairFlow {
  Loc source, sink;
  std::vector<std::size_t> events;
  Trace subtrace;
  Classification classification = Classification::Direct;
  bool explicit_path = false;
};
std::vector<PairFlow> source_sink_flows(const Trace& t);

std::string write_trace(const Trace& t);
void write_trace(const Trace& t, const std::string& path);
Trace read_trace_text(const std::string& text);
Trace read_trace(const std::string& path);

}  // namespace nanoflow
