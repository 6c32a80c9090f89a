// Security labels and flow counts.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace nanoflow {

// P marks a partially leaked value (only produced under PU).
enum class Label { L, H, P };

constexpr bool sensitive(Label l) { return l != Label::L; }

// L is bottom; H absorbs P.
constexpr Label join(Label a, Label b) {
  if (a == Label::H || b == Label::H) return Label::H;
  if (a == Label::P || b == Label::P) return Label::P;
  return Label::L;
}

const char* label_name(Label l);
std::optional<Label> label_from(std::string_view s);

struct FlowCount {
  std::uint64_t expl = 0;
  std::uint64_t obs = 0;
  std::uint64_t hid = 0;

  bool zero() const { return expl == 0 && obs == 0 && hid == 0; }
  bool operator==(const FlowCount&) const = default;
  FlowCount& operator+=(const FlowCount& o) {
    expl += o.expl;
    obs += o.obs;
    hid += o.hid;
    return *this;
  }
  friend FlowCount operator+(FlowCount a, const FlowCount& b) { return a += b; }
  std::string str() const;
};

// The join of counts is addition.
inline FlowCount join(const FlowCount& a, const FlowCount& b) { return a + b; }

// a is below b unless b is zero while a is not.
inline bool leq(const FlowCount& a, const FlowCount& b) { return !b.zero() || a.zero(); }

// (De, Do, 0): De when an insensitive slot receives a sensitive value,
// Do when an insensitive slot is written under a sensitive stack.
inline FlowCount delta(Label old_label, Label new_label, bool stack_sensitive) {
  FlowCount d;
  d.expl = sensitive(new_label) && !sensitive(old_label) ? 1 : 0;
  d.obs = !sensitive(old_label) && stack_sensitive ? 1 : 0;
  return d;
}

}  // namespace nanoflow
