// Explicit and observable secrecy: run extraction, a brute-force
// noninterference oracle, and a random-program check of both soundness
// theorems.
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nanoflow/monitor.h"

namespace nanoflow {

struct ExtractedProgram {
  StmtPtr body;
};

// A statement with one hole, kept as frames from the outside in.
class EvalContext {
 public:
  struct Frame {
    enum class Kind { Seq, IfThen, IfElse };
    Kind kind;
    StmtPtr stmt;  // Seq: the prefix; If*: the original conditional
  };

  // cxt[c; hole]
  void then_stmt(const StmtPtr& c);
  // cxt[if g then hole else skip] or the symmetric form
  void enter_branch(const StmtPtr& if_stmt, bool taken);
  // Closes the innermost open branch and moves the hole after it.
  void leave_branch();
  StmtPtr plug(const StmtPtr& c) const;
  const std::vector<Frame>& frames() const { return frames_; }

 private:
  std::vector<Frame> frames_;
};

ExtractedProgram extract_explicit(const StmtPtr& program, const State& init,
                                  const Policy& policy, std::uint64_t budget = 1'000'000);
ExtractedProgram extract_observable(const StmtPtr& program, const State& init,
                                    const Policy& policy, std::uint64_t budget = 1'000'000);

struct LowDomain {
  std::vector<bool> bools{true, false};
  std::vector<std::int64_t> ints{0, 1, 2};
  std::vector<std::string> strings{"", "a", "b"};
  std::size_t max_variants = 4096;

  std::vector<BaseValue> choices_for(const BaseValue& b) const;
};

bool low_equivalent(const State& a, const State& b);

struct Verdict {
  enum class Kind { Holds, Fails, Undecided };
  Kind kind = Kind::Holds;
  std::optional<State> counterexample;
  std::string reason;
  std::size_t variants = 0;
};
const char* verdict_name(Verdict::Kind k);

// Names whose payloads the oracle varies: initially sensitive bindings,
// policy sources and every markSrc target bound at the start.
std::vector<std::string> sensitive_names(const StmtPtr& program, const State& init,
                                         const Policy& policy);

Verdict check_noninterference(const StmtPtr& program, const State& init, const Policy& policy,
                              const LowDomain& domain = {}, std::uint64_t budget = 1'000'000,
                              const std::vector<std::string>& vary = {});
Verdict check_explicit_secrecy(const StmtPtr& program, const State& init, const Policy& policy,
                               const LowDomain& domain = {}, std::uint64_t budget = 1'000'000);
Verdict check_observable_secrecy(const StmtPtr& program, const State& init,
                                 const Policy& policy, const LowDomain& domain = {},
                                 std::uint64_t budget = 1'000'000);

struct GeneratedCase {
  std::string source;
  StmtPtr program;
  State init;
  Policy policy;
};

// Small terminating programs: at most 8 statements, nesting depth 2, loops
// bounded by literal counters of at most 3, one or two secret inputs.
GeneratedCase generate_case(std::mt19937_64& rng);

struct TheoremFailure {
  int theorem = 0;  // 1 explicit, 2 observable
  std::string source;
  std::string init;
};

struct TheoremReport {
  std::size_t cases = 0;
  std::size_t explicit_checked = 0;
  std::size_t observable_checked = 0;
  std::size_t undecided = 0;
  std::size_t run_errors = 0;
  std::vector<TheoremFailure> failures;
};

TheoremReport theorem_suite(std::size_t n, std::uint64_t seed, const LowDomain& domain = {},
                            std::uint64_t budget = 100'000);

}  // namespace nanoflow
