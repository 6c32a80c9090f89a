// Test-driven inference of upgrade statements.
#pragma once

#include <stdexcept>
#include <vector>

#include "nanoflow/monitor.h"

namespace nanoflow {

class RoundLimitExceeded : public std::runtime_error {
 public:
  explicit RoundLimitExceeded(int rounds)
      : std::runtime_error("no fixpoint within " + std::to_string(rounds) + " rounds"),
        rounds_(rounds) {}
  int rounds() const { return rounds_; }

 private:
  int rounds_;
};

struct InferenceOptions {
  int max_rounds = 0;  // 0: number of assignment statements + 1
  std::uint64_t budget = 1'000'000;
};

struct InferenceResult {
  UpgradePlan plan;
  int rounds = 0;
};

// Runs every test under PU/Enforce; each PUUse(x) stop at l adds upgrade(x)
// before the statement at l and restarts, until one full clean pass.
InferenceResult infer_upgrades(const StmtPtr& program, const std::vector<State>& tests,
                               const Policy& policy, const InferenceOptions& opts = {},
                               const UpgradePlan& start = {});

bool verify_fixpoint(const StmtPtr& program, const UpgradePlan& plan,
                     const std::vector<State>& tests, const Policy& policy,
                     const InferenceOptions& opts = {});

// Source-level view of a plan: upgrades written out before their statements.
// A while gets its upgrades before the loop and at the end of its body.
StmtPtr apply_plan(const StmtPtr& program, const UpgradePlan& plan);

}  // namespace nanoflow
