// Label creep, sensitive branch coverage and permissiveness.
#pragma once

#include <map>
#include <set>
#include <vector>

#include "nanoflow/monitor.h"

namespace nanoflow {

enum class LcrMode { Events, Locations };

struct LcrPoint {
  std::size_t index = 0;  // 1-based assignment number
  std::uint64_t num = 0, den = 0;
  double ratio() const { return den ? double(num) / double(den) : 0.0; }
};

std::vector<LcrPoint> lcr_series(const std::vector<AssignRecord>& log,
                                 LcrMode mode = LcrMode::Events);

struct BranchCoverage {
  bool true_covered = false;
  bool false_covered = false;
};

struct SbcReport {
  std::map<Loc, BranchCoverage> conditionals;  // sensitive ones only
  std::uint64_t both = 0;
  double ratio() const {
    return conditionals.empty() ? 1.0 : double(both) / double(conditionals.size());
  }
};

SbcReport sbc(const std::vector<std::vector<BranchRecord>>& logs);

struct PermissivenessReport {
  std::set<Loc> nsu_stop_locs;
  std::set<Loc> pu_stop_locs;
};

PermissivenessReport permissiveness(const StmtPtr& program, const std::vector<State>& tests,
                                    const Policy& policy, std::uint64_t budget = 1'000'000,
                                    int max_iterations = 100);

}  // namespace nanoflow
