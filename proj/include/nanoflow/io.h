// JSON files: policies, test cases and upgrade plans.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nanoflow/monitor.h"

namespace nanoflow {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TestCase {
  std::string name;
  State state;
  nlohmann::json env;
};

// {"x": {"value": 5, "label": "H"}, ...}; object values become heap objects.
State state_from_json(const nlohmann::json& env);
nlohmann::json state_to_json(const State& s);

// Bindings of `over` replace those of `base` name by name.
State merge_env(const nlohmann::json& base, const nlohmann::json& over);

TestCase test_case_from_json(const nlohmann::json& j, const std::string& name = "");
TestCase load_test_case(const std::string& path);
// Every *.json in `dir`, sorted by file name.
std::vector<TestCase> load_tests(const std::string& dir);

struct PolicyFile {
  Policy policy;
  State init;
  nlohmann::json env = nlohmann::json::object();
  std::optional<Strategy> strategy;
  std::optional<Mode> mode;
};

// {"sources": [...], "env": {...}, "strategy": "pu", "mode": "measure"}
PolicyFile policy_from_json(const nlohmann::json& j);
PolicyFile load_policy(const std::string& path);

UpgradePlan plan_from_json(const nlohmann::json& j);
nlohmann::ordered_json plan_to_json(const UpgradePlan& p);
UpgradePlan load_plan(const std::string& path);

std::string read_file(const std::string& path);

nlohmann::ordered_json counts_json(const FlowCount& c);
nlohmann::ordered_json observation_json(const Observation& o);

}  // namespace nanoflow
