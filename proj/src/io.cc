#include "nanoflow/io.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nanoflow {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

static json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

static BaseValue base_from_json(const json& j, const std::string& what) {
  if (j.is_null()) return Null{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw ConfigError(what + ": unsupported value " + j.dump());
}

static Value value_from_json(const json& j, Label l, Heap& heap, Addr& next,
                             const std::string& what) {
  if (!j.is_object()) return Value::of(base_from_json(j, what), l);
  Addr a = ++next;
  heap[a];
  for (auto& [k, v] : j.items()) {
    Value fv = value_from_json(v, l, heap, next, what + "." + k);
    heap[a][k] = fv;
  }
  return Value::ref(a, l);
}

State state_from_json(const json& env) {
  State s;
  if (env.is_null()) return s;
  if (!env.is_object()) throw ConfigError("env must be an object");
  Addr next = 0;
  for (auto& [name, spec] : env.items()) {
    json value = spec;
    Label l = Label::L;
    if (spec.is_object() && spec.contains("value")) {
      value = spec["value"];
      if (spec.contains("label")) {
        auto lb = label_from(spec["label"].get<std::string>());
        if (!lb || *lb == Label::P) throw ConfigError(name + ": label must be L or H");
        l = *lb;
      }
    }
    s.env[name] = value_from_json(value, l, s.heap, next, name);
  }
  return s;
}

static json value_to_json(const State& s, const Value& v) {
  if (!v.is_addr()) {
    return std::visit(
        [](const auto& b) -> json {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, Null>) return nullptr;
          else return b;
        },
        v.base);
  }
  json o = json::object();
  for (auto& [f, fv] : s.heap.at(*v.addr)) o[f] = value_to_json(s, fv);
  return o;
}

json state_to_json(const State& s) {
  json env = json::object();
  for (auto& [name, v] : s.env)
    env[name] = {{"value", value_to_json(s, v)}, {"label", label_name(v.label)}};
  return env;
}

State merge_env(const json& base, const json& over) {
  json env = base.is_object() ? base : json::object();
  if (over.is_object())
    for (auto& [k, v] : over.items()) env[k] = v;
  return state_from_json(env);
}

TestCase test_case_from_json(const json& j, const std::string& name) {
  if (!j.is_object()) throw ConfigError(name + ": test case must be an object");
  TestCase t;
  t.name = name;
  t.env = j.contains("env") ? j["env"] : json::object();
  t.state = state_from_json(t.env);
  return t;
}

TestCase load_test_case(const std::string& path) {
  return test_case_from_json(parse_json_file(path),
                             std::filesystem::path(path).stem().string());
}

std::vector<TestCase> load_tests(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError(dir + " is not a directory");
  std::vector<fs::path> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TestCase> out;
  for (auto& f : files) out.push_back(load_test_case(f.string()));
  return out;
}

PolicyFile policy_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("policy must be a JSON object");
  PolicyFile p;
  if (j.contains("sources")) {
    for (auto& s : j["sources"]) {
      if (!s.is_string()) throw ConfigError("policy sources must be names");
      p.policy.sources.push_back(s.get<std::string>());
    }
  }
  if (j.contains("env")) {
    p.env = j["env"];
    p.init = state_from_json(p.env);
  }
  if (j.contains("strategy")) {
    p.strategy = strategy_from(j["strategy"].get<std::string>());
    if (!p.strategy) throw ConfigError("unknown strategy " + j["strategy"].dump());
  }
  if (j.contains("mode")) {
    p.mode = mode_from(j["mode"].get<std::string>());
    if (!p.mode) throw ConfigError("unknown mode " + j["mode"].dump());
  }
  return p;
}

PolicyFile load_policy(const std::string& path) {
  try {
    return policy_from_json(parse_json_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

UpgradePlan plan_from_json(const json& j) {
  UpgradePlan p;
  if (!j.is_object() || !j.contains("insertions") || !j["insertions"].is_array())
    throw ConfigError("plan needs an \"insertions\" array");
  for (auto& ins : j["insertions"]) {
    try {
      p.insertions.insert({Loc::parse(ins.at("loc").get<std::string>()), ins.at("var").get<std::string>()});
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad insertion: ") + e.what());
    }
  }
  return p;
}

ojson plan_to_json(const UpgradePlan& p) {
  ojson arr = ojson::array();
  for (auto& [loc, var] : p.insertions) {
    ojson i;
    i["loc"] = loc.str();
    i["var"] = var;
    arr.push_back(i);
  }
  ojson j;
  j["insertions"] = arr;
  return j;
}

UpgradePlan load_plan(const std::string& path) { return plan_from_json(parse_json_file(path)); }

ojson counts_json(const FlowCount& c) {
  ojson j;
  j["explicit"] = c.expl;
  j["observable"] = c.obs;
  j["hidden"] = c.hid;
  return j;
}

ojson observation_json(const Observation& o) {
  ojson arr = ojson::array();
  for (auto& [b, path] : o) {
    ojson e;
    e["value"] = render(b);
    e["path"] = path;
    arr.push_back(e);
  }
  return arr;
}

}  // namespace nanoflow
