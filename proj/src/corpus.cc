#include "nanoflow/corpus.h"

#include <filesystem>

namespace nanoflow {

using nlohmann::json;

std::vector<CorpusProgram> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  json m;
  std::string mpath = (fs::path(dir) / "manifest.json").string();
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw ConfigError(mpath + ": " + e.what());
  }
  std::vector<CorpusProgram> out;
  for (auto& e : m.at("programs")) {
    CorpusProgram p;
    p.name = e.at("name").get<std::string>();
    p.path = (fs::path(dir) / e.at("file").get<std::string>()).string();
    p.program = parse(read_file(p.path), e.at("file").get<std::string>());
    PolicyFile pf = policy_from_json(e.value("policy", json::object()));
    p.policy = pf.policy;
    json tests = e.value("tests", json::object());
    for (auto& [name, env] : tests.items()) {
      TestCase t;
      t.name = name;
      t.env = env;
      t.state = merge_env(pf.env, env);
      p.tests.push_back(std::move(t));
    }
    if (p.tests.empty()) {
      TestCase t;
      t.name = "default";
      t.env = pf.env;
      t.state = pf.init;
      p.tests.push_back(std::move(t));
    }
    p.expect = e.value("expect", json());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<State> test_states(const CorpusProgram& p) {
  std::vector<State> s;
  for (auto& t : p.tests) s.push_back(t.state);
  return s;
}

}  // namespace nanoflow
