// The in-repo example corpus: programs, their policies and test inputs.
#pragma once

#include <string>
#include <vector>

#include "nanoflow/io.h"

namespace nanoflow {

struct CorpusProgram {
  std::string name;
  std::string path;
  StmtPtr program;
  Policy policy;
  std::vector<TestCase> tests;  // policy env merged under each test env
  nlohmann::json expect;        // as written in the manifest, may be null
};

// Reads <dir>/manifest.json and parses every listed program.
std::vector<CorpusProgram> load_corpus(const std::string& dir);

std::vector<State> test_states(const CorpusProgram& p);

}  // namespace nanoflow
