#pragma once

#include <string>

#include "nanoflow/corpus.h"
#include "nanoflow/monitor.h"

namespace testutil {

inline std::string corpus_dir() { return NANOFLOW_CORPUS_DIR; }
inline std::string corpus_file(const std::string& f) { return corpus_dir() + "/" + f; }

inline nanoflow::StmtPtr load(const std::string& file) {
  return nanoflow::parse(nanoflow::read_file(corpus_file(file)), file);
}

inline nanoflow::RunResult run_with(const nanoflow::StmtPtr& p, const nanoflow::State& s,
                                    nanoflow::Strategy st, nanoflow::Mode m,
                                    const nanoflow::Policy& pol = {},
                                    const nanoflow::UpgradePlan* plan = nullptr) {
  nanoflow::RunOptions o;
  o.cfg = {st, m};
  o.plan = plan;
  return nanoflow::run(p, s, pol, o);
}

inline nanoflow::FlowCount fc(std::uint64_t e, std::uint64_t o, std::uint64_t h) {
  return nanoflow::FlowCount{e, o, h};
}

// One corpus entry by name.
inline nanoflow::CorpusProgram corpus_entry(const std::string& name) {
  for (auto& p : nanoflow::load_corpus(corpus_dir()))
    if (p.name == name) return p;
  throw std::runtime_error("no corpus entry " + name);
}

inline const nanoflow::State& test_state(const nanoflow::CorpusProgram& p, const std::string& t) {
  for (auto& c : p.tests)
    if (c.name == t) return c.state;
  throw std::runtime_error("no test " + t);
}

}  // namespace testutil
