#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmln/exact.hpp"
#include "qmln/ground.hpp"
#include "qmln/lifted.hpp"
#include "qmln/logic.hpp"
#include "qmln/mcmc.hpp"

namespace qmln {

using Json = nlohmann::ordered_json;

// One machine-readable document per CLI invocation. Values are deterministic
// for fixed inputs and seeds; timing is only attached on request since it
// varies between runs.
struct RunReport {
  int schema_version = 1;
  std::string command;
  std::string kb_digest;
  Json config = Json::object();
  Json stats;                    // null unless computed
  Json results = Json::object();
  Json timing_ms;                // null unless --timing

  Json to_json() const;
};

// Serializes with floating-point numbers at 17 significant digits and keys in
// insertion order. Non-finite numbers become null.
std::string dump_json(const Json& value, int indent = 2);

// FNV-1a 64-bit content hash, hex encoded.
std::string content_digest(const std::string& bytes);

// Evidence file format, one assignment per line:
//   Pred(C1,...,Ck) = true|false
// with // comments. Atoms must be ground and declared; conflicting duplicate
// lines are an error.
Evidence parse_evidence_file(const std::string& text, const KnowledgeBase& kb,
                             const GroundAtomTable& table);

struct CompareOptions {
  SamplerConfig mcmc;
  LiftConfig lift;
  ExactLimits limits;
  double epsilon = 0.01;
  double kappa = 2.0;
  std::vector<int> query_atoms;  // empty: all free atoms
};

// Runs the exact, AIS, lifted(exact base) and thermal engines on the same KB
// and reports per-method log Z plus pairwise deviations; with evidence, also
// conditional marginals from the oracle, Gibbs chains, and the
// evidence-reduced thermal route.
Json compare_engines(const KnowledgeBase& kb, const Evidence& evidence,
                     const GroundNetwork& net, const CompareOptions& options);

// Entry point used by the CLI binary. Returns the process exit code:
// 0 success, 1 usage error, 2 model error, 3 resource limit.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qmln
