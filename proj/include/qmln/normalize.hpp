#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qmln/logic.hpp"

namespace qmln {

struct NormalizationReport {
  // original domain -> subdomain names (only domains that were split)
  std::map<std::string, std::vector<std::string>> domain_splits;
  // original predicate -> specialized predicate names (only split predicates)
  std::map<std::string, std::vector<std::string>> predicate_splits;
  // number of formulas in the output
  int formula_expansion_count = 0;

  bool empty() const { return domain_splits.empty() && predicate_splits.empty(); }
};

// Normal form: (i) no constants in any formula; (ii) at every argument
// position of every predicate, all variables placed there share one domain.
bool is_normal(const KnowledgeBase& kb);

// Shatters constants mentioned in formulas into singleton subdomains,
// specializes predicates over subdomain combinations, and expands formulas.
// The output satisfies is_normal and defines the same distribution over
// ground atoms (under the induced atom bijection).
std::pair<KnowledgeBase, NormalizationReport> to_normal_form(const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Shared shattering machinery (also used by the lifted engine's conditioning).
// ---------------------------------------------------------------------------

struct DomainPartition {
  std::string domain;             // original domain name
  std::vector<DomainDecl> parts;  // named parts, ordered; must partition the constants
};

struct ShatterResult {
  KnowledgeBase kb;
  std::map<std::string, std::vector<std::string>> domain_parts;
  // original predicate -> (per-argument domain names, specialized name), in
  // combination order. Unsplit predicates map to a single entry with their
  // original name.
  std::map<std::string, std::vector<std::pair<std::vector<std::string>, std::string>>>
      predicate_variants;
  int formula_copies = 0;
};

// Splits the given domains into the given parts throughout the KB. Constants
// appearing in formulas are resolved to the part containing them and replaced
// by fresh variables over that part (parts containing formula constants must
// be singletons for the result to be normal).
ShatterResult shatter(const KnowledgeBase& kb, const std::vector<DomainPartition>& partitions);

// Deterministic name not present in `taken`; inserts the result.
std::string unique_name(const std::string& base, std::set<std::string>& taken);

}  // namespace qmln
