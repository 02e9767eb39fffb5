#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmln/logic.hpp"

namespace qmln {

// All ground atoms of a KB in a fixed order: predicates sorted by name, then
// the argument tuple in domain-declaration order (last position fastest).
struct GroundAtomTable {
  struct Entry {
    std::string predicate;
    std::vector<std::string> args;
  };

  std::vector<Entry> atoms;
  std::unordered_map<std::string, int> index;  // rendered name -> position

  int size() const { return static_cast<int>(atoms.size()); }
  std::string name(int i) const;
  // -1 when the atom is unknown.
  int find(const std::string& predicate, const std::vector<std::string>& args) const;
};

std::string ground_atom_name(const std::string& predicate,
                             const std::vector<std::string>& args);

// Truth assignment to every ground atom.
struct World {
  std::vector<std::uint8_t> bits;

  explicit World(int n = 0) : bits(n, 0) {}
  int size() const { return static_cast<int>(bits.size()); }
  bool get(int i) const { return bits[i] != 0; }
  void set(int i, bool v) { bits[i] = v ? 1 : 0; }
  bool operator==(const World&) const = default;
};

// One formula grounding. sat_table has 2^|support| entries; bit i of the
// assignment index corresponds to support position i, least significant
// first. Duplicate atoms within a grounding are collapsed into one entry.
struct Clique {
  int formula_id = 0;
  std::vector<int> support;
  double weight = 0.0;
  std::vector<std::uint8_t> sat_table;

  int table_index(const World& w) const {
    int idx = 0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      idx |= (w.get(support[i]) ? 1 : 0) << i;
    }
    return idx;
  }
  bool satisfied(const World& w) const { return sat_table[table_index(w)] != 0; }
};

struct GroundNetwork {
  GroundAtomTable atom_table;
  std::vector<Clique> cliques;
  std::vector<double> formula_weights;
  // Additive log-space constant accumulated by evidence reduction; the
  // network represents exp(log_offset) * product of clique factors.
  double log_offset = 0.0;

  int num_atoms() const { return atom_table.size(); }
  // Sum over cliques of w * [satisfied], i.e. sum_j w_j N(f_j, w).
  double log_weight(const World& w) const {
    double s = 0.0;
    for (const auto& c : cliques) s += c.satisfied(w) ? c.weight : 0.0;
    return s;
  }
};

struct NetworkStats {
  long num_nodes = 0;
  int max_clique_size = 0;
  int max_degree = 0;
  long num_cliques = 0;
};

struct GroundLimits {
  long max_atoms = 1L << 20;
};

// Builds the atom table alone (all groundings of all declared predicates).
GroundAtomTable build_atom_table(const KnowledgeBase& kb, const GroundLimits& limits = {});

// Grounds each formula over all bindings of its free variables. One clique
// per binding; deterministic order (formulas in KB order, bindings in
// odometer order over each variable's domain).
GroundNetwork ground(const KnowledgeBase& kb, const GroundLimits& limits = {});

// Boolean value of a formula under a total variable binding and a world.
// Throws ModelError on unbound variables or atoms missing from the table.
bool evaluate_ground_formula(const Formula& formula, const Binding& binding,
                             const World& world, const GroundAtomTable& table);

// N(f_j, w): number of bindings under which formula_id is true in `world`.
// Counts by direct binding enumeration, independently of the clique tables.
long count_true_groundings(const KnowledgeBase& kb, const GroundAtomTable& table,
                           int formula_id, const World& world);

NetworkStats network_stats(const GroundNetwork& net);

}  // namespace qmln
