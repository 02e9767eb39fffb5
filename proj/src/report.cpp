#include "qmln/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qmln/errors.hpp"
#include "qmln/normalize.hpp"
#include "qmln/numeric.hpp"
#include "qmln/thermal.hpp"

namespace qmln {

// ---------------------------------------------------------------------------
// JSON serialization with fixed floating-point formatting
// ---------------------------------------------------------------------------

namespace {

void escape_string(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void dump_value(const Json& v, int indent, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
  const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  switch (v.type()) {
    case Json::value_t::null:
      out += "null";
      break;
    case Json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      break;
    case Json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case Json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      break;
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        out += buf;
      }
      break;
    }
    case Json::value_t::string:
      escape_string(v.get<std::string>(), out);
      break;
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        out += pad_in;
        dump_value(v[i], indent, depth + 1, out);
        if (i + 1 < v.size()) out += ',';
        out += '\n';
      }
      out += pad + "]";
      break;
    }
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = v.begin(); it != v.end(); ++it, ++i) {
        out += pad_in;
        escape_string(it.key(), out);
        out += ": ";
        dump_value(it.value(), indent, depth + 1, out);
        if (i + 1 < v.size()) out += ',';
        out += '\n';
      }
      out += pad + "}";
      break;
    }
    default:
      out += "null";
  }
}

}  // namespace

std::string dump_json(const Json& value, int indent) {
  std::string out;
  dump_value(value, indent, 0, out);
  out += '\n';
  return out;
}

std::string content_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json RunReport::to_json() const {
  Json j = Json::object();
  j["schema_version"] = schema_version;
  j["command"] = command;
  j["kb_digest"] = kb_digest;
  j["config"] = config;
  if (!stats.is_null()) j["stats"] = stats;
  j["results"] = results;
  if (!timing_ms.is_null()) j["timing_ms"] = timing_ms;
  return j;
}

// ---------------------------------------------------------------------------
// Evidence files
// ---------------------------------------------------------------------------

Evidence parse_evidence_file(const std::string& text, const KnowledgeBase& kb,
                             const GroundAtomTable& table) {
  Evidence evidence;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find("//"); pos != std::string::npos) line.erase(pos);
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    std::string trimmed;
    for (char c : line) {
      if (!is_space(c)) trimmed += c;
    }
    if (trimmed.empty()) continue;

    const auto eq = trimmed.find('=');
    const auto open = trimmed.find('(');
    const auto close = trimmed.find(')');
    if (eq == std::string::npos || open == std::string::npos || close == std::string::npos ||
        open > close || close > eq) {
      throw ParseError("expected 'Pred(C1,...) = true|false'", lineno, 1);
    }
    const std::string pred_name = trimmed.substr(0, open);
    const std::string arg_text = trimmed.substr(open + 1, close - open - 1);
    const std::string value_text = trimmed.substr(eq + 1);

    bool value;
    if (value_text == "true" || value_text == "True" || value_text == "TRUE") {
      value = true;
    } else if (value_text == "false" || value_text == "False" || value_text == "FALSE") {
      value = false;
    } else {
      throw ParseError("expected true or false, got '" + value_text + "'", lineno, 1);
    }

    const PredicateDecl* pred = kb.find_predicate(pred_name);
    if (!pred) throw ParseError("unknown predicate " + pred_name, lineno, 1);

    std::vector<std::string> args;
    std::string arg;
    std::istringstream argin(arg_text);
    while (std::getline(argin, arg, ',')) args.push_back(arg);
    if (static_cast<int>(args.size()) != pred->arity()) {
      throw ParseError("arity mismatch for predicate " + pred_name, lineno, 1);
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      const DomainDecl* dom = kb.find_domain(pred->argument_domains[i]);
      if (std::find(dom->constants.begin(), dom->constants.end(), args[i]) !=
          dom->constants.end()) {
        continue;
      }
      bool constant_elsewhere = false;
      for (const auto& d : kb.domains) {
        if (std::find(d.constants.begin(), d.constants.end(), args[i]) != d.constants.end()) {
          constant_elsewhere = true;
          break;
        }
      }
      if (constant_elsewhere) {
        throw ParseError("constant " + args[i] + " is not in domain " +
                             pred->argument_domains[i],
                         lineno, 1);
      }
      throw ParseError("evidence must be ground: '" + args[i] + "' is not a constant of domain " +
                           pred->argument_domains[i],
                       lineno, 1);
    }
    const int idx = table.find(pred_name, args);
    if (idx < 0) throw ParseError("atom not in the ground atom table", lineno, 1);
    auto [it, inserted] = evidence.assignments.emplace(idx, value);
    if (!inserted && it->second != value) {
      throw ParseError("conflicting evidence for " + ground_atom_name(pred_name, args), lineno,
                       1);
    }
  }
  return evidence;
}

// ---------------------------------------------------------------------------
// Engine comparison
// ---------------------------------------------------------------------------

namespace {

Json lift_step_json(const LiftStep& step) {
  Json j = Json::object();
  j["rule"] = step.rule;
  j["target"] = step.target;
  if (step.rule == "decomposer") {
    j["exponent"] = step.exponent;
  } else if (step.rule == "free_atoms" || step.rule == "isolated") {
    j["multiplier"] = step.multiplier;
  }
  if (step.leaf) {
    j["log_z"] = step.leaf->log_z;
    if (step.leaf->std_error) j["std_error"] = *step.leaf->std_error;
  }
  if (!step.branches.empty()) {
    Json branches = Json::array();
    for (const auto& [mult, child] : step.branches) {
      Json b = Json::object();
      b["multiplier"] = mult;
      b["step"] = lift_step_json(*child);
      branches.push_back(b);
    }
    j["branches"] = branches;
  }
  return j;
}

Json estimate_json(const PartitionEstimate& est) {
  Json j = Json::object();
  j["log_z"] = est.log_z;
  j["method"] = method_name(est.method);
  if (est.std_error) j["std_error"] = *est.std_error;
  if (!est.diagnostics.empty()) {
    Json d = Json::object();
    for (const auto& [k, v] : est.diagnostics) d[k] = v;
    j["diagnostics"] = d;
  }
  return j;
}

Json marginals_json(const GroundAtomTable& table, const std::map<int, double>& marginals) {
  Json j = Json::object();
  for (const auto& [atom, p] : marginals) j[table.name(atom)] = p;
  return j;
}

std::vector<int> free_atoms(const GroundNetwork& net, const Evidence& evidence) {
  std::vector<int> out;
  for (int a = 0; a < net.num_atoms(); ++a) {
    if (!evidence.assignments.count(a)) out.push_back(a);
  }
  return out;
}

}  // namespace

Json compare_engines(const KnowledgeBase& kb, const Evidence& evidence,
                     const GroundNetwork& net, const CompareOptions& options) {
  Json out = Json::object();

  const PartitionEstimate exact = log_partition_exact(net, options.limits);
  PartitionEstimate ais = estimate_log_z_ais(net, options.mcmc);
  ExactBaseSampler exact_base(options.limits);
  KnowledgeBase normal_kb = kb;
  if (!is_normal(normal_kb)) normal_kb = to_normal_form(kb).first;
  auto [lifted, trace] = lifted_log_z(normal_kb, exact_base, options.lift);
  DiagonalHamiltonian h = build_hamiltonian(net);
  PartitionEstimate thermal = thermal_distribution(h, options.limits).log_z;
  thermal.log_z += net.log_offset;

  Json log_z = Json::object();
  log_z["exact"] = estimate_json(exact);
  log_z["ais"] = estimate_json(ais);
  log_z["lifted"] = estimate_json(lifted);
  log_z["thermal"] = estimate_json(thermal);
  out["log_z"] = log_z;

  Json dev = Json::object();
  dev["lifted_vs_exact"] = std::abs(lifted.log_z - exact.log_z);
  dev["thermal_vs_exact"] = std::abs(thermal.log_z - exact.log_z);
  dev["ais_vs_exact"] = std::abs(ais.log_z - exact.log_z);
  dev["ais_std_errors_off"] = ais.std_error && *ais.std_error > 0.0
                                  ? std::abs(ais.log_z - exact.log_z) / *ais.std_error
                                  : 0.0;
  out["log_z_deviation"] = dev;

  ComplexityReport bound =
      complexity_bound(net.num_atoms(), 2, h.beta, exact.log_z, options.epsilon, options.kappa);
  Json cj = Json::object();
  cj["bound_value"] = bound.bound_value;
  cj["classical_reference"] = bound.classical_reference;
  cj["epsilon"] = bound.epsilon;
  cj["kappa"] = bound.kappa;
  cj["note"] = "upper-bound shape, constants unspecified";
  out["complexity"] = cj;

  // Conditional marginals: oracle, Gibbs chains, and evidence-reduced thermal.
  std::vector<int> queries = options.query_atoms;
  if (queries.empty()) queries = free_atoms(net, evidence);
  if (!queries.empty()) {
    std::map<int, double> oracle;
    for (int q : queries) oracle[q] = query_marginal_exact(net, q, evidence, options.limits);

    std::vector<World> samples = run_chains(net, evidence, options.mcmc);
    MarginalEstimate mcmc = estimate_marginals(samples, queries);

    GroundNetwork reduced = reduce_by_evidence(net, evidence);
    DiagonalHamiltonian hr = build_hamiltonian(reduced);
    ThermalDistribution dist = thermal_distribution(hr, options.limits);
    std::map<int, double> thermal_marginals;
    for (int q : queries) {
      const int rq = reduced.atom_table.find(net.atom_table.atoms[q].predicate,
                                             net.atom_table.atoms[q].args);
      double p = 0.0;
      for (std::size_t w = 0; w < dist.probabilities.size(); ++w) {
        if ((w >> rq) & 1) p += dist.probabilities[w];
      }
      thermal_marginals[q] = p;
    }

    Json marg = Json::object();
    marg["exact"] = marginals_json(net.atom_table, oracle);
    marg["mcmc"] = marginals_json(net.atom_table, mcmc.mean);
    marg["thermal_reduced"] = marginals_json(net.atom_table, thermal_marginals);
    double mcmc_dev = 0.0, thermal_dev = 0.0;
    for (int q : queries) {
      mcmc_dev = std::max(mcmc_dev, std::abs(mcmc.mean[q] - oracle[q]));
      thermal_dev = std::max(thermal_dev, std::abs(thermal_marginals[q] - oracle[q]));
    }
    Json mdev = Json::object();
    mdev["mcmc_vs_exact_max"] = mcmc_dev;
    mdev["thermal_reduced_vs_exact_max"] = thermal_dev;
    marg["deviation"] = mdev;
    out["marginals"] = marg;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonOptions {
  std::string kb_path;
  std::string evidence_path;
  std::vector<std::string> queries;
  int limit = 24;
  long max_atoms = 1L << 20;
  bool timing = false;
};

struct LoadedModel {
  std::string kb_text;
  KnowledgeBase kb;
  GroundNetwork net;
  Evidence evidence;
};

LoadedModel load_model(const CommonOptions& common, bool need_network = true) {
  LoadedModel m;
  m.kb_text = read_file(common.kb_path);
  m.kb = parse_kb(m.kb_text);
  if (need_network) {
    m.net = ground(m.kb, GroundLimits{common.max_atoms});
    if (!common.evidence_path.empty()) {
      m.evidence = parse_evidence_file(read_file(common.evidence_path), m.kb, m.net.atom_table);
    }
  }
  return m;
}

std::vector<int> resolve_queries(const LoadedModel& m, const CommonOptions& common) {
  std::vector<int> out;
  if (common.queries.empty()) {
    for (int a = 0; a < m.net.num_atoms(); ++a) {
      if (!m.evidence.assignments.count(a)) out.push_back(a);
    }
    return out;
  }
  for (const auto& q : common.queries) {
    auto it = m.net.atom_table.index.find(q);
    if (it == m.net.atom_table.index.end()) {
      throw ModelError("unknown query atom " + q + " (use the form Pred(C1,...))");
    }
    out.push_back(it->second);
  }
  return out;
}

Json stats_json(const NetworkStats& s) {
  Json j = Json::object();
  j["num_nodes"] = s.num_nodes;
  j["max_clique_size"] = s.max_clique_size;
  j["max_degree"] = s.max_degree;
  j["num_cliques"] = s.num_cliques;
  return j;
}

void add_common(CLI::App* cmd, CommonOptions& common, bool with_evidence = true) {
  cmd->add_option("--kb", common.kb_path, "knowledge base file")->required();
  if (with_evidence) {
    cmd->add_option("--evidence", common.evidence_path, "evidence file");
    cmd->add_option("--query", common.queries,
                    "query atom Pred(C1,...); repeatable; default: all free atoms");
  }
  cmd->add_option("--limit", common.limit, "exact enumeration limit (atoms)");
  cmd->add_option("--max-atoms", common.max_atoms, "ground atom limit");
  cmd->add_flag("--timing", common.timing, "attach wall-clock timings to the report");
}

class PhaseTimer {
 public:
  explicit PhaseTimer(bool enabled) : enabled_(enabled) { last_ = clock::now(); }
  void mark(const std::string& phase) {
    if (!enabled_) return;
    auto now = clock::now();
    timings_[phase] =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(now - last_)
            .count();
    last_ = now;
  }
  Json json() const {
    if (!enabled_) return Json();
    Json j = Json::object();
    for (const auto& [k, v] : timings_) j[k] = v;
    return j;
  }

 private:
  using clock = std::chrono::steady_clock;
  bool enabled_;
  clock::time_point last_;
  std::map<std::string, double> timings_;
};

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qmln: Markov logic network inference engines"};
  app.require_subcommand(1);

  CommonOptions common;
  SamplerConfig sampler;
  LiftConfig lift;
  std::string lifted_base = "exact";
  bool emit_trace = false;
  bool enable_isolated = false;
  double clamp_gamma = 0.0;
  bool reduce_mode = false;
  long sample_count = 0;
  std::uint64_t sample_seed = 1;
  double epsilon = 0.01;
  double kappa = 2.0;

  auto* validate_cmd = app.add_subcommand("validate", "parse and summarize a knowledge base");
  add_common(validate_cmd, common, false);

  auto* normalize_cmd = app.add_subcommand("normalize", "convert to normal form");
  add_common(normalize_cmd, common, false);

  auto* ground_cmd = app.add_subcommand("ground", "dump the ground network");
  add_common(ground_cmd, common, false);

  auto* stats_cmd = app.add_subcommand("stats", "ground network statistics");
  add_common(stats_cmd, common, false);

  auto* exact_cmd = app.add_subcommand("exact", "exact log Z and marginals by enumeration");
  add_common(exact_cmd, common);

  auto* mcmc_cmd = app.add_subcommand("mcmc", "Gibbs-chain marginals and AIS log Z");
  add_common(mcmc_cmd, common);
  mcmc_cmd->add_option("--seed", sampler.seed, "master seed");
  mcmc_cmd->add_option("--burnin", sampler.burn_in, "burn-in sweeps");
  mcmc_cmd->add_option("--samples", sampler.samples, "samples per chain");
  mcmc_cmd->add_option("--thin", sampler.thinning, "sweeps between samples");
  mcmc_cmd->add_option("--chains", sampler.chains, "number of chains");
  mcmc_cmd->add_option("--ladder", sampler.ais_ladder, "AIS ladder steps");
  bool geometric = false;
  mcmc_cmd->add_flag("--geometric-ladder", geometric, "geometric AIS schedule");

  auto* lifted_cmd = app.add_subcommand("lifted", "lifted log Z with a pluggable base sampler");
  add_common(lifted_cmd, common, false);
  lifted_cmd->add_option("--base", lifted_base, "base sampler: exact|ais|thermal")
      ->check(CLI::IsMember({"exact", "ais", "thermal"}));
  lifted_cmd->add_flag("--trace", emit_trace, "attach the lifting trace");
  lifted_cmd->add_flag("--enable-isolated", enable_isolated,
                       "enable the isolated-variable rule");
  lifted_cmd->add_option("--max-branches", lift.max_fallback_branches,
                         "ground-fallback branch limit");
  lifted_cmd->add_option("--seed", sampler.seed, "AIS base seed");
  lifted_cmd->add_option("--chains", sampler.chains, "AIS base chains");
  lifted_cmd->add_option("--ladder", sampler.ais_ladder, "AIS base ladder steps");

  auto* quantum_cmd =
      app.add_subcommand("quantum", "thermal-state distribution, sampling, and evidence modes");
  add_common(quantum_cmd, common);
  quantum_cmd->add_option("--samples", sample_count, "number of thermal samples");
  quantum_cmd->add_option("--seed", sample_seed, "sampling seed");
  auto* clamp_opt =
      quantum_cmd->add_option("--clamp", clamp_gamma, "clamping strength for the evidence");
  auto* reduce_opt =
      quantum_cmd->add_flag("--reduce", reduce_mode, "reduce truth tables by the evidence");
  clamp_opt->excludes(reduce_opt);

  auto* complexity_cmd =
      app.add_subcommand("complexity", "preparation-complexity bound vs classical reference");
  add_common(complexity_cmd, common, false);
  complexity_cmd->add_option("--epsilon", epsilon, "target distance to the thermal state");
  complexity_cmd->add_option("--kappa", kappa, "polylog order");

  auto* compare_cmd = app.add_subcommand("compare", "run all engines and compare");
  add_common(compare_cmd, common);
  compare_cmd->add_option("--seed", sampler.seed, "sampler seed");
  compare_cmd->add_option("--chains", sampler.chains, "chains");
  compare_cmd->add_option("--samples", sampler.samples, "samples per chain");
  compare_cmd->add_option("--ladder", sampler.ais_ladder, "AIS ladder steps");
  compare_cmd->add_option("--epsilon", epsilon, "bound epsilon");
  compare_cmd->add_option("--kappa", kappa, "bound kappa");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (geometric) sampler.schedule = LadderSchedule::geometric;
    lift.enable_isolated = enable_isolated;

    RunReport report;
    report.config["limit"] = common.limit;
    PhaseTimer timer(common.timing);
    const ExactLimits limits{common.limit};

    if (app.got_subcommand(validate_cmd)) {
      report.command = "validate";
      LoadedModel m = load_model(common, false);
      report.kb_digest = content_digest(m.kb_text);
      timer.mark("parse");
      Json r = Json::object();
      r["domains"] = m.kb.domains.size();
      r["predicates"] = m.kb.predicates.size();
      r["formulas"] = m.kb.formulas.size();
      r["max_domain_size"] = m.kb.max_domain_size();
      r["max_atoms_per_formula"] = m.kb.max_atoms_per_formula();
      r["ground_atoms"] = m.kb.num_ground_atoms();
      r["normal"] = is_normal(m.kb);
      report.results["validate"] = r;
    } else if (app.got_subcommand(normalize_cmd)) {
      report.command = "normalize";
      LoadedModel m = load_model(common, false);
      report.kb_digest = content_digest(m.kb_text);
      auto [normal, norm_report] = to_normal_form(m.kb);
      timer.mark("normalize");
      Json r = Json::object();
      r["kb_text"] = render(normal);
      Json splits = Json::object();
      for (const auto& [dom, parts] : norm_report.domain_splits) splits[dom] = parts;
      r["domain_splits"] = splits;
      Json psplits = Json::object();
      for (const auto& [pred, names] : norm_report.predicate_splits) psplits[pred] = names;
      r["predicate_splits"] = psplits;
      r["formula_expansion_count"] = norm_report.formula_expansion_count;
      r["normal"] = is_normal(normal);
      report.results["normalize"] = r;
    } else if (app.got_subcommand(ground_cmd)) {
      report.command = "ground";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      timer.mark("ground");
      Json r = Json::object();
      Json atoms = Json::array();
      for (int a = 0; a < m.net.num_atoms(); ++a) atoms.push_back(m.net.atom_table.name(a));
      r["atoms"] = atoms;
      Json cliques = Json::array();
      for (const auto& c : m.net.cliques) {
        Json cj = Json::object();
        cj["formula_id"] = c.formula_id;
        cj["support"] = c.support;
        cj["weight"] = c.weight;
        Json table = Json::array();
        for (auto b : c.sat_table) table.push_back(static_cast<int>(b));
        cj["sat_table"] = table;
        cliques.push_back(cj);
      }
      r["cliques"] = cliques;
      r["log_offset"] = m.net.log_offset;
      report.results["ground"] = r;
    } else if (app.got_subcommand(stats_cmd)) {
      report.command = "stats";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      report.stats = stats_json(network_stats(m.net));
      timer.mark("stats");
    } else if (app.got_subcommand(exact_cmd)) {
      report.command = "exact";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      PartitionEstimate est = log_partition_exact(m.net, limits);
      Json r = estimate_json(est);
      std::map<int, double> marginals;
      for (int q : resolve_queries(m, common)) {
        marginals[q] = query_marginal_exact(m.net, q, m.evidence, limits);
      }
      r["marginals"] = marginals_json(m.net.atom_table, marginals);
      timer.mark("exact");
      report.results["exact"] = r;
    } else if (app.got_subcommand(mcmc_cmd)) {
      report.command = "mcmc";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      report.config["seed"] = sampler.seed;
      report.config["burnin"] = sampler.burn_in;
      report.config["samples"] = sampler.samples;
      report.config["thin"] = sampler.thinning;
      report.config["chains"] = sampler.chains;
      report.config["ladder"] = sampler.ais_ladder;

      std::vector<int> queries = resolve_queries(m, common);
      std::vector<World> samples = run_chains(m.net, m.evidence, sampler);
      MarginalEstimate marg = estimate_marginals(samples, queries);
      timer.mark("chains");

      PartitionEstimate ais;
      if (m.evidence.empty()) {
        ais = estimate_log_z_ais(m.net, sampler);
      } else {
        GroundNetwork reduced = reduce_by_evidence(m.net, m.evidence);
        ais = estimate_log_z_ais(reduced, sampler);
        ais.log_z += reduced.log_offset;
        ais.diagnostics["conditioned_on_evidence"] = "true";
      }
      timer.mark("ais");

      Json r = estimate_json(ais);
      r["marginals"] = marginals_json(m.net.atom_table, marg.mean);
      r["marginal_std_errors"] = marginals_json(m.net.atom_table, marg.std_error);
      report.results["mcmc"] = r;
    } else if (app.got_subcommand(lifted_cmd)) {
      report.command = "lifted";
      LoadedModel m = load_model(common, false);
      report.kb_digest = content_digest(m.kb_text);
      report.config["base"] = lifted_base;
      KnowledgeBase normal = m.kb;
      bool normalized = false;
      if (!is_normal(normal)) {
        normal = to_normal_form(m.kb).first;
        normalized = true;
      }
      report.config["normalized_first"] = normalized;

      std::unique_ptr<BaseSampler> base;
      if (lifted_base == "exact") {
        base = std::make_unique<ExactBaseSampler>(limits);
      } else if (lifted_base == "thermal") {
        base = std::make_unique<ThermalBaseSampler>(limits);
      } else {
        base = std::make_unique<AisBaseSampler>(sampler);
      }
      auto [est, trace] = lifted_log_z(normal, *base, lift);
      timer.mark("lifted");
      Json r = estimate_json(est);
      if (emit_trace) r["trace"] = lift_step_json(*trace.root);
      report.results["lifted"] = r;
    } else if (app.got_subcommand(quantum_cmd)) {
      report.command = "quantum";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      Json r = Json::object();

      if (reduce_mode) {
        if (m.evidence.empty()) throw ModelError("--reduce requires --evidence");
        GroundNetwork reduced = reduce_by_evidence(m.net, m.evidence);
        DiagonalHamiltonian h = build_hamiltonian(reduced);
        ThermalDistribution dist = thermal_distribution(h, limits);
        Json z = estimate_json(dist.log_z);
        z["log_z"] = dist.log_z.log_z + reduced.log_offset;
        r = z;
        r["mode"] = "reduced";
        std::map<int, double> marginals;
        for (int a = 0; a < reduced.num_atoms(); ++a) {
          double p = 0.0;
          for (std::size_t w = 0; w < dist.probabilities.size(); ++w) {
            if ((w >> a) & 1) p += dist.probabilities[w];
          }
          marginals[a] = p;
        }
        r["marginals"] = marginals_json(reduced.atom_table, marginals);
      } else if (clamp_gamma > 0.0) {
        if (m.evidence.empty()) throw ModelError("--clamp requires --evidence");
        DiagonalHamiltonian h = clamp_evidence(build_hamiltonian(m.net), m.evidence, clamp_gamma);
        ThermalDistribution dist = thermal_distribution(h, limits);
        r = estimate_json(dist.log_z);
        r["mode"] = "clamped";
        r["gamma"] = clamp_gamma;
        std::map<int, double> marginals;
        for (int a : free_atoms(m.net, m.evidence)) {
          double p = 0.0;
          for (std::size_t w = 0; w < dist.probabilities.size(); ++w) {
            if ((w >> a) & 1) p += dist.probabilities[w];
          }
          marginals[a] = p;
        }
        r["marginals"] = marginals_json(m.net.atom_table, marginals);
      } else {
        DiagonalHamiltonian h = build_hamiltonian(m.net);
        ThermalDistribution dist = thermal_distribution(h, limits);
        r = estimate_json(dist.log_z);
        r["mode"] = "thermal";
        r["beta"] = h.beta;
        std::map<int, double> marginals;
        for (int a = 0; a < m.net.num_atoms(); ++a) {
          double p = 0.0;
          for (std::size_t w = 0; w < dist.probabilities.size(); ++w) {
            if ((w >> a) & 1) p += dist.probabilities[w];
          }
          marginals[a] = p;
        }
        r["marginals"] = marginals_json(m.net.atom_table, marginals);
        if (sample_count > 0) {
          std::vector<World> samples = sample_thermal(h, sample_count, sample_seed, limits);
          std::vector<int> all_atoms;
          for (int a = 0; a < m.net.num_atoms(); ++a) all_atoms.push_back(a);
          MarginalEstimate emp = estimate_marginals(samples, all_atoms);
          r["empirical_marginals"] = marginals_json(m.net.atom_table, emp.mean);
          r["sample_count"] = sample_count;
          r["seed"] = sample_seed;
        }
      }
      timer.mark("quantum");
      report.results["quantum"] = r;
    } else if (app.got_subcommand(complexity_cmd)) {
      report.command = "complexity";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      DiagonalHamiltonian h = build_hamiltonian(m.net);
      PartitionEstimate est = log_partition_exact(m.net, limits);
      ComplexityReport bound =
          complexity_bound(m.net.num_atoms(), 2, h.beta, est.log_z, epsilon, kappa);
      timer.mark("complexity");
      Json r = Json::object();
      r["n"] = bound.n;
      r["d"] = bound.d;
      r["beta"] = bound.beta;
      r["log_z"] = bound.log_z;
      r["epsilon"] = bound.epsilon;
      r["kappa"] = bound.kappa;
      r["bound_value"] = bound.bound_value;
      r["classical_reference"] = bound.classical_reference;
      r["note"] = "upper-bound shape, constants unspecified";
      report.results["complexity"] = r;
    } else if (app.got_subcommand(compare_cmd)) {
      report.command = "compare";
      LoadedModel m = load_model(common);
      report.kb_digest = content_digest(m.kb_text);
      CompareOptions options;
      options.mcmc = sampler;
      options.lift = lift;
      options.limits = limits;
      options.epsilon = epsilon;
      options.kappa = kappa;
      options.query_atoms = common.queries.empty() ? std::vector<int>{} : resolve_queries(m, common);
      report.results["compare"] = compare_engines(m.kb, m.evidence, m.net, options);
      timer.mark("compare");
    }

    report.timing_ms = timer.json();
    out << dump_json(report.to_json());
    return 0;
  } catch (const LimitError& e) {
    err << "resource limit: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qmln
