#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qmln/exact.hpp"
#include "qmln/ground.hpp"
#include "qmln/lifted.hpp"
#include "qmln/logic.hpp"
#include "qmln/mcmc.hpp"
#include "qmln/normalize.hpp"
#include "qmln/report.hpp"
#include "qmln/thermal.hpp"

namespace py = pybind11;
using namespace qmln;

namespace {

Evidence evidence_from_dict(const GroundNetwork& net, const std::map<std::string, bool>& ev) {
  Evidence out;
  for (const auto& [name, value] : ev) {
    auto it = net.atom_table.index.find(name);
    if (it == net.atom_table.index.end()) {
      throw ModelError("unknown ground atom " + name);
    }
    out.assignments[it->second] = value;
  }
  return out;
}

py::dict estimate_to_dict(const PartitionEstimate& est) {
  py::dict d;
  d["log_z"] = est.log_z;
  d["method"] = method_name(est.method);
  if (est.std_error) d["std_error"] = *est.std_error;
  py::dict diag;
  for (const auto& [k, v] : est.diagnostics) diag[py::str(k)] = v;
  d["diagnostics"] = diag;
  return d;
}

py::dict marginals_to_dict(const GroundNetwork& net, const std::map<int, double>& m) {
  py::dict d;
  for (const auto& [atom, p] : m) d[py::str(net.atom_table.name(atom))] = p;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qmln, m) {
  m.doc() = "Markov logic network inference: exact, Gibbs/AIS, lifted, and "
            "diagonal-Hamiltonian thermal engines";

  py::register_exception<ParseError>(m, "KbParseError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "KbModelError", PyExc_ValueError);
  py::register_exception<LimitError>(m, "KbLimitError", PyExc_RuntimeError);

  py::class_<KnowledgeBase>(m, "KnowledgeBase")
      .def_property_readonly("num_domains",
                             [](const KnowledgeBase& kb) { return kb.domains.size(); })
      .def_property_readonly("num_predicates",
                             [](const KnowledgeBase& kb) { return kb.predicates.size(); })
      .def_property_readonly("num_formulas",
                             [](const KnowledgeBase& kb) { return kb.formulas.size(); })
      .def_property_readonly("max_domain_size", &KnowledgeBase::max_domain_size)
      .def_property_readonly("max_atoms_per_formula", &KnowledgeBase::max_atoms_per_formula)
      .def_property_readonly("num_ground_atoms", &KnowledgeBase::num_ground_atoms)
      .def("__repr__", [](const KnowledgeBase& kb) {
        return "<KnowledgeBase domains=" + std::to_string(kb.domains.size()) +
               " predicates=" + std::to_string(kb.predicates.size()) +
               " formulas=" + std::to_string(kb.formulas.size()) + ">";
      });

  py::class_<GroundNetwork>(m, "GroundNetwork")
      .def_property_readonly("num_atoms", &GroundNetwork::num_atoms)
      .def_property_readonly("num_cliques",
                             [](const GroundNetwork& n) { return n.cliques.size(); })
      .def_property_readonly("log_offset",
                             [](const GroundNetwork& n) { return n.log_offset; })
      .def("atom_names",
           [](const GroundNetwork& n) {
             std::vector<std::string> names;
             for (int a = 0; a < n.num_atoms(); ++a) names.push_back(n.atom_table.name(a));
             return names;
           })
      .def("stats", [](const GroundNetwork& n) {
        NetworkStats s = network_stats(n);
        py::dict d;
        d["num_nodes"] = s.num_nodes;
        d["max_clique_size"] = s.max_clique_size;
        d["max_degree"] = s.max_degree;
        d["num_cliques"] = s.num_cliques;
        return d;
      });

  m.def("parse_kb", &parse_kb, py::arg("text"), "Parse a knowledge base from text");
  m.def("render", py::overload_cast<const KnowledgeBase&>(&render), py::arg("kb"));
  m.def("is_normal", &is_normal, py::arg("kb"));
  m.def(
      "to_normal_form",
      [](const KnowledgeBase& kb) {
        auto [normal, report] = to_normal_form(kb);
        py::dict r;
        r["domain_splits"] = report.domain_splits;
        r["predicate_splits"] = report.predicate_splits;
        r["formula_expansion_count"] = report.formula_expansion_count;
        return py::make_tuple(normal, r);
      },
      py::arg("kb"));

  m.def(
      "ground",
      [](const KnowledgeBase& kb, long max_atoms) {
        return ground(kb, GroundLimits{max_atoms});
      },
      py::arg("kb"), py::arg("max_atoms") = (1L << 20));

  m.def(
      "log_partition_exact",
      [](const GroundNetwork& net, int limit) {
        return estimate_to_dict(log_partition_exact(net, ExactLimits{limit}));
      },
      py::arg("net"), py::arg("limit") = 24);

  m.def(
      "exact_marginals",
      [](const GroundNetwork& net, const std::map<std::string, bool>& evidence, int limit) {
        Evidence ev = evidence_from_dict(net, evidence);
        return marginals_to_dict(net, all_marginals_exact(net, ev, ExactLimits{limit}));
      },
      py::arg("net"), py::arg("evidence") = std::map<std::string, bool>{},
      py::arg("limit") = 24);

  m.def(
      "gibbs_marginals",
      [](const GroundNetwork& net, const std::map<std::string, bool>& evidence,
         std::uint64_t seed, int burn_in, int samples, int thinning, int chains) {
        SamplerConfig config;
        config.seed = seed;
        config.burn_in = burn_in;
        config.samples = samples;
        config.thinning = thinning;
        config.chains = chains;
        Evidence ev = evidence_from_dict(net, evidence);
        std::vector<int> queries;
        for (int a = 0; a < net.num_atoms(); ++a) {
          if (!ev.assignments.count(a)) queries.push_back(a);
        }
        std::vector<World> worlds = run_chains(net, ev, config);
        MarginalEstimate est = estimate_marginals(worlds, queries);
        py::dict d;
        d["marginals"] = marginals_to_dict(net, est.mean);
        d["std_errors"] = marginals_to_dict(net, est.std_error);
        return d;
      },
      py::arg("net"), py::arg("evidence") = std::map<std::string, bool>{},
      py::arg("seed") = 1, py::arg("burn_in") = 100, py::arg("samples") = 1000,
      py::arg("thinning") = 1, py::arg("chains") = 2);

  m.def(
      "ais_log_z",
      [](const GroundNetwork& net, std::uint64_t seed, int chains, int ladder) {
        SamplerConfig config;
        config.seed = seed;
        config.chains = chains;
        config.ais_ladder = ladder;
        return estimate_to_dict(estimate_log_z_ais(net, config));
      },
      py::arg("net"), py::arg("seed") = 1, py::arg("chains") = 64, py::arg("ladder") = 32);

  m.def(
      "lifted_log_z",
      [](const KnowledgeBase& kb, const std::string& base, int limit, std::uint64_t seed,
         bool enable_isolated, bool trace) {
        KnowledgeBase normal = kb;
        if (!is_normal(normal)) normal = to_normal_form(kb).first;
        LiftConfig config;
        config.enable_isolated = enable_isolated;
        std::unique_ptr<BaseSampler> sampler;
        if (base == "exact") {
          sampler = std::make_unique<ExactBaseSampler>(ExactLimits{limit});
        } else if (base == "thermal") {
          sampler = std::make_unique<ThermalBaseSampler>(ExactLimits{limit});
        } else if (base == "ais") {
          SamplerConfig ais;
          ais.seed = seed;
          ais.chains = 64;
          sampler = std::make_unique<AisBaseSampler>(ais);
        } else {
          throw ModelError("unknown base sampler " + base);
        }
        auto [est, lift_trace] = lifted_log_z(normal, *sampler, config);
        py::dict d = estimate_to_dict(est);
        if (trace) {
          py::list steps;
          for (const auto& s : lift_trace.steps()) {
            py::dict sd;
            sd["rule"] = s.rule;
            sd["target"] = s.target;
            sd["multiplier"] = s.multiplier;
            sd["branches"] = s.branch_count;
            steps.append(sd);
          }
          d["trace"] = steps;
        }
        return d;
      },
      py::arg("kb"), py::arg("base") = "exact", py::arg("limit") = 24, py::arg("seed") = 1,
      py::arg("enable_isolated") = false, py::arg("trace") = false);

  m.def(
      "thermal_log_z",
      [](const GroundNetwork& net, int limit) {
        DiagonalHamiltonian h = build_hamiltonian(net);
        PartitionEstimate est = thermal_distribution(h, ExactLimits{limit}).log_z;
        est.log_z += net.log_offset;
        return estimate_to_dict(est);
      },
      py::arg("net"), py::arg("limit") = 24);

  m.def(
      "reduce_by_evidence",
      [](const GroundNetwork& net, const std::map<std::string, bool>& evidence) {
        return reduce_by_evidence(net, evidence_from_dict(net, evidence));
      },
      py::arg("net"), py::arg("evidence"));

  m.def(
      "complexity_bound",
      [](long n, int d, double beta, double log_z, double epsilon, double kappa) {
        ComplexityReport r = complexity_bound(n, d, beta, log_z, epsilon, kappa);
        py::dict out;
        out["n"] = r.n;
        out["d"] = r.d;
        out["beta"] = r.beta;
        out["log_z"] = r.log_z;
        out["epsilon"] = r.epsilon;
        out["kappa"] = r.kappa;
        out["bound_value"] = r.bound_value;
        out["classical_reference"] = r.classical_reference;
        return out;
      },
      py::arg("n"), py::arg("d"), py::arg("beta"), py::arg("log_z"), py::arg("epsilon"),
      py::arg("kappa") = 2.0);
}
