"""Markov logic network inference toolkit.

Parses weighted first-order knowledge bases, grounds them to Markov networks,
and computes partition functions and marginals with four engines: exact
enumeration, heat-bath Gibbs sampling with an AIS partition estimator, a
lifted first-order decomposition, and an exact diagonal-Hamiltonian thermal
model with a preparation-complexity bound.
"""

from ._qmln import (
    KbLimitError,
    KbModelError,
    KbParseError,
    KnowledgeBase,
    GroundNetwork,
    ais_log_z,
    complexity_bound,
    exact_marginals,
    gibbs_marginals,
    ground,
    is_normal,
    lifted_log_z,
    log_partition_exact,
    parse_kb,
    reduce_by_evidence,
    render,
    thermal_log_z,
    to_normal_form,
)

__all__ = [
    "KbLimitError",
    "KbModelError",
    "KbParseError",
    "KnowledgeBase",
    "GroundNetwork",
    "ais_log_z",
    "complexity_bound",
    "exact_marginals",
    "gibbs_marginals",
    "ground",
    "is_normal",
    "lifted_log_z",
    "log_partition_exact",
    "parse_kb",
    "reduce_by_evidence",
    "render",
    "thermal_log_z",
    "to_normal_form",
]

__version__ = "0.1.0"
