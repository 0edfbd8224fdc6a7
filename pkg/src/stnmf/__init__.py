"""Summarize directed graphs into a few compressed nodes and directed relations.

The core model factorizes the skew-symmetric adjacency ``T = A - A^T`` as
``T ~ U S U^T`` with a non-negative assignment factor ``U`` and a
skew-symmetric relation factor ``S``.
"""
from .baselines import BaselineResult, spectral_cluster, undirected_summarize
from .graph import (
    DirectedGraph,
    EdgeListError,
    dump_edge_list,
    load_edge_list,
    read_edge_list,
    symmetrize,
    to_asymmetric,
    to_skew,
    write_edge_list,
)
from .linalg import SvdTriplet, frobenius_sq, neg_part, pos_part, truncated_svd
from .metrics import TrialRecord, assignment_accuracy, trajectory_check
from .solver import (
    FactorPair,
    SolverConfig,
    SolveResult,
    Summarization,
    discrete_errors,
    harden,
    init_S,
    nndsvd_init,
    objective_adaptive,
    objective_reg,
    objective_residual,
    solve,
    step_adaptive,
    step_fixed,
    summarize_partition,
)
from .synthetic import DipsSpec, LabeledGraph, NoiseConfig, add_noise, generate_dips, measure_noise

__version__ = "0.1.0"

__all__ = [
    "BaselineResult",
    "DipsSpec",
    "DirectedGraph",
    "EdgeListError",
    "FactorPair",
    "LabeledGraph",
    "NoiseConfig",
    "SolveResult",
    "SolverConfig",
    "Summarization",
    "SvdTriplet",
    "TrialRecord",
    "add_noise",
    "assignment_accuracy",
    "discrete_errors",
    "dump_edge_list",
    "frobenius_sq",
    "generate_dips",
    "harden",
    "init_S",
    "load_edge_list",
    "measure_noise",
    "neg_part",
    "nndsvd_init",
    "objective_adaptive",
    "objective_reg",
    "objective_residual",
    "pos_part",
    "read_edge_list",
    "solve",
    "spectral_cluster",
    "step_adaptive",
    "step_fixed",
    "summarize_partition",
    "symmetrize",
    "to_asymmetric",
    "to_skew",
    "trajectory_check",
    "truncated_svd",
    "undirected_summarize",
    "write_edge_list",
]
