"""Hash adaptive Bloom filter: cost-aware membership filter with per-key hash functions."""

from ._backend import BACKEND, available_backends
from .analysis import (
    expected_optimized_lower_bound,
    fstar_bound,
    habf_fpr_composition,
    insertion_avoidance_bound,
    insertion_workload_costs,
    lemma1_check,
    lemma2_check,
    p_xi_lower_bound,
    pc_prime_lower_bound,
    verify_bounds,
    weighted_fpr,
)
from .bloom import BloomFilter, new_bloom, optimal_k, theoretical_fpr
from .construction import BuildStats, BuildWorkspace, VIndex, build_v_index
from .errors import (
    ArityError,
    ConfigurationError,
    DomainError,
    FormatError,
    HabfError,
    InputError,
    InvalidHashIdError,
    InvariantViolation,
    PlanConflictError,
    UndefinedMetricError,
)
from .expressor import HashExpressor, InsertionPlan
from .habf import Habf, HabfConfig, build, build_fast
from .hashing import HashFamily, double_hash_indices, make_family
from .workload import Dataset, gen_keys, gen_zipf_costs, generate, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "available_backends",
    "HashFamily", "make_family", "double_hash_indices",
    "BloomFilter", "new_bloom", "theoretical_fpr", "optimal_k",
    "HashExpressor", "InsertionPlan",
    "Habf", "HabfConfig", "build", "build_fast",
    "BuildWorkspace", "BuildStats", "VIndex", "build_v_index",
    "weighted_fpr", "habf_fpr_composition", "p_xi_lower_bound",
    "expected_optimized_lower_bound", "fstar_bound", "pc_prime_lower_bound",
    "insertion_workload_costs", "insertion_avoidance_bound",
    "lemma1_check", "lemma2_check", "verify_bounds",
    "Dataset", "gen_keys", "gen_zipf_costs", "generate", "load_dataset", "save_dataset",
    "HabfError", "ConfigurationError", "InvalidHashIdError", "ArityError", "InputError",
    "DomainError", "UndefinedMetricError", "PlanConflictError", "FormatError",
    "InvariantViolation",
]
