"""Privacy diagnostics for distributed phase estimation with Gaussian sensor networks.

The submodules build Gaussian probes in phase space, compute the quantum
Fisher information matrix of local phase shifts, quantify how much of it
lies along a target direction, and cross-check against a truncated Fock
space oracle and simulated homodyne estimation.
"""

from .errors import (
    ConfigError,
    CVPrivacyError,
    IllConditionedError,
    InsensitiveProbeError,
    InvariantViolation,
    MixedStateError,
)
from .fisher import (
    PhaseEncodedFamily,
    QfimResult,
    qfim_general,
    qfim_mixed_exact,
    qfim_pure_phase,
    qfim_tree,
    tree_spectrum,
)
from .network import (
    ClusterSpec,
    TreeSpec,
    build_cluster_state,
    build_product_squeezed,
    build_tree_state,
    encode_phases,
)
from .phase_space import GaussianState, SymplecticMap, two_mode_squeezed, vacuum_state
from .privacy import analyze_privacy, average_direction, privacy_measure

__all__ = [
    "CVPrivacyError",
    "ConfigError",
    "IllConditionedError",
    "InsensitiveProbeError",
    "InvariantViolation",
    "MixedStateError",
    "GaussianState",
    "SymplecticMap",
    "vacuum_state",
    "two_mode_squeezed",
    "TreeSpec",
    "ClusterSpec",
    "build_tree_state",
    "build_cluster_state",
    "build_product_squeezed",
    "encode_phases",
    "QfimResult",
    "PhaseEncodedFamily",
    "qfim_pure_phase",
    "qfim_general",
    "qfim_mixed_exact",
    "qfim_tree",
    "tree_spectrum",
    "privacy_measure",
    "average_direction",
    "analyze_privacy",
]
