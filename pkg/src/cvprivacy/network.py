"""Scenario states: the beam-splitter tree, its closed-form covariance, and comparators.

Tree layout: a two-mode squeezed vacuum sits on modes ``0`` and ``M/2``; each
half is then split into ``M/2`` leaves by a binary tree of balanced beam
splitters fed with vacua. Leaves ``0 .. M/2-1`` form the A branch, the rest
the B branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .phase_space import (
    GaussianState,
    SymplecticMap,
    apply_loss,
    apply_map,
    beam_splitter_balanced,
    block_to_interleaved,
    compose,
    cz_gate,
    displace,
    permute_modes,
    phase_shift,
    single_mode_squeezer,
    tensor,
    two_mode_squeezed,
    vacuum_state,
)


@dataclass(frozen=True)
class TreeSpec:
    """Depth-``N`` splitter tree with ``M = 2**N`` leaves fed by a TMSS of squeezing ``r``."""

    depth: int
    r: float

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"tree depth must be an integer >= 1, got {self.depth}")
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "r", float(self.r))

    @property
    def num_modes(self) -> int:
        return 2**self.depth

    def bit(self, j: int, i: int) -> int:
        """Binary digit ``i`` of leaf label ``j``."""
        return (j >> i) & 1

    def branch(self, j: int) -> int:
        """0 for the A branch (low labels), 1 for the B branch."""
        return self.bit(j, self.depth - 1)

    def layer_sign(self, j: int, layer: int) -> int:
        """Which output port (+1 or -1) leaf ``j`` takes at splitting layer ``layer``."""
        if not 1 <= layer <= self.depth - 1:
            raise ValueError(f"layer must lie in 1..{self.depth - 1}")
        return 1 - 2 * self.bit(j, self.depth - layer - 1)

    def splitter_index(self, j: int, layer: int) -> int:
        """Index of the splitter that leaf ``j`` passes through at ``layer``."""
        return j >> (self.depth - layer)

    def branch_signs(self) -> np.ndarray:
        """``+1`` on A-branch leaves and ``-1`` on B-branch leaves."""
        return np.array([1 - 2 * self.branch(j) for j in range(self.num_modes)], dtype=float)


def _tree_network(depth: int) -> SymplecticMap:
    M = 2**depth
    net = SymplecticMap.identity(M)
    for layer in range(1, depth):
        stride = M >> (layer + 1)
        for k in range(0, M, 2 * stride):
            net = compose(beam_splitter_balanced(k, k + stride, M), net)
    return net


def build_tree_state(
    spec: TreeSpec,
    alpha: Sequence[complex] | None = None,
    eta: Sequence[float] | float | None = None,
) -> GaussianState:
    """Propagate the TMSS (optionally displaced, then lossy) through the splitter tree.

    Args:
        spec: tree depth and squeezing.
        alpha: coherent amplitudes on the two TMSS modes, applied first.
        eta: transmissivities of the two TMSS modes, applied after displacement.

    Returns:
        The ``2**N``-mode state before phase encoding.
    """
    source = two_mode_squeezed(spec.r)
    if alpha is not None:
        source = displace(source, alpha)
    if eta is not None:
        source = apply_loss(source, eta)
    return split_tree(source, spec.depth)


def split_tree(source: GaussianState, depth: int) -> GaussianState:
    """Feed a two-mode ``source`` into the depth-``depth`` splitter tree."""
    if source.num_modes != 2:
        raise ValueError("the tree is fed by a two-mode state")
    M = 2**depth
    if M == 2:
        return source
    # place the source on modes 0 and M/2, vacua elsewhere
    state = tensor(source, vacuum_state(M - 2))
    order = [0] + list(range(2, M // 2 + 1)) + [1] + list(range(M // 2 + 1, M))
    state = permute_modes(state, order)
    return apply_map(state, _tree_network(depth))


def tree_covariance_closed_form(spec: TreeSpec) -> GaussianState:
    """Tree covariance from the branch-resolved closed form.

    Each leaf inherits ``2**-N`` of its source-mode covariance; the vacuum
    contribution is ``(1 - 2**(1-N))/2`` on the diagonal, ``-2**-N`` between
    distinct leaves of the same branch and zero across branches.
    """
    N, M = spec.depth, spec.num_modes
    if N == 1:
        return two_mode_squeezed(spec.r)
    c, s = np.cosh(2 * spec.r), np.sinh(2 * spec.r)
    branch = np.array([spec.branch(j) for j in range(M)])
    same = (branch[:, None] == branch[None, :]).astype(float)
    vac = -(2.0**-N) * same + 0.5 * np.eye(M)
    sx = 2.0**-N * (c * same - s * (1 - same)) + vac
    sp = 2.0**-N * (c * same + s * (1 - same)) + vac
    block = np.zeros((2 * M, 2 * M))
    block[:M, :M] = sx
    block[M:, M:] = sp
    return GaussianState(block_to_interleaved(block))


def encode_phases(state: GaussianState, theta: Sequence[float]) -> GaussianState:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (state.num_modes,):
        raise ValueError(f"need {state.num_modes} phases, got {theta.shape}")
    return apply_map(state, phase_shift(theta))


@dataclass(frozen=True)
class ClusterSpec:
    """Squeezed modes entangled by CZ gates applied in ``edges`` order.

    ``squeezed_quadrature`` selects which quadrature each node squeezes
    before the gates; ``"p"`` gives the conventional momentum-squeezed cluster.
    """

    num_modes: int
    r: float
    edges: tuple = ()
    g: float | Sequence[float] = 1.0
    squeezed_quadrature: str = "p"
    couplings: tuple = field(init=False)

    def __post_init__(self):
        if self.num_modes < 1:
            raise ValueError("cluster needs at least one mode")
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if a == b or not (0 <= a < self.num_modes and 0 <= b < self.num_modes):
                raise ValueError(f"invalid edge ({a}, {b}) for {self.num_modes} modes")
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if g.size == 1:
            g = np.full(len(edges), g[0])
        if g.size != len(edges):
            raise ValueError("need one coupling per edge")
        if self.squeezed_quadrature not in ("x", "p"):
            raise ValueError("squeezed_quadrature must be 'x' or 'p'")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "couplings", tuple(float(v) for v in g))

    @classmethod
    def linear_chain(cls, num_modes: int, r: float, g: float, **kw) -> "ClusterSpec":
        return cls(num_modes, r, tuple((k, k + 1) for k in range(num_modes - 1)), g, **kw)


def build_cluster_state(spec: ClusterSpec) -> GaussianState:
    M = spec.num_modes
    r = -spec.r if spec.squeezed_quadrature == "p" else spec.r
    state = build_product_squeezed(M, r)
    for (a, b), g in zip(spec.edges, spec.couplings):
        state = apply_map(state, cz_gate(a, b, g, M))
    return state


def build_product_squeezed(num_modes: int, r: float) -> GaussianState:
    """Product of x-squeezed vacua (p-squeezed for ``r < 0``)."""
    if num_modes < 1:
        raise ValueError("need at least one mode")
    one = apply_map(vacuum_state(1), single_mode_squeezer(r))
    return tensor(*([one] * num_modes))
