r"""Gaussian states, symplectic maps and the loss channel.

Conventions (fixed for the whole package):

* quadratures are interleaved, :math:`(x_1, p_1, \dots, x_M, p_M)`, with
  :math:`\hbar = 1`, :math:`x = (a + a^\dagger)/\sqrt{2}`, so the vacuum has
  covariance :math:`\tfrac12 \mathbb{1}`;
* the covariance is the symmetrised central second moment
  :math:`\tfrac12\langle\{\delta r, \delta r^\top\}\rangle`;
* a coherent amplitude :math:`\alpha` shifts the mean by
  :math:`(\sqrt2\,\mathrm{Re}\,\alpha, \sqrt2\,\mathrm{Im}\,\alpha)`;
* ``single_mode_squeezer(r)`` squeezes :math:`x` for :math:`r > 0`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9
SYMPLECTIC_TOL = 1e-10
VACUUM_VARIANCE = 0.5


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def symplectic_form(num_modes: int) -> np.ndarray:
    """Return the interleaved symplectic form ``Omega`` on ``num_modes`` modes."""
    return np.kron(np.eye(num_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _as_mode_vector(values, num_modes: int, name: str, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim == 0:
        arr = np.full(num_modes, arr, dtype=dtype)
    if arr.shape != (num_modes,):
        raise ValueError(f"{name} must have length {num_modes}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of an ``M``-mode Gaussian state.

    Arrays are copied and made read-only on construction. Symmetry of ``cov``
    is enforced here; physicality (``cov + i Omega / 2 >= 0``) is checked by
    :meth:`is_physical` and by the invariant suite, not on every construction.
    """

    cov: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"covariance must be a square 2M x 2M matrix, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean = np.zeros(cov.shape[0]) if self.mean is None else np.array(self.mean, dtype=float)
        if mean.shape != (cov.shape[0],):
            raise ValueError(f"mean must have length {cov.shape[0]}, got {mean.shape}")
        object.__setattr__(self, "cov", _frozen(cov))
        object.__setattr__(self, "mean", _frozen(mean))

    @property
    def num_modes(self) -> int:
        return self.cov.shape[0] // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self)

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= VACUUM_VARIANCE - tol))

    def is_pure(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(np.all(np.abs(self.symplectic_eigenvalues() - VACUUM_VARIANCE) <= tol))

    def mode_block(self, i: int, j: int) -> np.ndarray:
        """The 2x2 covariance block between modes ``i`` and ``j``."""
        return self.cov[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]

    def mean_photon_numbers(self) -> np.ndarray:
        """Per-mode mean photon number ``(<x^2> + <p^2> - 1) / 2``."""
        diag = np.diag(self.cov).reshape(-1, 2).sum(axis=1)
        sq_mean = (self.mean**2).reshape(-1, 2).sum(axis=1)
        return 0.5 * (diag + sq_mean - 1.0)

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.num_modes == other.num_modes
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class SymplecticMap:
    """Affine symplectic action ``r -> F r + d`` of a Gaussian unitary."""

    matrix: np.ndarray
    displacement: np.ndarray = field(default=None)

    def __post_init__(self):
        F = np.array(self.matrix, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] % 2:
            raise ValueError(f"symplectic matrix must be 2M x 2M, got {F.shape}")
        omega = symplectic_form(F.shape[0] // 2)
        scale = max(1.0, float(np.linalg.norm(F, 2)) ** 2)
        if np.max(np.abs(F @ omega @ F.T - omega)) > SYMPLECTIC_TOL * scale:
            raise ValueError("matrix does not preserve the symplectic form")
        d = np.zeros(F.shape[0]) if self.displacement is None else np.array(self.displacement, dtype=float)
        if d.shape != (F.shape[0],):
            raise ValueError(f"displacement must have length {F.shape[0]}")
        object.__setattr__(self, "matrix", _frozen(F))
        object.__setattr__(self, "displacement", _frozen(d))

    @property
    def num_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @classmethod
    def identity(cls, num_modes: int) -> "SymplecticMap":
        return cls(np.eye(2 * num_modes))

    def symplectic_residual(self) -> float:
        omega = symplectic_form(self.num_modes)
        return float(np.max(np.abs(self.matrix @ omega @ self.matrix.T - omega)))


# -- states -----------------------------------------------------------------


def vacuum_state(num_modes: int) -> GaussianState:
    if num_modes < 1:
        raise ValueError("a state needs at least one mode")
    return GaussianState(VACUUM_VARIANCE * np.eye(2 * num_modes))


def two_mode_squeezed(r: float) -> GaussianState:
    """Two-mode squeezed vacuum: x-x correlation ``-sinh(2r)/2``, p-p ``+sinh(2r)/2``."""
    c = 0.5 * np.cosh(2 * r)
    s = 0.5 * np.sinh(2 * r)
    cov = np.array(
        [
            [c, 0.0, -s, 0.0],
            [0.0, c, 0.0, s],
            [-s, 0.0, c, 0.0],
            [0.0, s, 0.0, c],
        ]
    )
    return GaussianState(cov)


def squeezed_vacuum(r: float) -> GaussianState:
    return apply_map(vacuum_state(1), single_mode_squeezer(r))


def coherent_state(alpha: Sequence[complex]) -> GaussianState:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    return displace(vacuum_state(len(alpha)), alpha)


# -- maps -------------------------------------------------------------------


def _embed(block: np.ndarray, modes: Sequence[int], num_modes: int) -> np.ndarray:
    """Place a ``2k x 2k`` block acting on ``modes`` into the identity on ``num_modes``."""
    idx = np.array([[2 * m, 2 * m + 1] for m in modes]).ravel()
    F = np.eye(2 * num_modes)
    F[np.ix_(idx, idx)] = block
    return F


def _check_mode(i: int, num_modes: int) -> None:
    if not 0 <= i < num_modes:
        raise ValueError(f"mode index {i} out of range for {num_modes} modes")


def single_mode_squeezer(r: float, mode: int = 0, num_modes: int = 1) -> SymplecticMap:
    """``diag(e^-r, e^r)`` on ``mode``; squeezes x for ``r > 0``."""
    _check_mode(mode, num_modes)
    return SymplecticMap(_embed(np.diag([np.exp(-r), np.exp(r)]), [mode], num_modes))


def beam_splitter_balanced(i: int, j: int, num_modes: int) -> SymplecticMap:
    """50:50 splitter: ``(z_i, z_j) -> ((z_i + z_j)/sqrt2, (z_i - z_j)/sqrt2)`` for z in {x, p}.

    The matrix is its own inverse.
    """
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    _check_mode(i, num_modes)
    _check_mode(j, num_modes)
    h = 1.0 / np.sqrt(2.0)
    block = np.kron(np.array([[h, h], [h, -h]]), np.eye(2))
    return SymplecticMap(_embed(block, [i, j], num_modes))


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def phase_shift(theta: Sequence[float]) -> SymplecticMap:
    """Direct sum of per-mode rotations ``[[cos, sin], [-sin, cos]]``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("theta must be a non-empty vector")
    F = np.zeros((2 * theta.size, 2 * theta.size))
    for k, t in enumerate(theta):
        F[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = rotation(t)
    return SymplecticMap(F)


def rotation_generator(mode: int, num_modes: int) -> np.ndarray:
    """Derivative of ``phase_shift`` with respect to the phase of ``mode`` (at zero)."""
    _check_mode(mode, num_modes)
    G = np.zeros((2 * num_modes, 2 * num_modes))
    G[2 * mode, 2 * mode + 1] = 1.0
    G[2 * mode + 1, 2 * mode] = -1.0
    return G


def cz_gate(i: int, j: int, g: float, num_modes: int) -> SymplecticMap:
    """Continuous-variable CZ: ``p_i += g x_j``, ``p_j += g x_i``; x unchanged."""
    if i == j:
        raise ValueError("CZ needs two distinct modes")
    _check_mode(i, num_modes)
    _check_mode(j, num_modes)
    F = np.eye(2 * num_modes)
    F[2 * i + 1, 2 * j] = g
    F[2 * j + 1, 2 * i] = g
    return SymplecticMap(F)


def compose(a: SymplecticMap, b: SymplecticMap) -> SymplecticMap:
    """The map ``a o b``: apply ``b`` first, then ``a``."""
    if a.num_modes != b.num_modes:
        raise ValueError("cannot compose maps on different mode counts")
    return SymplecticMap(a.matrix @ b.matrix, a.matrix @ b.displacement + a.displacement)


def direct_sum(a: SymplecticMap, b: SymplecticMap) -> SymplecticMap:
    n = 2 * a.num_modes
    m = 2 * b.num_modes
    F = np.zeros((n + m, n + m))
    F[:n, :n] = a.matrix
    F[n:, n:] = b.matrix
    return SymplecticMap(F, np.concatenate([a.displacement, b.displacement]))


# -- actions on states --------------------------------------------------------


def apply_map(state: GaussianState, smap: SymplecticMap) -> GaussianState:
    if state.num_modes != smap.num_modes:
        raise ValueError(f"map acts on {smap.num_modes} modes, state has {state.num_modes}")
    F = smap.matrix
    return GaussianState(F @ state.cov @ F.T, F @ state.mean + smap.displacement)


def displace(state: GaussianState, alpha: Sequence[complex]) -> GaussianState:
    alpha = _as_mode_vector(alpha, state.num_modes, "alpha", dtype=complex)
    shift = np.sqrt(2.0) * np.column_stack([alpha.real, alpha.imag]).ravel()
    return GaussianState(state.cov, state.mean + shift)


def apply_loss(state: GaussianState, eta) -> GaussianState:
    """Pure-loss channel with per-mode transmissivity ``eta`` (scalar broadcasts).

    ``cov -> X cov X + Y`` with ``X = sqrt(eta)`` and ``Y = (1 - eta)/2`` per mode.
    """
    eta = _as_mode_vector(eta, state.num_modes, "eta")
    if np.any(eta < 0) or np.any(eta > 1):
        raise ValueError("transmissivities must lie in [0, 1]")
    x = np.repeat(np.sqrt(eta), 2)
    y = np.repeat(0.5 * (1.0 - eta), 2)
    cov = x[:, None] * state.cov * x[None, :] + np.diag(y)
    return GaussianState(cov, x * state.mean)


def tensor(*states: GaussianState) -> GaussianState:
    """Product state; modes of later arguments follow those of earlier ones."""
    if not states:
        raise ValueError("need at least one state")
    size = sum(2 * s.num_modes for s in states)
    cov = np.zeros((size, size))
    pos = 0
    for s in states:
        n = 2 * s.num_modes
        cov[pos : pos + n, pos : pos + n] = s.cov
        pos += n
    return GaussianState(cov, np.concatenate([s.mean for s in states]))


def _mode_permutation_indices(perm: Sequence[int], num_modes: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(num_modes)):
        raise ValueError(f"{perm.tolist()} is not a permutation of {num_modes} modes")
    return np.column_stack([2 * perm, 2 * perm + 1]).ravel()


def permute_modes(state: GaussianState, perm: Sequence[int]) -> GaussianState:
    """Reorder modes so that new mode ``k`` is old mode ``perm[k]``."""
    idx = _mode_permutation_indices(perm, state.num_modes)
    return GaussianState(state.cov[np.ix_(idx, idx)], state.mean[idx])


def inverse_permutation(perm: Sequence[int]) -> np.ndarray:
    perm = np.asarray(perm, dtype=int)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def interleaved_to_block(matrix: np.ndarray) -> np.ndarray:
    """Reorder ``(x1, p1, x2, p2, ...)`` to ``(x1, x2, ..., p1, p2, ...)``."""
    n = matrix.shape[0] // 2
    idx = np.concatenate([2 * np.arange(n), 2 * np.arange(n) + 1])
    if matrix.ndim == 1:
        return matrix[idx]
    return matrix[np.ix_(idx, idx)]


def block_to_interleaved(matrix: np.ndarray) -> np.ndarray:
    """Inverse of :func:`interleaved_to_block`."""
    n = matrix.shape[0] // 2
    idx = np.column_stack([np.arange(n), n + np.arange(n)]).ravel()
    if matrix.ndim == 1:
        return matrix[idx]
    return matrix[np.ix_(idx, idx)]


def symplectic_eigenvalues(state: GaussianState | np.ndarray) -> np.ndarray:
    """Sorted symplectic spectrum (moduli of the eigenvalues of ``i Omega sigma``)."""
    cov = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(cov)))):
        raise ValueError("covariance matrix is not symmetric")
    n = cov.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov)))
    # eigenvalues come in +/- pairs
    return ev.reshape(n, 2).mean(axis=1)
