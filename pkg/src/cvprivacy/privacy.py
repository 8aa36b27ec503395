"""Privacy measure, unobservable directions and regime classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsensitiveProbeError
from .fisher import QfimResult, tree_spectrum

TRACE_FLOOR = 1e-12
NORM_TOL = 1e-10
KERNEL_TOL_REL = 1e-10
KERNEL_FLOOR = 1e-14
COMPLETE_TOL = 1e-9
PRIVATE_TOL = 1e-8

COMPLETE = "complete"
PARTIAL = "partial"
NONE = "none"
INSENSITIVE = "insensitive"


def _matrix(Q) -> np.ndarray:
    return Q.matrix if isinstance(Q, QfimResult) else np.asarray(Q, dtype=float)


def average_direction(num_modes: int) -> np.ndarray:
    """Unit vector along the mean phase, ``(1, ..., 1)/sqrt(M)``."""
    return np.ones(num_modes) / np.sqrt(num_modes)


def privacy_measure(Q, v: Sequence[float]) -> float:
    """Fraction of total Fisher information carried by direction ``v``: ``v^T Q v / tr Q``.

    Raises:
        ValueError: if ``v`` is not unit-norm within ``1e-10``.
        InsensitiveProbeError: if ``tr Q <= 1e-12``; the measure is undefined.
    """
    Q = _matrix(Q)
    v = np.asarray(v, dtype=float)
    if v.shape != (Q.shape[0],):
        raise ValueError(f"direction must have length {Q.shape[0]}")
    if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
        raise ValueError("direction must be unit-norm")
    tr = float(np.trace(Q))
    if tr <= TRACE_FLOOR:
        raise InsensitiveProbeError(f"trace of QFIm is {tr:.3e}; privacy undefined")
    # clip rounding noise of a PSD quotient
    return float(np.clip(v @ Q @ v / tr, 0.0, 1.0))


def _spectrum(Q):
    if isinstance(Q, QfimResult):
        return Q.eigenvalues, Q.eigenvectors
    return np.linalg.eigh(0.5 * (_matrix(Q) + _matrix(Q).T))


def _kernel_threshold(w: np.ndarray, tol_rel: float, floor: float) -> float:
    return tol_rel * max(float(np.max(np.abs(w))) if w.size else 0.0, floor)


def kernel(Q, tol_rel: float = KERNEL_TOL_REL, floor: float = KERNEL_FLOOR) -> np.ndarray:
    """Orthonormal basis (columns) of the eigenvectors with ``lambda < tol_rel * max(lambda_max, floor)``."""
    w, V = _spectrum(Q)
    mask = w < _kernel_threshold(w, tol_rel, floor)
    return V[:, mask]


def eps_close(Q, eps_rel: float = 1e-3, tol_rel: float = KERNEL_TOL_REL, floor: float = KERNEL_FLOOR) -> np.ndarray:
    """Eigenvalues above the kernel threshold but below ``eps_rel * lambda_max``."""
    w, _ = _spectrum(Q)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    thr = _kernel_threshold(w, tol_rel, floor)
    return w[(w >= thr) & (w < eps_rel * top)]


def private_components(Q, tol: float = PRIVATE_TOL, **kernel_kw) -> np.ndarray:
    """``True`` for parameter ``j`` iff the unit vector ``e_j`` has a component in ``ker Q``."""
    K = kernel(Q, **kernel_kw)
    n = _matrix(Q).shape[0]
    if K.shape[1] == 0:
        return np.zeros(n, dtype=bool)
    return np.linalg.norm(K, axis=1) > tol


def classify_regime(Q, v: Sequence[float], tol: float = COMPLETE_TOL, **kernel_kw) -> str:
    """One of ``complete``, ``partial``, ``none`` or ``insensitive``.

    ``complete`` means ``P >= 1 - tol``. A non-empty kernel with smaller ``P``
    is ``partial`` (this includes ``P = 0``, where ``v`` itself is hidden).
    """
    try:
        P = privacy_measure(Q, v)
    except InsensitiveProbeError:
        return INSENSITIVE
    if P >= 1.0 - tol:
        return COMPLETE
    if kernel(Q, **kernel_kw).shape[1] > 0:
        return PARTIAL
    return NONE


@dataclass(frozen=True)
class PrivacyReport:
    """Privacy diagnostics of a QFIm along a target direction.

    ``P`` is ``None`` when the probe is insensitive (``trace_Q <= 1e-12``).
    """

    P: float | None
    target: np.ndarray
    trace_Q: float
    kernel_dim: int
    kernel_basis: np.ndarray
    private_flags: np.ndarray
    regime: str
    eigenvalues: np.ndarray
    eps_close: np.ndarray

    def as_dict(self) -> dict:
        return {
            "P": self.P,
            "trace_Q": self.trace_Q,
            "kernel_dim": self.kernel_dim,
            "private_flags": [bool(b) for b in self.private_flags],
            "regime": self.regime,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "eps_close": [float(x) for x in self.eps_close],
        }


def analyze_privacy(Q, v: Sequence[float] | None = None, **kernel_kw) -> PrivacyReport:
    """Full report for ``Q`` along ``v`` (default: the average direction)."""
    mat = _matrix(Q)
    v = average_direction(mat.shape[0]) if v is None else np.asarray(v, dtype=float)
    w, _ = _spectrum(Q)
    try:
        P = privacy_measure(Q, v)
    except InsensitiveProbeError:
        P = None
    K = kernel(Q, **kernel_kw)
    return PrivacyReport(
        P=P,
        target=v,
        trace_Q=float(np.trace(mat)),
        kernel_dim=int(K.shape[1]),
        kernel_basis=K,
        private_flags=private_components(Q, **kernel_kw),
        regime=classify_regime(Q, v, **kernel_kw),
        eigenvalues=np.asarray(w),
        eps_close=eps_close(Q, **kernel_kw),
    )


# -- closed forms -----------------------------------------------------------------


def closed_form_tree_privacy(depth: int, r: float) -> float:
    """``1 - (2**N - 2) / ((2**N - 1) + cosh 2r)`` for the tree probe along the average."""
    if r <= 0:
        raise InsensitiveProbeError("the tree probe is insensitive at r = 0")
    if depth < 2:
        raise ValueError("needs depth >= 2; the two-party probe is completely private")
    M = 2.0**depth
    return float(1.0 - (M - 2) / ((M - 1) + np.cosh(2 * r)))


def four_party_privacy(r: float) -> float:
    """Tree privacy for four parties, ``1 - 2 / (3 + cosh 2r)``."""
    if r <= 0:
        raise InsensitiveProbeError("the tree probe is insensitive at r = 0")
    return float(1.0 - 2.0 / (3.0 + np.cosh(2 * r)))


def tree_privacy_from_spectrum(depth: int, r: float) -> float:
    """``lambda_plus / (lambda_plus + (M - 2) lambda_perp)`` from the spectrum."""
    sp = tree_spectrum(depth, r)
    denom = sp.lambda_plus + (sp.num_modes - 2) * sp.lambda_perp
    if denom <= TRACE_FLOOR:
        raise InsensitiveProbeError("the tree probe is insensitive at r = 0")
    return float(sp.lambda_plus / denom)


def closed_form_displaced_privacy(r: float, a1: float, a2: float) -> float:
    """Two-party privacy along the average with real displacements ``a1``, ``a2``."""
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    num = (a1**2 + a2**2) * c + 2 * a1 * a2 * s
    den = 2 * (a1**2 + a2**2) * c + s**2
    if den <= TRACE_FLOOR:
        raise InsensitiveProbeError("vacuum probe is insensitive")
    return float(1.0 - num / den)


def privacy_from_covariance(cov: np.ndarray, mean: np.ndarray, v: Sequence[float]) -> float:
    """Privacy of a pure probe straight from its moments.

    Uses ``Q = 4 cov(n)`` written out blockwise, without building a QFIm object;
    serves as an independent route for cross-checks.
    """
    cov = np.asarray(cov, dtype=float)
    mean = np.asarray(mean, dtype=float)
    v = np.asarray(v, dtype=float)
    M = cov.shape[0] // 2
    blocks = cov.reshape(M, 2, M, 2).transpose(0, 2, 1, 3)
    means = mean.reshape(M, 2)
    quad = 2 * np.einsum("ijab,ijab->ij", blocks, blocks)
    quad += 4 * np.einsum("ia,ijab,jb->ij", means, blocks, means)
    quad -= np.eye(M)
    tr = float(np.trace(quad))
    if tr <= TRACE_FLOOR:
        raise InsensitiveProbeError("probe is insensitive")
    return float(v @ quad @ v / tr)
