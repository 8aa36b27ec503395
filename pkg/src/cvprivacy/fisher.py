"""Quantum Fisher information matrices for phase encodings on Gaussian probes.

Three numerical routes are provided:

* ``qfim_pure_phase``: the number-covariance formula, ``Q = 4 cov(n)``, valid
  for pure probes (tag ``number-covariance``);
* ``qfim_general``: ``1/2 tr[(S^-1 dS)(S^-1 dS)] + dm^T S^-1 dm`` on any family of
  states (tag ``derivative-formula``); on pure states it is twice the number-covariance
  value, and on lossy states it is not the SLD quantity;
* ``qfim_mixed_exact``: the symplectically corrected SLD formula, exact for
  mixed and pure states alike (tag ``sld-exact``).

Closed forms carry the tag ``closed-form``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import IllConditionedError, InvariantViolation, MixedStateError
from .network import TreeSpec, build_tree_state, encode_phases
from .phase_space import GaussianState, rotation_generator, symplectic_form

NUMBER_COVARIANCE = "number-covariance"
DERIVATIVE_FORMULA = "derivative-formula"
SLD_EXACT = "sld-exact"
CLOSED_FORM = "closed-form"
CONVENTIONS = (NUMBER_COVARIANCE, DERIVATIVE_FORMULA, CLOSED_FORM, SLD_EXACT)

PURITY_TOL = 1e-6
CONDITION_LIMIT = 1e12
PSD_TOL = 1e-9
DUAL_ROUTE_TOL = 1e-10


def _sign_fix(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


@dataclass(frozen=True)
class QfimResult:
    """Symmetric QFIm with an ascending eigen-decomposition.

    Eigenvectors are orthonormal columns with the first non-negligible
    component made positive, so output is reproducible across platforms.
    """

    matrix: np.ndarray
    convention: str
    notes: dict = field(default_factory=dict)
    eigenvalues: np.ndarray = field(init=False)
    eigenvectors: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        Q = np.array(self.matrix, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("QFIm must be square")
        Q = 0.5 * (Q + Q.T)
        w, V = np.linalg.eigh(Q)
        scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
        if w.size and w[0] < -PSD_TOL * scale:
            raise InvariantViolation(f"QFIm has negative eigenvalue {w[0]:.3e}")
        V = _sign_fix(V)
        for name, val in (("matrix", Q), ("eigenvalues", w), ("eigenvectors", V)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def reconstruction_error(self) -> float:
        V, w = self.eigenvectors, self.eigenvalues
        return float(np.max(np.abs(V @ np.diag(w) @ V.T - self.matrix)))

    def scaled(self, factor: float, convention: str | None = None) -> "QfimResult":
        notes = dict(self.notes, rescaled_by=factor)
        return QfimResult(factor * self.matrix, convention or self.convention, notes)


# -- number-covariance route ---------------------------------------------------


def number_covariance(state: GaussianState) -> np.ndarray:
    """``cov(n_mu, n_nu)`` of a Gaussian state from its first two moments."""
    M = state.num_modes
    sig = state.cov
    m = state.mean
    out = np.empty((M, M))
    for mu in range(M):
        a = slice(2 * mu, 2 * mu + 2)
        for nu in range(M):
            b = slice(2 * nu, 2 * nu + 2)
            blk = sig[a, b]
            out[mu, nu] = 0.5 * np.sum(blk**2) + m[a] @ blk @ m[b]
    # vacuum-noise offset of the diagonal
    out -= 0.25 * np.eye(M)
    return out


def qfim_pure_phase(state: GaussianState, purity_tol: float = PURITY_TOL) -> QfimResult:
    """QFIm of local phase shifts on a pure probe, ``Q = 4 cov(n)``.

    The result does not depend on the encoded phases, so either the probe or
    the encoded state may be passed.

    Raises:
        MixedStateError: if any symplectic eigenvalue differs from 1/2 by more
            than ``purity_tol``; use :func:`qfim_general` or
            :func:`qfim_mixed_exact` instead.
    """
    nu = state.symplectic_eigenvalues()
    if np.max(np.abs(nu - 0.5)) > purity_tol:
        raise MixedStateError(
            f"state is mixed (max symplectic eigenvalue {nu.max():.6g}); "
            "use qfim_general or qfim_mixed_exact"
        )
    return QfimResult(4.0 * number_covariance(state), NUMBER_COVARIANCE)


# -- derivative-based routes -------------------------------------------------------


class PhaseEncodedFamily:
    """``theta -> encode_phases(probe, theta)`` with analytic derivatives."""

    def __init__(self, probe: GaussianState):
        self.probe = probe
        self.num_params = probe.num_modes

    def __call__(self, theta: Sequence[float]) -> GaussianState:
        return encode_phases(self.probe, theta)

    def derivatives(self, theta: Sequence[float]):
        """Return ``(state, [d cov], [d mean])`` at ``theta``."""
        st = self(theta)
        M = st.num_modes
        dcov, dmean = [], []
        for mu in range(M):
            G = rotation_generator(mu, M)
            dcov.append(G @ st.cov + st.cov @ G.T)
            dmean.append(G @ st.mean)
        return st, dcov, dmean


def _finite_difference(family: Callable, theta0: np.ndarray, h: float):
    st = family(theta0)
    dcov, dmean = [], []
    for mu in range(theta0.size):
        e = np.zeros_like(theta0)
        e[mu] = h
        plus, minus = family(theta0 + e), family(theta0 - e)
        dcov.append((plus.cov - minus.cov) / (2 * h))
        dmean.append((plus.mean - minus.mean) / (2 * h))
    return st, dcov, dmean


def _moments_and_derivatives(family, theta0, method, h):
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if method == "analytic":
        if not hasattr(family, "derivatives"):
            raise ValueError("family has no analytic derivatives; use method='finite-difference'")
        return family.derivatives(theta0)
    if method == "finite-difference":
        return _finite_difference(family, theta0, h)
    raise ValueError(f"unknown method {method!r}")


def _checked_cholesky(cov: np.ndarray):
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"covariance condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "for pure probes use qfim_pure_phase"
        )
    return scipy.linalg.cho_factor(cov), cond


def qfim_general(
    family: Callable[[Sequence[float]], GaussianState],
    theta0: Sequence[float],
    method: str = "analytic",
    h: float = 1e-5,
) -> QfimResult:
    """``Q = 1/2 tr[(S^-1 dS_mu)(S^-1 dS_nu)] + dm_mu^T S^-1 dm_nu``.

    Args:
        family: map from phases to states; a :class:`PhaseEncodedFamily`
            supports ``method="analytic"``.
        theta0: point of evaluation.
        method: ``"analytic"`` or ``"finite-difference"`` (central, step ``h``).
        h: finite-difference step.

    Returns:
        Result tagged ``derivative-formula``. ``notes`` carries the condition number and,
        for pure states, the measured ratio to the number-covariance value.
    """
    st, dcov, dmean = _moments_and_derivatives(family, theta0, method, h)
    cho, cond = _checked_cholesky(st.cov)
    a = [scipy.linalg.cho_solve(cho, d) for d in dcov]
    b = [scipy.linalg.cho_solve(cho, d) for d in dmean]
    n = len(dcov)
    Q = np.empty((n, n))
    for mu in range(n):
        for nu in range(mu, n):
            Q[mu, nu] = Q[nu, mu] = 0.5 * np.sum(a[mu] * a[nu].T) + dmean[mu] @ b[nu]
    notes = {"condition_number": float(cond), "method": method}
    if st.is_pure(PURITY_TOL):
        ref = 4.0 * number_covariance(st)
        tr = np.trace(ref)
        if tr > 1e-12:
            notes["pure_limit_ratio"] = float(np.trace(Q) / tr)
    return QfimResult(Q, DERIVATIVE_FORMULA, notes)


def qfim_mixed_exact(
    family: Callable[[Sequence[float]], GaussianState],
    theta0: Sequence[float],
    method: str = "analytic",
    h: float = 1e-5,
) -> QfimResult:
    """Exact Gaussian QFIm for mixed or pure states.

    ``Q = 1/2 vec(dS_mu)^T (S (x) S - Omega (x) Omega / 4)^+ vec(dS_nu) + dm_mu^T S^-1 dm_nu``.
    The pseudo-inverse handles pure states, where the bracket is singular.
    """
    st, dcov, dmean = _moments_and_derivatives(family, theta0, method, h)
    cov = st.cov
    omega = symplectic_form(st.num_modes)
    K = np.kron(cov, cov) - 0.25 * np.kron(omega, omega)
    vecs = np.column_stack([d.ravel() for d in dcov])
    sol = np.linalg.lstsq(K, vecs, rcond=1e-13)[0]
    Q = 0.5 * vecs.T @ sol
    b = np.linalg.solve(cov, np.column_stack(dmean))
    Q = Q + np.column_stack(dmean).T @ b
    return QfimResult(Q, SLD_EXACT, {"method": method})


def pure_limit_ratio(state: GaussianState) -> float:
    """Ratio of the derivative formula to ``4 cov(n)`` on a pure probe."""
    fam = PhaseEncodedFamily(state)
    general = qfim_general(fam, np.zeros(state.num_modes))
    pure = qfim_pure_phase(state)
    if pure.trace <= 1e-12:
        raise ValueError("probe is insensitive; ratio undefined")
    return general.trace / pure.trace


# -- closed forms ---------------------------------------------------------------------


def lossy_pair_eigenvalue(r: float, eta: float) -> float:
    """Single non-zero eigenvalue of the two-party lossy closed form (entry times 2)."""
    sh2 = np.sinh(2 * r) ** 2
    return 4 * eta**2 * sh2 / (1 + 4 * (1 - eta) * eta * np.sinh(r) ** 2)


def qfim_two_mode_lossy_closed_form(r: float, eta: float) -> QfimResult:
    """``(2 eta^2 sinh^2 2r / (1 + 4 (1-eta) eta sinh^2 r))`` times the all-ones matrix."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    entry = 0.5 * lossy_pair_eigenvalue(r, eta)
    return QfimResult(entry * np.ones((2, 2)), CLOSED_FORM, {"r": r, "eta": eta})


@dataclass(frozen=True)
class TreeSpectrum:
    """Closed-form spectrum of the tree QFIm in the number-covariance convention."""

    depth: int
    r: float
    lambda_zero: float
    lambda_perp: float
    lambda_plus: float
    v_zero: np.ndarray
    v_avg: np.ndarray

    @property
    def num_modes(self) -> int:
        return 2**self.depth

    @property
    def eigenvalues(self) -> np.ndarray:
        """Ascending multiset ``{0, lambda_perp x (M-2), lambda_plus}``."""
        vals = [self.lambda_zero] + [self.lambda_perp] * (self.num_modes - 2) + [self.lambda_plus]
        return np.sort(np.array(vals))

    def projector_form(self) -> np.ndarray:
        """``lambda_perp (1 - P_plus - P_zero) + lambda_plus P_plus``."""
        p_plus = np.outer(self.v_avg, self.v_avg)
        p_zero = np.outer(self.v_zero, self.v_zero)
        eye = np.eye(self.num_modes)
        return self.lambda_perp * (eye - p_plus - p_zero) + self.lambda_plus * p_plus


def tree_spectrum(depth: int, r: float) -> TreeSpectrum:
    """Eigenvalues and distinguished eigenvectors of the depth-``N`` tree QFIm."""
    if depth < 2:
        raise ValueError("the closed-form tree spectrum needs depth >= 2")
    spec = TreeSpec(depth, r)
    M = spec.num_modes
    v0 = spec.branch_signs() / np.sqrt(M)
    vavg = np.ones(M) / np.sqrt(M)
    for v in (v0, vavg):
        v.setflags(write=False)
    return TreeSpectrum(
        depth=depth,
        r=float(r),
        lambda_zero=0.0,
        lambda_perp=(np.cosh(2 * r) - 1) / 2.0 ** (depth - 2),
        lambda_plus=(np.cosh(4 * r) - 1) / 2.0 ** (depth - 1),
        v_zero=v0,
        v_avg=vavg,
    )


def qfim_tree(depth: int, r: float, tol: float = DUAL_ROUTE_TOL) -> QfimResult:
    """Tree QFIm computed by the projector form and checked against the state route.

    Agreement is required entrywise to ``tol * max(1, max|Q|)``.

    Raises:
        InvariantViolation: if the two routes disagree.
    """
    closed = tree_spectrum(depth, r).projector_form()
    numeric = qfim_pure_phase(build_tree_state(TreeSpec(depth, r))).matrix
    err = float(np.max(np.abs(closed - numeric)))
    bound = tol * max(1.0, float(np.max(np.abs(closed))))
    if err > bound:
        raise InvariantViolation(f"tree QFIm routes disagree by {err:.3e} (bound {bound:.3e})")
    return QfimResult(closed, CLOSED_FORM, {"dual_route_error": err, "depth": depth, "r": r})


def tree_qfim_entries(depth: int, r: float) -> dict:
    """The three distinct entries of the tree QFIm: diagonal, same branch, cross branch."""
    sp = tree_spectrum(depth, r)
    M = sp.num_modes
    same = (sp.lambda_plus - 2 * sp.lambda_perp) / M
    return {
        "diagonal": sp.lambda_perp + same,
        "same_branch": same,
        "cross_branch": sp.lambda_plus / M,
    }


def mean_photon_stats(depth: int, r: float) -> dict:
    """Photon-number bookkeeping of the tree probe.

    Returns:
        ``n_mode`` (per leaf), ``n_total``, ``lambda_snl = 4 n_mode``,
        ``lambda_max = 8 n_mode (1 + 2**(N-1) n_mode)`` and their ratio
        ``enhancement = n_total + 2`` (defined as 2 at ``r = 0``).
    """
    if depth < 2:
        raise ValueError("needs depth >= 2")
    n_mode = 2.0 ** (1 - depth) * np.sinh(r) ** 2
    n_total = 2.0**depth * n_mode
    lam_snl = 4 * n_mode
    lam_max = 8 * n_mode * (1 + 2.0 ** (depth - 1) * n_mode)
    enhancement = n_total + 2.0
    return {
        "n_mode": n_mode,
        "n_total": n_total,
        "lambda_snl": lam_snl,
        "lambda_max": lam_max,
        "enhancement": enhancement,
    }
