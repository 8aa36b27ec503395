"""Homodyne Fisher information, the optimal angle and protocol Monte-Carlo.

Homodyne angle convention: measuring ``x`` at angle ``phi`` on a mode means
rotating that mode by ``-phi`` with :func:`phase_shift` and then reading out
``x``; the readout vector in the mode's ``(x, p)`` plane is
``(cos phi, -sin phi)``. Reading ``p`` uses ``(sin phi, cos phi)``.

The two-party scheme: lossy TMSS, local phases, a balanced beam splitter,
then ``x`` on mode 0 and ``p`` on mode 1, both at the same angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.optimize
import scipy.stats

from .phase_space import (
    GaussianState,
    apply_loss,
    apply_map,
    beam_splitter_balanced,
    rotation,
    rotation_generator,
    two_mode_squeezed,
)
from .network import encode_phases

@dataclass(frozen=True)
class HomodyneSpec:
    """Per-mode homodyne settings and an optional splitter layout applied first."""

    angles: tuple
    quadratures: tuple
    pre_beam_splitters: tuple = ()

    def __post_init__(self):
        angles = tuple(float(a) for a in np.atleast_1d(self.angles))
        quads = tuple(self.quadratures)
        if len(angles) != len(quads):
            raise ValueError("need one quadrature label per angle")
        if not all(np.isfinite(angles)):
            raise ValueError("angles must be finite")
        if any(q not in ("x", "p") for q in quads):
            raise ValueError("quadratures must be 'x' or 'p'")
        M = len(angles)
        pairs = tuple((int(i), int(j)) for i, j in self.pre_beam_splitters)
        for i, j in pairs:
            if i == j or not (0 <= i < M and 0 <= j < M):
                raise ValueError(f"invalid splitter ({i}, {j})")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "quadratures", quads)
        object.__setattr__(self, "pre_beam_splitters", pairs)

    @property
    def num_modes(self) -> int:
        return len(self.angles)

    def readout_matrix(self) -> np.ndarray:
        """``H`` (2M x M) such that the outcomes are ``H^T r`` in the pre-splitter frame."""
        M = self.num_modes
        U = np.zeros((2 * M, M))
        for k, (phi, q) in enumerate(zip(self.angles, self.quadratures)):
            c, s = np.cos(phi), np.sin(phi)
            U[2 * k : 2 * k + 2, k] = (c, -s) if q == "x" else (s, c)
        B = np.eye(2 * M)
        for i, j in self.pre_beam_splitters:
            B = beam_splitter_balanced(i, j, M).matrix @ B
        return B.T @ U

    def finite_squeezing_noise(self, r_meas: float) -> np.ndarray:
        """Gaussian-measurement covariance approximating this homodyne at squeezing ``r_meas``.

        Expressed in the post-splitter frame; tends to the homodyne as ``r_meas`` grows.
        """
        blocks = []
        for phi, q in zip(self.angles, self.quadratures):
            sq = np.exp(-2 * r_meas) / 2, np.exp(2 * r_meas) / 2
            D = np.diag(sq if q == "x" else sq[::-1])
            R = rotation(phi)
            blocks.append(R @ D @ R.T)
        M = self.num_modes
        out = np.zeros((2 * M, 2 * M))
        for k, b in enumerate(blocks):
            out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = b
        return out


def classical_fisher(sigma_theta, r_theta, dsigma, dr, sigma_M) -> float:
    """Fisher information of a Gaussian measurement with noise covariance ``sigma_M``.

    ``F = 1/2 tr[((S + S_M)^-1 dS)^2] + dr^T (S + S_M)^-1 dr``. Passing
    ``sigma_M=None`` or an infinite matrix means no measurement (``F = 0``).
    """
    if sigma_M is None:
        return 0.0
    sigma_M = np.asarray(sigma_M, dtype=float)
    if np.any(np.isinf(sigma_M)):
        return 0.0
    A = np.asarray(sigma_theta, dtype=float) + sigma_M
    if np.linalg.cond(A) > 1e14:
        raise ValueError("sigma_theta + sigma_M is singular")
    X = np.linalg.solve(A, np.asarray(dsigma, dtype=float))
    dr = np.asarray(dr, dtype=float)
    return float(max(0.5 * np.trace(X @ X) + dr @ np.linalg.solve(A, dr), 0.0))


def homodyne_fisher(sigma, mean, dsigma, dmean, H: np.ndarray) -> float:
    """Fisher information of the exact homodyne marginal ``y = H^T r``."""
    C = H.T @ sigma @ H
    dC = H.T @ dsigma @ H
    dm = H.T @ dmean
    X = np.linalg.solve(C, dC)
    return float(max(0.5 * np.trace(X @ X) + dm @ np.linalg.solve(C, dm), 0.0))


# -- two-party scheme -----------------------------------------------------------------


def lossy_pair(r: float, eta) -> GaussianState:
    return apply_loss(two_mode_squeezed(r), eta)


def scheme_spec(phi: float) -> HomodyneSpec:
    return HomodyneSpec((phi, phi), ("x", "p"), ((0, 1),))


def scheme_moments(r: float, eta, theta: Sequence[float], direction: Sequence[float] | None = None):
    """Encoded pre-splitter state and its derivative along ``direction`` (default average)."""
    st = encode_phases(lossy_pair(r, eta), theta)
    v = np.ones(2) / np.sqrt(2) if direction is None else np.asarray(direction, dtype=float)
    G = sum(v[k] * rotation_generator(k, 2) for k in range(2))
    return st, G @ st.cov + st.cov @ G.T, G @ st.mean


def scheme_fisher(r: float, eta, phi: float, theta=(0.0, 0.0), direction=None) -> float:
    """Homodyne CFI of the two-party scheme for a shift along ``direction``."""
    st, ds, dm = scheme_moments(r, eta, theta, direction)
    return homodyne_fisher(st.cov, st.mean, ds, dm, scheme_spec(phi).readout_matrix())


def scheme_fisher_limit(r: float, eta, phi: float, r_meas: float, theta=(0.0, 0.0), direction=None) -> float:
    """Same as :func:`scheme_fisher` through the finite-squeezing measurement model."""
    st, ds, dm = scheme_moments(r, eta, theta, direction)
    B = beam_splitter_balanced(0, 1, 2)
    post = apply_map(st, B)
    F = B.matrix
    return classical_fisher(post.cov, post.mean, F @ ds @ F.T, F @ dm, scheme_spec(phi).finite_squeezing_noise(r_meas))


def _gain(r: float, eta: float) -> float:
    return eta * np.sinh(2 * r) / np.sqrt(1 + 4 * (1 - eta) * eta * np.sinh(r) ** 2)


def optimal_angle(r: float, eta: float, theta1: float = 0.0, theta2: float = 0.0) -> float:
    """``(theta1 + theta2)/2 + arctan(eta sinh 2r / sqrt(1 + 4 (1-eta) eta sinh^2 r))``."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    return float(0.5 * (theta1 + theta2) + np.arctan(_gain(r, eta)))


def quadrature_angle_from_optimal(r: float, eta: float, theta1: float = 0.0, theta2: float = 0.0) -> float:
    """Homodyne angle (in this module's convention) at which the scheme CFI peaks.

    Maps the optimum returned by :func:`optimal_angle` onto the readout angle:
    ``s/2 + pi/4 - (phi_opt - s/2)/2`` with ``s = theta1 + theta2``.
    """
    half = 0.5 * (theta1 + theta2)
    return float(half + np.pi / 4 - 0.5 * (optimal_angle(r, eta, theta1, theta2) - half))


def cfi_at_optimal(r: float, eta: float) -> float:
    """``2 eta^2 sinh^2 2r / (1 + 4 (1-eta) eta sinh^2 r)``."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    return float(2 * eta**2 * np.sinh(2 * r) ** 2 / (1 + 4 * (1 - eta) * eta * np.sinh(r) ** 2))


# -- Monte-Carlo ----------------------------------------------------------------------


def make_rng(seed: int, *index: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *index)``; independent of thread layout."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, index)])))


def outcome_covariance(r: float, eta, s: float, phi: float) -> np.ndarray:
    """2x2 covariance of the scheme outcomes when the phase sum is ``s``."""
    st = encode_phases(lossy_pair(r, eta), (s / 2, s / 2))
    H = scheme_spec(phi).readout_matrix()
    return H.T @ st.cov @ H


class OutcomeModel:
    """Outcome covariance of the scheme as a function of the phase sum at fixed angle.

    The encoding enters through ``cos s`` and ``sin s`` only, so
    ``C(s) = K0 + Kc cos s + Ks sin s`` exactly; the three matrices are fixed
    once from ``C(0)``, ``C(pi/2)`` and ``C(pi)``.
    """

    def __init__(self, r: float, eta, phi: float):
        c0 = outcome_covariance(r, eta, 0.0, phi)
        c1 = outcome_covariance(r, eta, np.pi / 2, phi)
        c2 = outcome_covariance(r, eta, np.pi, phi)
        self.phi = phi
        self.k0 = 0.5 * (c0 + c2)
        self.kc = 0.5 * (c0 - c2)
        self.ks = c1 - self.k0

    def cov(self, s: float) -> np.ndarray:
        return self.k0 + self.kc * np.cos(s) + self.ks * np.sin(s)

    def neg_loglik(self, s: float, S: np.ndarray, n: int) -> float:
        a, b, d = self.cov(s)[[0, 0, 1], [0, 1, 1]]
        det = a * d - b * b
        quad = (d * S[0, 0] - 2 * b * S[0, 1] + a * S[1, 1]) / det
        return 0.5 * (n * np.log(det) + quad)


def _scatter(rng, C, shots, sampler):
    if sampler == "wishart" and shots >= 2:
        return scipy.stats.wishart.rvs(df=shots, scale=C, random_state=rng)
    y = rng.multivariate_normal(np.zeros(2), C, size=shots, method="cholesky")
    return y.T @ y


def mle_phase_sum(stages, center: float, window: float = 0.5) -> float:
    """Maximise the Gaussian likelihood of the phase sum within ``center +- window``.

    ``stages`` is a list of ``(OutcomeModel, scatter matrix, shots)``.
    """

    def nll(s):
        return sum(model.neg_loglik(s, S, n) for model, S, n in stages)

    res = scipy.optimize.minimize_scalar(
        nll, bounds=(center - window, center + window), method="bounded", options={"xatol": 1e-10}
    )
    return float(res.x)


@dataclass(frozen=True)
class ProtocolResult:
    """Summary over ``trials`` repetitions of a ``shots``-shot experiment.

    ``estimate`` and ``bias`` refer to the average-phase component
    ``v_avg . theta``. ``variance`` and ``crb_ratio`` are ``None`` when fewer
    than two shots or trials make them undefined.
    """

    seed: int
    shots: int
    trials: int
    r: float
    eta: float
    mode: str
    truth: float
    estimate: float
    bias: float
    variance: float | None
    crb_ratio: float | None
    crb_ratio_se: float | None


def simulate_protocol(
    r: float,
    eta: float,
    theta: Sequence[float],
    shots: int,
    seed: int,
    trials: int = 2000,
    mode: str = "known",
    pre_fraction: float = 0.1,
    sampler: str = "wishart",
    stream: int = 0,
) -> ProtocolResult:
    """Estimate the average phase from homodyne data and compare with the CFI bound.

    Modes:
        ``known``: angle set from the true phase sum (oracle local oscillator).
        ``small-phase``: angle set for zero phase sum.
        ``adaptive``: a ``pre_fraction`` pre-run at the zero-phase angle locates
        the phase sum, the rest runs at the angle it suggests; both stages enter
        one joint likelihood.

    ``sampler="wishart"`` draws the outcome scatter matrix directly, which is the
    exact sufficient statistic of the zero-mean outcomes; ``"raw"`` draws shots.
    Trial ``k`` uses the random stream ``(seed, stream, k)``.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    if trials < 1:
        raise ValueError("trials must be positive")
    if mode not in ("known", "adaptive", "small-phase"):
        raise ValueError(f"unknown mode {mode!r}")
    if sampler not in ("wishart", "raw"):
        raise ValueError(f"unknown sampler {sampler!r}")
    theta = np.asarray(theta, dtype=float)
    s_true = float(theta.sum())
    truth = float(s_true / np.sqrt(2))
    models: dict = {}

    def model(phi):
        # cached per angle; adaptive runs revisit the same pre-run angle
        key = round(phi, 15)
        if key not in models:
            models[key] = OutcomeModel(r, eta, phi)
        return models[key]

    estimates = np.empty(trials)
    for k in range(trials):
        rng = make_rng(seed, stream, k)
        if mode == "adaptive":
            n_pre = max(1, int(round(pre_fraction * shots)))
            n_main = shots - n_pre
            m0 = model(quadrature_angle_from_optimal(r, eta))
            S0 = _scatter(rng, m0.cov(s_true), n_pre, sampler)
            stages = [(m0, S0, n_pre)]
            center = mle_phase_sum(stages, 0.0)
            if n_main > 0:
                m1 = OutcomeModel(r, eta, quadrature_angle_from_optimal(r, eta, center / 2, center / 2))
                stages.append((m1, _scatter(rng, m1.cov(s_true), n_main, sampler), n_main))
        else:
            ref = s_true if mode == "known" else 0.0
            m = model(quadrature_angle_from_optimal(r, eta, ref / 2, ref / 2))
            stages = [(m, _scatter(rng, m.cov(s_true), shots, sampler), shots)]
            center = ref
        estimates[k] = mle_phase_sum(stages, center) / np.sqrt(2)
    est = float(np.mean(estimates))
    variance = crb = crb_se = None
    if shots >= 2 and trials >= 2:
        variance = float(np.var(estimates, ddof=1))
        crb = variance * shots * cfi_at_optimal(r, eta)
        crb_se = float(crb * np.sqrt(2.0 / (trials - 1)))
    return ProtocolResult(
        seed=int(seed),
        shots=int(shots),
        trials=int(trials),
        r=float(r),
        eta=float(eta),
        mode=mode,
        truth=truth,
        estimate=est,
        bias=float(est - truth),
        variance=variance,
        crb_ratio=crb,
        crb_ratio_se=crb_se,
    )


@dataclass(frozen=True)
class RegressionResult:
    """OLS fit of a relative-phase feature against true relative phases."""

    truths: np.ndarray
    features: np.ndarray
    slope: float
    slope_ci: tuple
    p_value: float

    @property
    def ci_contains_zero(self) -> bool:
        return self.slope_ci[0] <= 0.0 <= self.slope_ci[1]


def relative_phase_feature(S: np.ndarray) -> float:
    """Empirical correlation of the two homodyne outcomes."""
    return float(S[0, 1] / np.sqrt(S[0, 0] * S[1, 1]))


def relative_phase_regression(
    r: float,
    eta: float,
    deltas: Sequence[float],
    shots: int,
    seed: int,
    repeats: int = 20,
    phase_sum: float = 0.0,
    level: float = 0.95,
) -> RegressionResult:
    """Try to read the relative phase ``theta1 - theta2`` off the scheme's outcomes.

    For each true relative phase, ``repeats`` independent data sets are drawn
    at the optimal angle and reduced to :func:`relative_phase_feature`; the
    features are regressed on the truths. An unobservable direction gives a
    slope whose confidence interval contains zero.
    """
    deltas = np.asarray(deltas, dtype=float)
    phi = quadrature_angle_from_optimal(r, eta, phase_sum / 2, phase_sum / 2)
    xs, ys = [], []
    idx = 0
    for d in deltas:
        theta = (phase_sum / 2 + d / 2, phase_sum / 2 - d / 2)
        st = encode_phases(lossy_pair(r, eta), theta)
        H = scheme_spec(phi).readout_matrix()
        C = H.T @ st.cov @ H
        for _ in range(repeats):
            S = _scatter(make_rng(seed, idx), C, shots, "raw")
            idx += 1
            xs.append(d)
            ys.append(relative_phase_feature(S))
    fit = scipy.stats.linregress(xs, ys)
    t = scipy.stats.t.ppf(0.5 + level / 2, len(xs) - 2)
    ci = (fit.slope - t * fit.stderr, fit.slope + t * fit.stderr)
    return RegressionResult(np.array(xs), np.array(ys), float(fit.slope), ci, float(fit.pvalue))
