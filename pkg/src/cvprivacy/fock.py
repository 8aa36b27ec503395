"""Truncated Fock-space oracle and the qubit warm-up examples.

Everything here is brute force on dense arrays and independent of the
phase-space code, so it can arbitrate between QFIm conventions. Basis index
of ``|n_1, ..., n_m>`` is row-major in ``(n_1, ..., n_m)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np
import scipy.linalg

MAX_MODES = 4
NORM_TOL = 1e-10
EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class FockState:
    """Pure (``vector``) or mixed (``density``) state on ``num_modes`` truncated modes.

    ``tail_mass`` bounds the probability discarded by the truncation.
    """

    num_modes: int
    n_max: int
    vector: np.ndarray | None = None
    density: np.ndarray | None = None
    tail_mass: float = 0.0

    def __post_init__(self):
        if not 1 <= self.num_modes <= MAX_MODES:
            raise ValueError(f"oracle supports 1..{MAX_MODES} modes")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if (self.vector is None) == (self.density is None):
            raise ValueError("give exactly one of vector or density")
        dim = (self.n_max + 1) ** self.num_modes
        if self.vector is not None:
            vec = np.asarray(self.vector, dtype=complex).ravel()
            if vec.size != dim:
                raise ValueError(f"vector must have {dim} entries")
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValueError("zero vector")
            object.__setattr__(self, "vector", vec / norm)
        else:
            rho = np.asarray(self.density, dtype=complex)
            if rho.shape != (dim, dim):
                raise ValueError(f"density must be {dim} x {dim}")
            rho = 0.5 * (rho + rho.conj().T)
            object.__setattr__(self, "density", rho / np.trace(rho).real)

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** self.num_modes

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def to_density(self) -> np.ndarray:
        if self.density is not None:
            return self.density
        return np.outer(self.vector, self.vector.conj())

    def number_diagonals(self) -> np.ndarray:
        """Array ``(num_modes, dim)`` with the photon number of each mode per basis state."""
        grid = np.indices((self.n_max + 1,) * self.num_modes).reshape(self.num_modes, -1)
        return grid.astype(float)

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.vector) ** 2
        return np.real(np.diag(self.density))

    def mean_photons(self) -> np.ndarray:
        return self.number_diagonals() @ self.populations()


# -- constructors ---------------------------------------------------------------


def tmss_fock(r: float, n_max: int) -> FockState:
    """Schmidt form ``sum_n tanh(r)**n / cosh(r) |n, n>`` truncated at ``n_max``."""
    t = np.tanh(abs(r))
    n = np.arange(n_max + 1)
    amp = t**n / np.cosh(r)
    # sign convention matching x-x anticorrelation in phase space
    amp = amp * (-np.sign(r)) ** n if r != 0 else amp
    vec = np.zeros(((n_max + 1), (n_max + 1)), dtype=complex)
    vec[n, n] = amp
    return FockState(2, n_max, vector=vec.ravel(), tail_mass=float(t ** (2 * (n_max + 1))))


def coherent_fock(alpha: complex, n_max: int) -> FockState:
    n = np.arange(n_max + 1)
    log_fact = np.array([np.sum(np.log(np.arange(1, k + 1))) for k in n])
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * log_fact)
    if alpha == 0:
        mag = (n == 0).astype(float)
    amp = mag * np.exp(1j * np.angle(alpha) * n)
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amp) ** 2)))
    return FockState(1, n_max, vector=amp, tail_mass=tail)


def squeezed_fock(r: float, n_max: int) -> FockState:
    """Single-mode squeezed vacuum (x squeezed for ``r > 0``)."""
    amp = np.zeros(n_max + 1, dtype=complex)
    t = np.tanh(r)
    for m in range(n_max // 2 + 1):
        amp[2 * m] = (-t) ** m * np.sqrt(float(factorial(2 * m))) / (2**m * factorial(m))
    amp /= np.sqrt(np.cosh(r))
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amp) ** 2)))
    return FockState(1, n_max, vector=amp, tail_mass=tail)


def product_fock(*states: FockState) -> FockState:
    n_max = states[0].n_max
    if any(s.n_max != n_max or not s.is_pure for s in states):
        raise ValueError("product needs pure states with a common truncation")
    vec = states[0].vector
    for s in states[1:]:
        vec = np.kron(vec, s.vector)
    return FockState(sum(s.num_modes for s in states), n_max, vector=vec)


def _annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def displace_fock(state: FockState, alpha, pad: int = 40) -> FockState:
    """Apply ``D(alpha_1) x ... x D(alpha_m)`` to a pure state.

    The displacement operator is built on ``n_max + pad`` levels and then
    truncated, which keeps the retained block accurate.
    """
    if not state.is_pure:
        raise ValueError("displace_fock expects a pure state")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    if alpha.size != state.num_modes:
        raise ValueError("need one amplitude per mode")
    big = state.n_max + pad
    a = _annihilation(big)
    d = state.n_max + 1
    psi = state.vector.reshape((d,) * state.num_modes)
    for k, al in enumerate(alpha):
        D = scipy.linalg.expm(al * a.conj().T - np.conj(al) * a)[:d, :d]
        psi = np.moveaxis(np.tensordot(D, psi, axes=([1], [k])), 0, k)
    return FockState(state.num_modes, state.n_max, vector=psi.ravel())


def loss_kraus(eta: float, n_max: int) -> list[np.ndarray]:
    """Pure-loss Kraus operators ``K_k |m> = sqrt(C(m,k) eta^(m-k) (1-eta)^k) |m-k>``."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    ops = []
    for k in range(n_max + 1):
        K = np.zeros((n_max + 1, n_max + 1))
        for m in range(k, n_max + 1):
            K[m - k, m] = np.sqrt(comb(m, k) * eta ** (m - k) * (1 - eta) ** k)
        ops.append(K)
    return ops


def lossy_fock(state: FockState, eta) -> FockState:
    """Apply per-mode pure loss to a pure state; returns the mixed output.

    ``rho = Phi Phi^dagger`` where the columns of ``Phi`` are the Kraus
    branches ``(K_k1 x ... x K_km)|psi>``, which avoids dense superoperators.
    """
    if not state.is_pure:
        raise ValueError("lossy_fock expects a pure input")
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (state.num_modes,))
    d = state.n_max + 1
    kraus = [loss_kraus(e, state.n_max) for e in eta]
    psi = state.vector.reshape((d,) * state.num_modes)
    branches = [psi]
    for k in range(state.num_modes):
        new = []
        for b in branches:
            for K in kraus[k]:
                out = np.moveaxis(np.tensordot(K, b, axes=([1], [k])), 0, k)
                if np.any(out):
                    new.append(out)
        branches = new
    phi = np.column_stack([b.ravel() for b in branches])
    return FockState(state.num_modes, state.n_max, density=phi @ phi.conj().T, tail_mass=state.tail_mass)


# -- Fisher information ---------------------------------------------------------------


def qfim_fock_pure(state: FockState) -> np.ndarray:
    """``Q = 4 cov(n)`` from the photon-number distribution of a pure state."""
    if not state.is_pure:
        raise ValueError("qfim_fock_pure expects a pure state")
    p = state.populations()
    n = state.number_diagonals()
    mean = n @ p
    second = (n * p) @ n.T
    return 4.0 * (second - np.outer(mean, mean))


def qfim_fock_mixed(state: FockState, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """SLD QFIm for phase generators ``n_mu`` by spectral decomposition of ``rho``.

    ``Q_{mu nu} = sum_{p_i + p_j > eps} 2 (p_i - p_j)^2 / (p_i + p_j) Re[<i|n_mu|j><j|n_nu|i>]``.
    """
    rho = state.to_density()
    if not np.any(rho.imag):
        # real arithmetic is several times faster on the dense eigenproblem
        rho = rho.real
    p, V = np.linalg.eigh(rho)
    p = np.clip(p, 0.0, None)
    psum = p[:, None] + p[None, :]
    mask = psum > eig_floor
    weight = np.where(mask, 2 * (p[:, None] - p[None, :]) ** 2 / np.where(mask, psum, 1.0), 0.0)
    n = state.number_diagonals()
    gens = [V.conj().T @ (n[mu][:, None] * V) for mu in range(state.num_modes)]
    m = state.num_modes
    Q = np.empty((m, m))
    for mu in range(m):
        for nu in range(mu, m):
            Q[mu, nu] = Q[nu, mu] = np.sum(weight * np.real(gens[mu] * gens[nu].T))
    return Q


# -- qubit warm-ups ----------------------------------------------------------------------


def _qubit_states() -> dict:
    ghz = np.zeros(8)
    ghz[[0, 7]] = 1 / np.sqrt(2)
    w = np.zeros(8)
    w[[1, 2, 4]] = 1 / np.sqrt(3)
    plus = np.full(8, 1 / np.sqrt(8))
    return {"GHZ": ghz, "W": w, "plus": plus}


def _excitations(n_qubits: int) -> np.ndarray:
    """``(n_qubits, 2**n_qubits)`` with bit ``mu`` (most significant first) of each basis index."""
    idx = np.arange(2**n_qubits)
    return np.array([(idx >> (n_qubits - 1 - mu)) & 1 for mu in range(n_qubits)], dtype=float)


def qubit_qfim(psi: np.ndarray) -> np.ndarray:
    """``4 Re[<d_mu psi|d_nu psi> - <d_mu psi|psi><psi|d_nu psi>]`` at zero phase.

    Encoding is ``|0><0| + e^{i theta} |1><1|`` on each qubit, so
    ``|d_mu psi> = i n_mu |psi>``.
    """
    psi = np.asarray(psi, dtype=complex)
    nq = int(round(np.log2(psi.size)))
    n = _excitations(nq)
    d = [1j * n[mu] * psi for mu in range(nq)]
    Q = np.empty((nq, nq))
    for mu in range(nq):
        for nu in range(nq):
            Q[mu, nu] = 4 * np.real(np.vdot(d[mu], d[nu]) - np.vdot(d[mu], psi) * np.vdot(psi, d[nu]))
    return Q


def exact_qubit_qfim(probabilities: dict) -> list[list[Fraction]]:
    """``4 cov(n)`` in exact rationals from bitstring probabilities."""
    nq = len(next(iter(probabilities)))
    mean = [sum((p for s, p in probabilities.items() if s[mu] == "1"), Fraction(0)) for mu in range(nq)]
    Q = []
    for mu in range(nq):
        row = []
        for nu in range(nq):
            both = sum((p for s, p in probabilities.items() if s[mu] == "1" and s[nu] == "1"), Fraction(0))
            row.append(4 * (both - mean[mu] * mean[nu]))
        Q.append(row)
    return Q


def qubit_warmups() -> dict:
    """QFIm and average-direction privacy of GHZ, W and ``|+>^3``.

    Returns:
        ``{name: {"Q": float matrix, "Q_exact": Fraction matrix, "P": float, "P_exact": Fraction}}``.
    """
    exact_probs = {
        "GHZ": {"000": Fraction(1, 2), "111": Fraction(1, 2)},
        "W": {"001": Fraction(1, 3), "010": Fraction(1, 3), "100": Fraction(1, 3)},
        "plus": {"".join(b): Fraction(1, 8) for b in itertools.product("01", repeat=3)},
    }
    out = {}
    for name, psi in _qubit_states().items():
        Q = qubit_qfim(psi)
        Qx = exact_qubit_qfim(exact_probs[name])
        v = np.ones(3) / np.sqrt(3)
        tr_exact = sum(Qx[k][k] for k in range(3))
        out[name] = {
            "Q": Q,
            "Q_exact": Qx,
            "P": float(v @ Q @ v / np.trace(Q)),
            # v^T Q v with v = (1,1,1)/sqrt3 is the mean of all entries times 3
            "P_exact": sum(sum(row) for row in Qx) / (3 * tr_exact),
        }
    return out
