"""Grid evaluation behind the CLI subcommands.

Each ``run_*`` function takes a :class:`ScenarioConfig` and returns a list of
row dictionaries in grid order. Grid points are independent; ``threads > 1``
evaluates them on a thread pool, and results are reassembled by grid index so
output never depends on completion order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
import scipy.optimize

from .config import ScenarioConfig
from .errors import InsensitiveProbeError, InvariantViolation
from .fisher import (
    PhaseEncodedFamily,
    QfimResult,
    qfim_general,
    qfim_mixed_exact,
    qfim_pure_phase,
    qfim_two_mode_lossy_closed_form,
    tree_spectrum,
)
from .fock import lossy_fock, qfim_fock_mixed, qfim_fock_pure, tmss_fock
from .measurement import (
    cfi_at_optimal,
    optimal_angle,
    quadrature_angle_from_optimal,
    scheme_fisher,
    simulate_protocol,
)
from .network import (
    ClusterSpec,
    build_cluster_state,
    build_product_squeezed,
    split_tree,
)
from .phase_space import (
    GaussianState,
    apply_loss,
    displace,
    two_mode_squeezed,
)
from .privacy import (
    analyze_privacy,
    closed_form_displaced_privacy,
    closed_form_tree_privacy,
    privacy_measure,
)

INVARIANT_TOL = 1e-9


# -- invariants ---------------------------------------------------------------------


def check_state(state: GaussianState) -> None:
    """Raise :class:`InvariantViolation` unless ``state`` is a physical Gaussian state."""
    nu = state.symplectic_eigenvalues()
    if nu.min() < 0.5 - INVARIANT_TOL:
        raise InvariantViolation(f"unphysical state: symplectic eigenvalue {nu.min():.12g} < 1/2")


def check_qfim(Q: QfimResult) -> None:
    scale = max(1.0, float(np.max(np.abs(Q.eigenvalues))))
    if Q.eigenvalues[0] < -INVARIANT_TOL * scale:
        raise InvariantViolation(f"QFIm not PSD: eigenvalue {Q.eigenvalues[0]:.3e}")
    if Q.reconstruction_error() > INVARIANT_TOL * scale:
        raise InvariantViolation("QFIm eigen-decomposition does not reconstruct the matrix")


# -- scenario construction --------------------------------------------------------------


def _pad(values, n) -> list:
    values = list(np.atleast_1d(values))
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise ValueError(f"expected {n} values, got {len(values)}")
    return values


def _apply_channels(state: GaussianState, channels, point: dict) -> GaussianState:
    n = state.num_modes
    for ch in channels:
        if ch["type"] == "displace":
            alpha = list(ch["alpha"]) + [0.0] * (n - len(ch["alpha"]))
            state = displace(state, alpha[:n])
        else:
            state = apply_loss(state, _pad(ch["eta"], n))
    # sweep axes act after the listed channels: displacement first, then loss
    if point.get("alpha", 0.0) != 0.0:
        alpha = np.zeros(n)
        alpha[1] = point["alpha"]
        state = displace(state, alpha)
    if "eta" in point:
        state = apply_loss(state, point["eta"])
    return state


def build_probe(cfg: ScenarioConfig, point: dict) -> GaussianState:
    """Pre-encoding probe state for one grid point.

    Channels act on the source modes: the two TMSS modes for ``tree`` and
    ``two-mode``, every mode for ``product`` and ``cluster``. A swept
    ``alpha`` displaces the second source mode by ``alpha``, so it equals the
    relative displacement ``|alpha_2 - alpha_1|``.
    """
    st = cfg.state
    kind = st["kind"]
    r = point.get("r", st["r"])
    if kind in ("tree", "two-mode"):
        source = _apply_channels(two_mode_squeezed(r), cfg.channels, point)
        depth = point.get("depth", st.get("depth", 1)) if kind == "tree" else 1
        state = split_tree(source, int(depth))
    elif kind == "product":
        state = _apply_channels(build_product_squeezed(st["modes"], r), cfg.channels, point)
    else:
        spec = ClusterSpec(
            st["modes"],
            r,
            tuple(map(tuple, st["edges"])),
            point.get("g", st["g"]),
            squeezed_quadrature=st["squeezed_quadrature"],
        )
        state = _apply_channels(build_cluster_state(spec), cfg.channels, point)
    check_state(state)
    return state


def compute_qfim(state: GaussianState, route: str = "auto") -> QfimResult:
    """QFIm of local phases on ``state``.

    ``auto`` uses the number-covariance formula on pure probes and the exact
    mixed-state formula otherwise.
    """
    fam = PhaseEncodedFamily(state)
    theta0 = np.zeros(state.num_modes)
    if route == "derivative":
        Q = qfim_general(fam, theta0)
    elif route == "exact":
        Q = qfim_mixed_exact(fam, theta0)
    elif state.is_pure(1e-6):
        Q = qfim_pure_phase(state)
    else:
        Q = qfim_mixed_exact(fam, theta0)
    check_qfim(Q)
    return Q


def target_vector(cfg: ScenarioConfig, num_modes: int) -> np.ndarray:
    if cfg.target == "average":
        return np.ones(num_modes) / np.sqrt(num_modes)
    v = np.asarray(cfg.target, dtype=float)
    if v.size != num_modes:
        raise InvariantViolation(f"target has {v.size} entries but the probe has {num_modes} modes")
    return v


# -- execution ------------------------------------------------------------------------


def run_grid(points: list, fn: Callable[[int, dict], list], threads: int = 1) -> tuple[list, list]:
    """Evaluate ``fn(index, point)`` for all points; returns ``(rows, timings)`` in grid order."""

    def task(item):
        idx, point = item
        t0 = time.perf_counter()
        rows = fn(idx, point)
        return rows, time.perf_counter() - t0

    items = list(enumerate(points))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, items))
    else:
        results = [task(it) for it in items]
    rows = [row for chunk, _ in results for row in chunk]
    return rows, [t for _, t in results]


def _none_if_insensitive(fn):
    try:
        return fn()
    except InsensitiveProbeError:
        return None


# -- subcommands ------------------------------------------------------------------------


def run_spectrum(cfg: ScenarioConfig, threads: int = 1):
    points = [dict(p) for p in cfg.grid()]

    def one(_, point):
        depth = int(point.get("depth", cfg.state.get("depth", 2)))
        r = point.get("r", cfg.state["r"])
        state = split_tree(two_mode_squeezed(r), depth)
        check_state(state)
        Q = qfim_pure_phase(state)
        check_qfim(Q)
        rep = analyze_privacy(Q)
        w = Q.eigenvalues
        top = float(w[-1])
        nonzero = w[w >= 1e-10 * max(top, 1e-14)]
        sp = tree_spectrum(depth, r) if depth >= 2 else None
        closed_max = sp.lambda_plus if sp else float("nan")
        rel = abs(top - closed_max) / max(abs(closed_max), 1e-300) if sp and closed_max > 0 else 0.0
        if sp and closed_max > 0 and rel > INVARIANT_TOL:
            raise InvariantViolation(f"lambda_max deviates from closed form by {rel:.3e}")
        return [
            {
                "depth": depth,
                "modes": 2**depth,
                "r": r,
                "lambda_min_nonzero": float(nonzero[0]) if rep.regime != "insensitive" else None,
                "lambda_max": top if rep.regime != "insensitive" else 0.0,
                "lambda_max_closed": closed_max,
                "rel_err_lambda_max": rel,
                "gap": float(top / nonzero[0]) if rep.regime != "insensitive" else None,
                "kernel_dim": rep.kernel_dim,
                "regime": rep.regime,
                "convention": Q.convention,
            }
        ]

    return run_grid(points, one, threads)


def _privacy_closed_form(cfg: ScenarioConfig, point: dict):
    kind = cfg.state["kind"]
    r = point.get("r", cfg.state["r"])
    lossless = point.get("eta", 1.0) == 1.0 and not any(c["type"] == "loss" for c in cfg.channels)
    undisplaced = point.get("alpha", 0.0) == 0.0 and not any(c["type"] == "displace" for c in cfg.channels)
    if cfg.target != "average":
        return None
    if kind == "tree" and point.get("depth", cfg.state["depth"]) >= 2 and lossless and undisplaced and r > 0:
        return closed_form_tree_privacy(point.get("depth", cfg.state["depth"]), r)
    if kind in ("two-mode",) or (kind == "tree" and point.get("depth", cfg.state["depth"]) == 1):
        if lossless and not cfg.channels:
            return _none_if_insensitive(lambda: closed_form_displaced_privacy(r, 0.0, point.get("alpha", 0.0)))
        if undisplaced and r > 0:
            return 1.0
    return None


def run_privacy_sweep(cfg: ScenarioConfig, threads: int = 1):
    def one(_, point):
        state = build_probe(cfg, point)
        Q = compute_qfim(state, cfg.qfim_route)
        rep = analyze_privacy(Q, target_vector(cfg, state.num_modes))
        return [
            {
                "kind": cfg.state["kind"],
                "depth": point.get("depth", cfg.state.get("depth")),
                "modes": state.num_modes,
                "r": point.get("r", cfg.state["r"]),
                "eta": point.get("eta", 1.0),
                "alpha": point.get("alpha", 0.0),
                "g": point.get("g", cfg.state.get("g")),
                "P": rep.P,
                "P_closed": _privacy_closed_form(cfg, point),
                "trace_Q": rep.trace_Q,
                "lambda_min": float(rep.eigenvalues[0]),
                "lambda_max": float(rep.eigenvalues[-1]),
                "kernel_dim": rep.kernel_dim,
                "eps_close": len(rep.eps_close),
                "regime": rep.regime,
                "convention": Q.convention,
            }
        ]

    return run_grid(cfg.grid(), one, threads)


def _privacy_of(state: GaussianState) -> float:
    return privacy_measure(qfim_pure_phase(state), np.ones(state.num_modes) / np.sqrt(state.num_modes))


def cluster_privacy(modes: int, r: float, g: float, edges=None, squeezed_quadrature: str = "p") -> float:
    edges = tuple((k, k + 1) for k in range(modes - 1)) if edges is None else tuple(map(tuple, edges))
    spec = ClusterSpec(modes, r, edges, g, squeezed_quadrature=squeezed_quadrature)
    return _privacy_of(build_cluster_state(spec))


def optimal_coupling(modes: int, r: float, bracket=(0.0, 2.0), grid: int = 81, **kw) -> dict:
    """Maximise cluster privacy over ``g``: coarse grid, then golden-section refinement.

    Returns:
        ``{"g_opt", "P_opt", "bracket"}`` with the three-point bracket used.
    """
    gs = np.linspace(bracket[0], bracket[1], grid)
    vals = np.array([cluster_privacy(modes, r, g, **kw) for g in gs])
    k = int(np.clip(np.argmax(vals), 1, grid - 2))
    br = (gs[k - 1], gs[k], gs[k + 1])
    res = scipy.optimize.minimize_scalar(
        lambda g: -cluster_privacy(modes, r, g, **kw), bracket=br, method="golden", tol=1e-8
    )
    return {"g_opt": float(res.x), "P_opt": float(-res.fun), "bracket": tuple(float(b) for b in br)}


def run_compare_states(cfg: ScenarioConfig, threads: int = 1):
    st = cfg.state
    modes = int(cfg.compare.get("modes", st.get("modes", 4)))
    depth = int(round(math.log2(modes)))
    if 2**depth != modes:
        raise InvariantViolation("tree comparison needs a power-of-two mode count")
    g_fixed = float(cfg.compare.get("g", st.get("g", 0.88)))
    edges = st.get("edges")
    quad = st.get("squeezed_quadrature", "p")
    r_values = cfg.sweep.get("r", [st["r"]])
    g_values = cfg.sweep.get("g", [g_fixed])
    r_opt = float(cfg.compare.get("g_opt_r", 1.0))
    bracket = tuple(cfg.compare.get("g_bracket", [0.0, 2.0]))
    tasks = [("ordering", r, g_fixed) for r in r_values]
    tasks += [("g-scan", r_opt, g) for g in g_values]
    tasks += [("g-opt", r_opt, None)]

    def one(_, task):
        kind, r, g = task
        p_tree = _none_if_insensitive(lambda: _privacy_of(split_tree(two_mode_squeezed(r), depth)))
        p_prod = _none_if_insensitive(lambda: _privacy_of(build_product_squeezed(modes, r)))
        note = ""
        if kind == "g-opt":
            opt = optimal_coupling(modes, r, bracket, edges=edges, squeezed_quadrature=quad)
            g = opt["g_opt"]
            note = "bracket=" + ";".join(f"{b:.6g}" for b in opt["bracket"])
        p_cl = _none_if_insensitive(lambda: cluster_privacy(modes, r, g, edges, quad))
        return [
            {
                "kind": kind,
                "modes": modes,
                "r": r,
                "g": g,
                "P_tree": p_tree,
                "P_cluster": p_cl,
                "P_product": p_prod,
                "note": note,
                "convention": "number-covariance",
            }
        ]

    return run_grid(tasks, one, threads)


def run_two_mode(cfg: ScenarioConfig, threads: int = 1):
    def one(_, point):
        r = point.get("r", cfg.state["r"])
        eta = point.get("eta", 1.0)
        state = apply_loss(two_mode_squeezed(r), eta)
        check_state(state)
        fam = PhaseEncodedFamily(state)
        Qd = qfim_general(fam, np.zeros(2))
        Qx = qfim_mixed_exact(fam, np.zeros(2))
        check_qfim(Qd)
        check_qfim(Qx)
        rep = analyze_privacy(Qd)
        closed = qfim_two_mode_lossy_closed_form(r, eta).matrix[0, 0] if eta > 0 else 0.0
        entry = Qd.matrix[0, 0]
        phi_q = quadrature_angle_from_optimal(r, eta) if eta > 0 else None
        return [
            {
                "r": r,
                "eta": eta,
                "Q_entry": entry,
                "Q_closed_entry": closed,
                "ratio_to_closed": entry / closed if closed > 0 else None,
                "offdiag_ratio": Qd.matrix[0, 1] / entry if entry > 0 else None,
                "Q_exact_entry": Qx.matrix[0, 0],
                "exact_ratio_to_closed": Qx.matrix[0, 0] / closed if closed > 0 else None,
                "P": rep.P,
                "P_exact": _none_if_insensitive(lambda: privacy_measure(Qx, np.ones(2) / np.sqrt(2))),
                "kernel_dim": rep.kernel_dim,
                "regime": rep.regime,
                "phi_opt": optimal_angle(r, eta) if eta > 0 else None,
                "phi_quadrature": phi_q,
                "cfi": scheme_fisher(r, eta, phi_q) if eta > 0 else 0.0,
                "cfi_closed": cfi_at_optimal(r, eta),
                "convention": Qd.convention,
            }
        ]

    return run_grid(cfg.grid(), one, threads)


def run_protocol_sim(cfg: ScenarioConfig, threads: int = 1):
    proto = cfg.protocol
    shots = int(proto.get("shots", 100000))
    trials = int(proto.get("trials", 2000))
    mode = proto.get("mode", "known")
    theta = tuple(proto.get("theta", (0.01, 0.03)))
    sampler = proto.get("sampler", "wishart")

    def one(idx, point):
        r = point.get("r", cfg.state["r"])
        eta = point.get("eta", 1.0)
        res = simulate_protocol(r, eta, theta, shots, cfg.seed, trials, mode, sampler=sampler, stream=idx)
        return [
            {
                "seed": res.seed,
                "stream": idx,
                "shots": res.shots,
                "trials": res.trials,
                "r": res.r,
                "eta": res.eta,
                "mode": res.mode,
                "truth": res.truth,
                "estimate": res.estimate,
                "bias": res.bias,
                "variance": res.variance,
                "crb_ratio": res.crb_ratio,
                "crb_ratio_se": res.crb_ratio_se,
                "convention": "number-covariance",
            }
        ]

    return run_grid(cfg.grid(), one, threads)


def run_oracle_check(cfg: ScenarioConfig, threads: int = 1):
    n_max = int(cfg.oracle.get("n_max", 40))

    def one(_, point):
        r = point.get("r", cfg.state["r"])
        eta = point.get("eta", 1.0)
        fock = tmss_fock(r, n_max)
        state = apply_loss(two_mode_squeezed(r), eta)
        if eta == 1.0:
            Qf = qfim_fock_pure(fock)
            Qp = qfim_pure_phase(state)
        else:
            Qf = qfim_fock_mixed(lossy_fock(fock, eta))
            Qp = qfim_mixed_exact(PhaseEncodedFamily(state), np.zeros(2))
        norm = np.linalg.norm(Qp.matrix)
        dev = float(np.linalg.norm(Qf - Qp.matrix) / norm) if norm > 0 else float(np.linalg.norm(Qf))
        closed = qfim_two_mode_lossy_closed_form(r, eta).matrix[0, 0] if eta > 0 else 0.0
        return [
            {
                "r": r,
                "eta": eta,
                "n_max": n_max,
                "tail_mass": fock.tail_mass,
                "Q_fock_entry": float(Qf[0, 0]),
                "Q_phase_space_entry": float(Qp.matrix[0, 0]),
                "max_rel_dev": dev,
                "fock_ratio_to_closed": float(Qf[0, 0] / closed) if closed > 0 else None,
                "convention": Qp.convention,
            }
        ]

    return run_grid(cfg.grid(), one, threads)


COMMANDS = {
    "spectrum": run_spectrum,
    "privacy-sweep": run_privacy_sweep,
    "compare-states": run_compare_states,
    "two-mode": run_two_mode,
    "protocol-sim": run_protocol_sim,
    "oracle-check": run_oracle_check,
}
