"""Scenario configuration: YAML loading, validation and hashing.

A configuration is a mapping with these top-level keys (all optional except
``version``)::

    version: 1
    state: {kind: tree, depth: 2, r: 1.0}
    channels:
      - {type: displace, alpha: [0.5, 0.0]}
      - {type: loss, eta: 0.9}
    target: average            # or an explicit vector, normalised on load
    sweep: {r: [0.5, 1.0], eta: {start: 0.5, stop: 1.0, num: 6}}
    qfim_route: auto           # auto | derivative | exact
    seed: 0
    output: results.csv
    protocol: {shots: 100000, trials: 2000, mode: known, theta: [0.01, 0.03]}
    oracle: {n_max: 40}

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

STATE_KEYS = {
    "tree": {"kind", "depth", "r"},
    "two-mode": {"kind", "r"},
    "product": {"kind", "modes", "r"},
    "cluster": {"kind", "modes", "r", "g", "edges", "squeezed_quadrature"},
}
SWEEP_AXES = ("depth", "r", "eta", "alpha", "g")
TOP_KEYS = {
    "version",
    "state",
    "channels",
    "target",
    "sweep",
    "qfim_route",
    "seed",
    "output",
    "protocol",
    "oracle",
    "compare",
}
PROTOCOL_KEYS = {"shots", "trials", "mode", "theta", "sampler", "regression_deltas", "regression_repeats"}
ORACLE_KEYS = {"n_max"}
COMPARE_KEYS = {"g", "g_bracket", "g_opt_r", "modes"}
ROUTES = ("auto", "derivative", "exact")


def _fail(msg: str):
    raise ConfigError(msg)


def _check_keys(section: str, data: dict, allowed: set) -> None:
    if not isinstance(data, dict):
        _fail(f"{section} must be a mapping")
    extra = set(data) - allowed
    if extra:
        _fail(f"unknown key(s) in {section}: {sorted(extra)}")


def _grid(name: str, value) -> list:
    if isinstance(value, dict):
        _check_keys(f"sweep.{name}", value, {"start", "stop", "num"})
        try:
            vals = np.linspace(float(value["start"]), float(value["stop"]), int(value["num"]))
        except KeyError as exc:
            _fail(f"sweep.{name} needs start, stop and num ({exc} missing)")
        vals = vals.tolist()
    elif isinstance(value, (list, tuple)):
        vals = list(value)
    else:
        vals = [value]
    if not vals:
        _fail(f"sweep.{name} is empty")
    if name == "depth":
        if any(int(v) != v or v < 1 for v in vals):
            _fail("sweep.depth must hold integers >= 1")
        return [int(v) for v in vals]
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        _fail(f"sweep.{name} must be numeric")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; ``raw`` keeps the normalised mapping used for hashing."""

    state: dict
    channels: tuple = ()
    target: Any = "average"
    sweep: dict = field(default_factory=dict)
    qfim_route: str = "auto"
    seed: int = 0
    output: str | None = None
    protocol: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def normalized(self) -> dict:
        return {
            "version": self.version,
            "state": self.state,
            "channels": list(self.channels),
            "target": self.target,
            "sweep": self.sweep,
            "qfim_route": self.qfim_route,
            "seed": self.seed,
            "protocol": self.protocol,
            "oracle": self.oracle,
            "compare": self.compare,
        }

    @property
    def hash(self) -> str:
        """Short SHA-256 of the canonical JSON form (output path excluded)."""
        blob = json.dumps(self.normalized(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def grid(self) -> list[dict]:
        """Cartesian product of the sweep axes in a fixed axis order."""
        axes = [(k, self.sweep[k]) for k in SWEEP_AXES if k in self.sweep]
        points = [{}]
        for name, vals in axes:
            points = [dict(p, **{name: v}) for p in points for v in vals]
        return points

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return parse_config(dict(self.normalized(), seed=int(seed), output=self.output))


def _parse_state(data) -> dict:
    if data is None:
        _fail("state section is required")
    if not isinstance(data, dict) or "kind" not in data:
        _fail("state needs a 'kind'")
    kind = data["kind"]
    if kind not in STATE_KEYS:
        _fail(f"unknown state kind {kind!r}; expected one of {sorted(STATE_KEYS)}")
    _check_keys("state", data, STATE_KEYS[kind])
    out = {"kind": kind, "r": float(data.get("r", 1.0))}
    if kind == "tree":
        depth = data.get("depth", 2)
        if int(depth) != depth or depth < 1:
            _fail("state.depth must be an integer >= 1")
        out["depth"] = int(depth)
    if kind in ("product", "cluster"):
        modes = data.get("modes", 4)
        if int(modes) != modes or modes < 1:
            _fail("state.modes must be a positive integer")
        out["modes"] = int(modes)
    if kind == "cluster":
        out["g"] = float(data.get("g", 0.88))
        edges = data.get("edges", [[k, k + 1] for k in range(out["modes"] - 1)])
        try:
            out["edges"] = [[int(a), int(b)] for a, b in edges]
        except (TypeError, ValueError):
            _fail("state.edges must be a list of index pairs")
        for a, b in out["edges"]:
            if a == b or not (0 <= a < out["modes"] and 0 <= b < out["modes"]):
                _fail(f"invalid edge ({a}, {b})")
        quad = data.get("squeezed_quadrature", "p")
        if quad not in ("x", "p"):
            _fail("state.squeezed_quadrature must be 'x' or 'p'")
        out["squeezed_quadrature"] = quad
    return out


def _parse_channels(data) -> tuple:
    if data is None:
        return ()
    if not isinstance(data, list):
        _fail("channels must be a list")
    out = []
    for k, ch in enumerate(data):
        if not isinstance(ch, dict) or "type" not in ch:
            _fail(f"channels[{k}] needs a 'type'")
        if ch["type"] == "loss":
            _check_keys(f"channels[{k}]", ch, {"type", "eta"})
            eta = np.atleast_1d(np.asarray(ch.get("eta", 1.0), dtype=float))
            if np.any(eta < 0) or np.any(eta > 1):
                _fail(f"channels[{k}].eta must lie in [0, 1]")
            out.append({"type": "loss", "eta": eta.tolist()})
        elif ch["type"] == "displace":
            _check_keys(f"channels[{k}]", ch, {"type", "alpha"})
            alpha = ch.get("alpha", [0.0])
            try:
                alpha = [float(a) for a in np.atleast_1d(alpha)]
            except (TypeError, ValueError):
                _fail(f"channels[{k}].alpha must be real numbers")
            out.append({"type": "displace", "alpha": alpha})
        else:
            _fail(f"unknown channel type {ch['type']!r}")
    return tuple(out)


def _parse_target(data):
    if data is None or data == "average":
        return "average"
    try:
        v = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        _fail("target must be 'average' or a numeric vector")
    norm = np.linalg.norm(v)
    if v.ndim != 1 or norm == 0:
        _fail("target vector must be non-zero")
    return (v / norm).tolist()


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a mapping (e.g. parsed YAML) into a :class:`ScenarioConfig`."""
    _check_keys("config", data, TOP_KEYS)
    version = data.get("version")
    if version != SCHEMA_VERSION:
        _fail(f"unsupported config version {version!r}; expected {SCHEMA_VERSION}")
    sweep_raw = data.get("sweep") or {}
    _check_keys("sweep", sweep_raw, set(SWEEP_AXES))
    sweep = {k: _grid(k, v) for k, v in sweep_raw.items()}
    route = data.get("qfim_route", "auto")
    if route not in ROUTES:
        _fail(f"qfim_route must be one of {ROUTES}")
    protocol = data.get("protocol") or {}
    _check_keys("protocol", protocol, PROTOCOL_KEYS)
    oracle = data.get("oracle") or {}
    _check_keys("oracle", oracle, ORACLE_KEYS)
    compare = data.get("compare") or {}
    _check_keys("compare", compare, COMPARE_KEYS)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        _fail("seed must be an unsigned 64-bit integer")
    return ScenarioConfig(
        state=_parse_state(data.get("state")),
        channels=_parse_channels(data.get("channels")),
        target=_parse_target(data.get("target")),
        sweep=sweep,
        qfim_route=route,
        seed=seed,
        output=data.get("output"),
        protocol=dict(protocol),
        oracle=dict(oracle),
        compare=dict(compare),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return parse_config(data)


DEFAULTS = {
    "spectrum": {
        "version": 1,
        "state": {"kind": "tree", "depth": 2, "r": 1.0},
        "sweep": {"depth": [2, 3, 4, 5, 6, 7], "r": [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0]},
    },
    "privacy-sweep": {
        "version": 1,
        "state": {"kind": "tree", "depth": 2, "r": 1.0},
        "sweep": {"r": [0.25, 0.5, 1.0, 1.5, 2.0], "eta": [1.0, 0.9, 0.7, 0.5], "alpha": [0.0, 0.5, 1.0]},
    },
    "compare-states": {
        "version": 1,
        "state": {"kind": "cluster", "modes": 4, "r": 1.0, "g": 0.88},
        "sweep": {"r": [0.5, 1.0, 1.5, 2.0, 3.0], "g": [0.0, 0.25, 0.5, 0.75, 0.88, 1.0, 1.5, 2.0]},
        "compare": {"g_bracket": [0.0, 2.0], "g_opt_r": 1.0},
    },
    "two-mode": {
        "version": 1,
        "state": {"kind": "two-mode", "r": 1.0},
        "sweep": {"r": [0.25, 0.5, 1.0, 1.5], "eta": [0.3, 0.6, 0.9, 1.0]},
    },
    "protocol-sim": {
        "version": 1,
        "state": {"kind": "two-mode", "r": 1.0},
        "sweep": {"r": [1.0], "eta": [1.0]},
        "protocol": {"shots": 100000, "trials": 2000, "mode": "known", "theta": [0.01, 0.03]},
    },
    "oracle-check": {
        "version": 1,
        "state": {"kind": "two-mode", "r": 0.5},
        "sweep": {"r": [0.25, 0.5, 0.75], "eta": [1.0, 0.6]},
        "oracle": {"n_max": 40},
    },
}


def default_config(command: str) -> ScenarioConfig:
    return parse_config(DEFAULTS[command])
