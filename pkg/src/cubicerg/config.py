"""Run configuration: a JSON document validated strictly into a ``RunConfig``.

Unknown keys are errors. Every error message names the offending field
path (``cube.vertices.11``) or, for malformed JSON, the line and column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .averaging import CubeSpec, parse_vertex, vertices, MAX_ORDER_NAIVE
from .observables import Constant, ThetaObservable, TorusOnHeisenberg, TrigPolynomial, check_pairing
from .systems import (
    SQRT2_M1,
    SQRT3_M1,
    DEFAULT_PRECISION,
    Doubling,
    Heisenberg,
    NilElement,
    Rotation,
    SkewProduct,
    _wrap_unit,
    lattice_grid,
)
from .wiener_wintner import HeisenbergNilseq, PolynomialPhase

COMMANDS = ("cubic", "dual", "ww", "verify", "uniform", "continuity")

TOLERANCE_NAMES = {
    "cubic": {"convergence"},
    "dual": {"convergence", "factor_agreement"},
    "ww": {"convergence", "lipschitz", "slack"},
    "verify": {"verify"},
    "uniform": {"monotone_slack"},
    "continuity": {"lipschitz", "slack"},
}

DEFAULT_VERIFY_TOL = 1e-9


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    system: Any
    schedule: list[int]
    points: np.ndarray
    cube: CubeSpec | None = None
    f0: Any = None
    weight: Any = None
    level: int | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str = "run"
    grid: dict | None = None
    raw: dict = field(default_factory=dict)


def _keys(obj, path: str, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"field '{path}': expected an object, got {type(obj).__name__}")
    for k in required:
        if k not in obj:
            raise ConfigError(f"field '{path}': missing required key '{k}'")
    extra = set(obj) - set(required) - set(optional)
    if extra:
        raise ConfigError(f"field '{path}': unknown key(s) {sorted(extra)}")


def _num(obj, path: str, kind=float):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"field '{path}': expected a number, got {obj!r}")
    if kind is int and not float(obj).is_integer():
        raise ConfigError(f"field '{path}': expected an integer, got {obj!r}")
    return kind(obj)


def _terms(obj, path: str, dim: int):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"field '{path}': expected a nonempty list of terms")
    out = []
    for i, t in enumerate(obj):
        p = f"{path}[{i}]"
        _keys(t, p, required=("freq",), optional=("re", "im"))
        freq = t["freq"]
        if not isinstance(freq, list) or len(freq) != dim:
            raise ConfigError(f"field '{p}.freq': expected {dim} integer frequencies, got {freq!r}")
        k = tuple(_num(f, f"{p}.freq", int) for f in freq)
        out.append((k, complex(_num(t.get("re", 0.0), f"{p}.re"), _num(t.get("im", 0.0), f"{p}.im"))))
    try:
        return TrigPolynomial(dim, tuple(out))
    except ValueError as exc:
        raise ConfigError(f"field '{path}': {exc}") from None


def parse_observable(obj, path: str, dim: int):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError(f"field '{path}': observable needs a 'type'")
    kind = obj["type"]
    if kind == "trig":
        _keys(obj, path, required=("type", "terms"))
        return _terms(obj["terms"], f"{path}.terms", dim)
    if kind == "torus_on_heisenberg":
        _keys(obj, path, required=("type", "terms"))
        return TorusOnHeisenberg(_terms(obj["terms"], f"{path}.terms", 2))
    if kind == "theta":
        _keys(obj, path, required=("type",), optional=("M",))
        try:
            return ThetaObservable(_num(obj.get("M", 8), f"{path}.M", int))
        except ValueError as exc:
            raise ConfigError(f"field '{path}': {exc}") from None
    if kind == "constant":
        _keys(obj, path, required=("type",), optional=("re", "im"))
        return Constant(complex(_num(obj.get("re", 0.0), f"{path}.re"), _num(obj.get("im", 0.0), f"{path}.im")))
    raise ConfigError(f"field '{path}.type': unknown observable type {kind!r}")


def parse_system(obj, path="system"):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"field '{path}': system needs a 'kind'")
    kind = obj["kind"]
    try:
        if kind == "rotation":
            _keys(obj, path, required=("kind",), optional=("alpha", "irrational"))
            alpha = obj.get("alpha", [SQRT2_M1])
            alpha = [alpha] if not isinstance(alpha, list) else alpha
            system = Rotation(tuple(_num(a, f"{path}.alpha") for a in alpha))
        elif kind == "skew_product":
            _keys(obj, path, required=("kind",), optional=("alpha", "irrational"))
            system = SkewProduct(_num(obj.get("alpha", SQRT2_M1), f"{path}.alpha"))
        elif kind == "doubling":
            _keys(obj, path, required=("kind",), optional=("seed", "precision"))
            system = Doubling(
                _num(obj.get("seed", 0), f"{path}.seed", int),
                _num(obj.get("precision", DEFAULT_PRECISION), f"{path}.precision", int),
            )
        elif kind == "heisenberg":
            _keys(obj, path, required=("kind",), optional=("alpha", "beta", "gamma", "irrational"))
            system = Heisenberg(
                _num(obj.get("alpha", SQRT2_M1), f"{path}.alpha"),
                _num(obj.get("beta", SQRT3_M1), f"{path}.beta"),
                _num(obj.get("gamma", 0.0), f"{path}.gamma"),
            )
        else:
            raise ConfigError(f"field '{path}.kind': unknown system kind {kind!r}")
        if obj.get("irrational", True):
            system.validate_irrational()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"field '{path}': {exc}") from None
    return system


def parse_cube(obj, system, path="cube") -> CubeSpec:
    _keys(obj, path, required=("order", "vertices"))
    l = _num(obj["order"], f"{path}.order", int)
    if not 2 <= l <= MAX_ORDER_NAIVE:
        raise ConfigError(f"field '{path}.order': order must lie in [2, {MAX_ORDER_NAIVE}], got {l}")
    verts = obj["vertices"]
    if not isinstance(verts, dict):
        raise ConfigError(f"field '{path}.vertices': expected an object keyed by vertex bit strings")
    parsed = {}
    for key, spec in verts.items():
        try:
            eps = parse_vertex(key, l)
        except ValueError as exc:
            raise ConfigError(f"field '{path}.vertices.{key}': {exc}") from None
        parsed[eps] = parse_observable(spec, f"{path}.vertices.{key}", system.dim)
    for eps in vertices(l):
        if eps not in parsed:
            raise ConfigError(f"field '{path}.vertices': missing vertex {''.join(map(str, eps))}")
    cube = CubeSpec(l, parsed)
    for eps, o in cube.observables.items():
        try:
            check_pairing(system, o)
        except ValueError as exc:
            raise ConfigError(f"field '{path}.vertices.{''.join(map(str, eps))}': {exc}") from None
    return cube


def parse_weight(obj, path="weight"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError(f"field '{path}': weight needs a 'type'")
    if obj["type"] == "polynomial_phase":
        _keys(obj, path, required=("type", "coeffs"))
        if not isinstance(obj["coeffs"], list) or not obj["coeffs"]:
            raise ConfigError(f"field '{path}.coeffs': expected a nonempty list of reals")
        return PolynomialPhase(tuple(_num(c, f"{path}.coeffs") for c in obj["coeffs"]))
    if obj["type"] == "heisenberg_nilseq":
        _keys(obj, path, required=("type", "y0", "g0"))
        y0 = obj["y0"]
        if not isinstance(y0, list) or len(y0) != 3:
            raise ConfigError(f"field '{path}.y0': expected [x, y, z]")
        g0 = parse_observable(obj["g0"], f"{path}.g0", 3)
        try:
            return HeisenbergNilseq(NilElement(*(_num(c, f"{path}.y0") for c in y0)), g0)
        except ValueError as exc:
            raise ConfigError(f"field '{path}.g0': {exc}") from None
    raise ConfigError(f"field '{path}.type': unknown weight type {obj['type']!r}")


def parse_points(obj, system, path="points"):
    dim = system.dim
    if isinstance(obj, dict):
        _keys(obj, path, required=("per_dim",), optional=("jitter_seed",))
        per_dim = _num(obj["per_dim"], f"{path}.per_dim", int)
        if not 2 <= per_dim <= 128:
            raise ConfigError(f"field '{path}.per_dim': must lie in [2, 128], got {per_dim}")
        seed = obj.get("jitter_seed")
        if seed is not None:
            seed = _num(seed, f"{path}.jitter_seed", int)
        return lattice_grid(dim, per_dim, seed), {"per_dim": per_dim, "jitter_seed": seed}
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"field '{path}': expected a nonempty list of points or a grid object")
    pts = []
    for i, p in enumerate(obj):
        p = p if isinstance(p, list) else [p]
        if len(p) != dim:
            raise ConfigError(f"field '{path}[{i}]': expected {dim} coordinates, got {len(p)}")
        pts.append([_num(c, f"{path}[{i}]") for c in p])
    return _wrap_unit(np.asarray(pts, dtype=float).reshape(-1, dim)), None


def parse_config(data: dict, command: str | None = None) -> RunConfig:
    _keys(
        data,
        "<root>",
        required=("system", "schedule"),
        optional=("command", "cube", "f0", "weight", "points", "tolerances", "output", "level"),
    )
    cmd = data.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"field 'command': config declares {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise ConfigError(f"field 'command': expected one of {COMMANDS}, got {cmd!r}")

    system = parse_system(data["system"])

    sched = data["schedule"]
    if not isinstance(sched, list) or not sched:
        raise ConfigError("field 'schedule': expected a nonempty list of N")
    sched = [_num(n, "schedule", int) for n in sched]
    if sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigError(f"field 'schedule': must be strictly increasing positive integers, got {sched}")

    cube = parse_cube(data["cube"], system) if "cube" in data else None
    f0 = parse_observable(data["f0"], "f0", system.dim) if "f0" in data else None
    if f0 is not None:
        try:
            check_pairing(system, f0)
        except ValueError as exc:
            raise ConfigError(f"field 'f0': {exc}") from None
    weight = parse_weight(data["weight"]) if "weight" in data else None
    if (f0 is None) != (weight is None):
        raise ConfigError("fields 'f0' and 'weight' must be given together")

    needs_cube = cmd in ("cubic", "dual", "uniform")
    if needs_cube and cube is None:
        raise ConfigError(f"field 'cube': required by command {cmd!r}")
    if cmd == "ww" and f0 is None:
        raise ConfigError("fields 'f0' and 'weight': required by command 'ww'")
    if cmd in ("verify", "continuity") and cube is None and f0 is None:
        raise ConfigError(f"command {cmd!r} needs either 'cube' or 'f0' + 'weight'")

    if "points" not in data:
        raise ConfigError("field 'points': missing (explicit list or {per_dim, jitter_seed})")
    points, grid = parse_points(data["points"], system)

    tols = data.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("field 'tolerances': expected an object")
    allowed = TOLERANCE_NAMES[cmd]
    for k, v in tols.items():
        if k not in allowed:
            raise ConfigError(f"field 'tolerances.{k}': unknown for command {cmd!r} (allowed: {sorted(allowed)})")
        if _num(v, f"tolerances.{k}") < 0:
            raise ConfigError(f"field 'tolerances.{k}': must be nonnegative")
    tols = {k: float(v) for k, v in tols.items()}

    level = data.get("level")
    if level is not None:
        level = _num(level, "level", int)
        if level < 1:
            raise ConfigError("field 'level': must be >= 1")
    if "factor_agreement" in tols and level is None:
        raise ConfigError("field 'level': required when tolerances.factor_agreement is set")

    output = data.get("output", "run")
    if not isinstance(output, str) or not output:
        raise ConfigError("field 'output': expected a nonempty path prefix")

    return RunConfig(
        command=cmd,
        system=system,
        schedule=sched,
        points=points,
        cube=cube,
        f0=f0,
        weight=weight,
        level=level,
        tolerances=tols,
        output=output,
        grid=grid,
        raw=data,
    )


def load_config(path, command: str | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data, command)
