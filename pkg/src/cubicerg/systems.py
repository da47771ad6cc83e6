"""Concrete dynamical systems, Heisenberg group arithmetic and factor maps.

Four systems are realized:

* ``Rotation``     -- x -> x + alpha on the d-torus
* ``SkewProduct``  -- (x, y) -> (x + alpha, y + x) on the 2-torus
* ``Doubling``     -- x -> 2x mod 1, realized as a shift on a seeded bit stream
* ``Heisenberg``   -- left translation by a = (alpha, beta, gamma) on G/Gamma,
  G the upper unipotent 3x3 real matrices and Gamma its integer points

Phase-space points are plain float arrays (shape ``(d,)``); orbits are
arrays of shape ``(L, d)``. Every coordinate of a returned point lies in
[0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence, Union

import numpy as np

SQRT2_M1 = math.sqrt(2.0) - 1.0
SQRT3_M1 = math.sqrt(3.0) - 1.0
SQRT5_M2 = math.sqrt(5.0) - 2.0

# A float whose exact binary denominator is at most this is a short dyadic
# rational and cannot stand in for an irrational parameter.
MIN_IRRATIONAL_DENOMINATOR = 2**32

DEFAULT_PRECISION = 48


class NilElement(NamedTuple):
    """Element of the Heisenberg group.

    ``x`` is the upper-left entry, ``y`` the lower-right entry and ``z`` the
    corner of the unipotent matrix. Fields may be numpy arrays, in which
    case every operation below acts elementwise.
    """

    x: float
    y: float
    z: float


class NilPoint(NamedTuple):
    """Fundamental-domain representative of a coset g*Gamma, coordinates in [0, 1)."""

    x: float
    y: float
    z: float


def _wrap_unit(a):
    """Reduce mod 1, mapping values that round up to 1.0 back to 0.0."""
    r = np.mod(a, 1.0)
    return np.where(r >= 1.0, 0.0, r)


_SPLIT = 2.0**27 + 1.0


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def frac_mul(n, a):
    """(n * a) mod 1 for integer-valued n, without rounding the large product.

    Dekker's two-product gives n*a = p + err exactly; p mod 1 is exact in
    floating point, so only the final additions round.
    """
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=float)
    p = n * a
    nh, nl = _split(n)
    ah, al = _split(a)
    err = ((nh * ah - p) + nh * al + nl * ah) + nl * al
    return _wrap_unit(np.mod(p, 1.0) + err)


def check_irrational(value: float, name: str = "parameter") -> float:
    """Reject floats that are dyadic rationals with a short denominator."""
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if Fraction(v).denominator < MIN_IRRATIONAL_DENOMINATOR:
        raise ValueError(
            f"{name}={v!r} is a dyadic rational with denominator "
            f"{Fraction(v).denominator} < 2**32; it cannot serve as an irrational"
        )
    return v


# ---------------------------------------------------------------------------
# system descriptors


@dataclass(frozen=True)
class Rotation:
    alpha: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        if len(self.alpha) < 1:
            raise ValueError("Rotation needs dimension d >= 1")

    @property
    def dim(self) -> int:
        return len(self.alpha)

    def validate_irrational(self):
        for j, a in enumerate(self.alpha):
            check_irrational(a, f"alpha[{j}]")


@dataclass(frozen=True)
class SkewProduct:
    alpha: float

    dim = 2

    def validate_irrational(self):
        check_irrational(self.alpha, "alpha")


@dataclass(frozen=True)
class Doubling:
    seed: int = 0
    precision: int = DEFAULT_PRECISION

    dim = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 16 <= int(self.precision) <= 60:
            raise ValueError(f"precision J must lie in [16, 60], got {self.precision}")

    def validate_irrational(self):
        pass


@dataclass(frozen=True)
class Heisenberg:
    alpha: float = SQRT2_M1
    beta: float = SQRT3_M1
    gamma: float = 0.0

    dim = 3

    @property
    def translation(self) -> NilElement:
        return NilElement(self.alpha, self.beta, self.gamma)

    def validate_irrational(self):
        # gamma plays no role in minimality; only the base rotation must be irrational
        check_irrational(self.alpha, "alpha")
        check_irrational(self.beta, "beta")


@dataclass(frozen=True)
class Trivial:
    """One-point system; the factor of a system with no nontrivial Host-Kra factor."""

    dim = 0

    def validate_irrational(self):
        pass


System = Union[Rotation, SkewProduct, Doubling, Heisenberg, Trivial]


# ---------------------------------------------------------------------------
# Heisenberg group


def heis_mul(g: NilElement, h: NilElement) -> NilElement:
    return NilElement(g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y)


def heis_power(a: NilElement, n) -> NilElement:
    """Closed form of ``a**n`` for integer n >= 0 (n may be an integer array)."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("heis_power needs n >= 0")
    nf = n.astype(float)
    return NilElement(
        nf * a.x,
        nf * a.y,
        nf * a.z + (nf * (nf - 1.0) / 2.0) * (a.x * a.y),
    )


def heis_reduce(g: NilElement) -> NilPoint:
    """Return the representative of g*Gamma in [0,1)^3.

    Right multiplication by gamma = (p, q, r) sends (x, y, z) to
    (x + p, y + q, z + r + x*q); q is fixed first, then p, then r.
    """
    x, y, z = (np.asarray(c, dtype=float) for c in g)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise ValueError("heis_reduce received non-finite coordinates")
    q = -np.floor(y)
    # y + q can round up to 1.0; wrapping y then needs the matching q for z
    q = np.where(y + q >= 1.0, q - 1.0, q)
    p = -np.floor(x)
    z2 = z + x * q
    r = -np.floor(z2)
    out = (_wrap_unit(x + p), _wrap_unit(y + q), _wrap_unit(z2 + r))
    if out[0].ndim == 0:
        return NilPoint(float(out[0]), float(out[1]), float(out[2]))
    return NilPoint(*out)


# ---------------------------------------------------------------------------
# orbits


def _as_point(system: System, start) -> np.ndarray:
    p = np.atleast_1d(np.asarray(start, dtype=float))
    if p.ndim != 1 or p.shape[0] != system.dim:
        raise ValueError(
            f"{type(system).__name__} expects a point of dimension {system.dim}, "
            f"got shape {np.shape(start)}"
        )
    if not np.all(np.isfinite(p)):
        raise ValueError("start point has non-finite coordinates")
    return p


def doubling_bits(system: Doubling, start: float, nbits: int) -> np.ndarray:
    """First ``nbits`` bits of the stream realizing the doubling orbit of ``start``.

    The leading J bits are the binary digits of ``start`` truncated to J
    bits; the remainder come from a PCG64 generator seeded with
    ``system.seed``. Drawing whole 64-bit words keeps every stream a prefix
    of any longer one.
    """
    J = system.precision
    head = int(math.floor(float(start) % 1.0 * 2.0**J))
    bits = np.zeros(max(nbits, J), dtype=np.uint8)
    bits[:J] = [(head >> (J - 1 - j)) & 1 for j in range(J)]
    tail = max(nbits, J) - J
    if tail:
        words = np.random.default_rng(system.seed).integers(
            0, 2**64, size=(tail + 63) // 64, dtype=np.uint64
        )
        tail_bits = np.unpackbits(words.astype(">u8").view(np.uint8))
        bits[J:] = tail_bits[:tail]
    return bits[:nbits]


def _doubling_orbit(system: Doubling, x0: float, L: int) -> np.ndarray:
    J = system.precision
    bits = doubling_bits(system, x0, L + J).astype(float)
    vals = np.zeros(L)
    # most significant last keeps the partial sums exact for J <= 53
    for j in range(J - 1, -1, -1):
        vals += bits[j : j + L] * 2.0 ** (-j - 1)
    return vals[:, None]


def orbit(system: System, start, L: int) -> np.ndarray:
    """Points T^n(start), n = 0..L-1, as an array of shape (L, dim)."""
    return orbits(system, _as_point(system, start)[None, :], L)[0]


def orbits(system: System, starts, L: int) -> np.ndarray:
    """Orbits of every row of ``starts`` (shape (P, dim)); result has shape (P, L, dim)."""
    if int(L) < 1:
        raise ValueError(f"orbit length must be >= 1, got {L}")
    L = int(L)
    p = np.asarray(starts, dtype=float)
    if p.ndim != 2 or p.shape[1] != system.dim:
        raise ValueError(
            f"{type(system).__name__} expects points of dimension {system.dim}, got shape {p.shape}"
        )
    n = np.arange(L, dtype=float)[None, :]

    if isinstance(system, Rotation):
        return _wrap_unit(p[:, None, :] + frac_mul(n[..., None], np.asarray(system.alpha)))
    if isinstance(system, SkewProduct):
        x, y = p[:, :1], p[:, 1:]
        a = system.alpha
        tri = n * (n - 1.0) / 2.0  # exact below 2**53
        return np.stack(
            [_wrap_unit(x + frac_mul(n, a)), _wrap_unit(y + frac_mul(n, x) + frac_mul(tri, a))], axis=-1
        )
    if isinstance(system, Heisenberg):
        g0 = NilElement(p[:, :1], p[:, 1:2], p[:, 2:])
        g = heis_mul(heis_power(system.translation, np.arange(L)[None, :]), g0)
        return np.stack(heis_reduce(g), axis=-1)
    if isinstance(system, Doubling):
        return np.stack([_doubling_orbit(system, x0, L) for x0 in p[:, 0]])
    if isinstance(system, Trivial):
        return np.zeros((p.shape[0], L, 0))
    raise TypeError(f"unknown system {system!r}")


def step(system: System, points) -> np.ndarray:
    """Apply T once to each row of ``points`` (shape (P, dim)).

    For the doubling map this is the floating-point map x -> 2x mod 1, which
    is only meaningful for a single application.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(system, Rotation):
        return _wrap_unit(pts + np.asarray(system.alpha)[None, :])
    if isinstance(system, SkewProduct):
        return _wrap_unit(np.stack([pts[:, 0] + system.alpha, pts[:, 1] + pts[:, 0]], axis=1))
    if isinstance(system, Heisenberg):
        g = heis_mul(system.translation, NilElement(pts[:, 0], pts[:, 1], pts[:, 2]))
        return np.stack(heis_reduce(g), axis=1)
    if isinstance(system, Doubling):
        return _wrap_unit(2.0 * pts)
    if isinstance(system, Trivial):
        return pts
    raise TypeError(f"unknown system {system!r}")


# ---------------------------------------------------------------------------
# factor maps

IDENTITY = "identity"
COORDINATE_DROP = "coordinate_drop"
TRIVIAL = "trivial"


@dataclass(frozen=True)
class FactorProjection:
    """Projection of ``source`` onto its Host-Kra factor of order ``level``.

    ``target_kind`` and ``keep`` (number of leading coordinates kept) are
    derived from the source kind and level.
    """

    source: System
    level: int

    def __post_init__(self):
        self._resolve()

    def _resolve(self) -> tuple[str, int]:
        s, lvl = self.source, int(self.level)
        if lvl < 1:
            raise ValueError(f"factor level must be >= 1, got {self.level}")
        if isinstance(s, Rotation):
            return IDENTITY, s.dim
        if isinstance(s, SkewProduct):
            return (COORDINATE_DROP, 1) if lvl == 1 else (IDENTITY, 2)
        if isinstance(s, Doubling):
            return TRIVIAL, 0
        if isinstance(s, Heisenberg):
            return (COORDINATE_DROP, 2) if lvl == 1 else (IDENTITY, 3)
        raise ValueError(f"no known factor projection for {type(s).__name__} at level {lvl}")

    @property
    def target_kind(self) -> str:
        return self._resolve()[0]

    @property
    def keep(self) -> int:
        return self._resolve()[1]

    @property
    def target(self) -> System:
        """The factor system Z_level with its own dynamics."""
        kind, _ = self._resolve()
        s = self.source
        if kind == IDENTITY:
            return s
        if kind == TRIVIAL:
            return Trivial()
        if isinstance(s, SkewProduct):
            return Rotation((s.alpha,))
        return Rotation((s.alpha, s.beta))


def apply_projection(proj: FactorProjection, p) -> np.ndarray:
    """Image of a point (shape (dim,)) or of rows of points (shape (P, dim))."""
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (proj.source.dim,):
        raise ValueError(
            f"point of shape {arr.shape} is not valid for {type(proj.source).__name__}"
        )
    return arr[..., : proj.keep]


def lattice_grid(dim: int, per_dim: int, jitter_seed: int | None = None) -> np.ndarray:
    """Regular lattice {k/per_dim}^dim in lexicographic order, optionally jittered.

    Jitter adds an independent uniform offset in [0, 1/per_dim) per coordinate.
    """
    axes = [np.arange(per_dim) / per_dim] * dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        pts = _wrap_unit(pts + rng.uniform(0.0, 1.0 / per_dim, size=pts.shape))
    return pts


def circle_distance(a, b) -> np.ndarray:
    """Max over coordinates of min(|a-b|, 1-|a-b|)."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.max(np.minimum(d, 1.0 - d), axis=-1)
