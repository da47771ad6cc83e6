"""Bounded observables on the phase spaces and their conditional expectations.

Evaluation is vectorized: ``evaluate(obs, pts)`` accepts one point of shape
``(d,)`` or a stack of shape ``(..., d)`` and returns a complex scalar or an
array of shape ``(...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .systems import (
    Doubling,
    FactorProjection,
    Heisenberg,
    Rotation,
    SkewProduct,
    System,
    Trivial,
    orbit,
)

DEFAULT_THETA_M = 8


def e(t):
    """e(t) = exp(2 pi i t)."""
    return np.exp(2j * np.pi * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class TrigPolynomial:
    """Finite sum of characters: sum_k c_k e(k . x) on the dim-torus."""

    dim: int
    terms: tuple[tuple[tuple[int, ...], complex], ...]

    def __post_init__(self):
        cleaned = []
        seen = set()
        for freq, coeff in self.terms:
            k = tuple(int(f) for f in np.atleast_1d(freq))
            if len(k) != self.dim:
                raise ValueError(f"frequency {k} does not have dimension {self.dim}")
            if k in seen:
                raise ValueError(f"duplicate frequency {k} in trigonometric polynomial")
            seen.add(k)
            cleaned.append((k, complex(coeff)))
        object.__setattr__(self, "terms", tuple(cleaned))

    @classmethod
    def from_dict(cls, dim: int, coeffs: Mapping) -> "TrigPolynomial":
        return cls(dim, tuple((np.atleast_1d(k), c) for k, c in coeffs.items()))

    @classmethod
    def character(cls, *freq: int, coeff: complex = 1.0) -> "TrigPolynomial":
        return cls(len(freq), ((freq, coeff),))

    @property
    def sup_bound(self) -> float:
        return float(sum(abs(c) for _, c in self.terms))

    @property
    def mean(self) -> complex:
        zero = (0,) * self.dim
        return sum((c for k, c in self.terms if k == zero), 0j)

    def as_dict(self) -> dict:
        return {k: c for k, c in self.terms}

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        if not isinstance(other, TrigPolynomial) or other.dim != self.dim:
            return NotImplemented
        acc = self.as_dict()
        for k, c in other.terms:
            acc[k] = acc.get(k, 0j) + c
        return TrigPolynomial(self.dim, tuple(sorted(acc.items())))

    def scale(self, a: complex) -> "TrigPolynomial":
        return TrigPolynomial(self.dim, tuple((k, a * c) for k, c in self.terms))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for k, c in self.terms:
            out = out + c * e(pts @ np.asarray(k, dtype=float))
        return out


@dataclass(frozen=True)
class ThetaObservable:
    """theta(x, y, z) = sum_{|m| <= M} exp(-pi (y+m)^2) e(z + m x) on G/Gamma.

    Invariant under right multiplication by Gamma, hence a continuous
    function on the nilmanifold. With y in [0, 1) the dropped tail is
    bounded by 4 exp(-pi (M-1)^2).
    """

    M: int = DEFAULT_THETA_M

    def __post_init__(self):
        if int(self.M) < 4:
            raise ValueError(f"theta truncation M must be >= 4, got {self.M}")

    @property
    def truncation_error(self) -> float:
        return 4.0 * math.exp(-math.pi * (self.M - 1) ** 2)

    @property
    def sup_bound(self) -> float:
        # the Gaussian sum over m is maximal at y = 0
        m = np.arange(-self.M, self.M + 1)
        return float(np.sum(np.exp(-np.pi * m.astype(float) ** 2)))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        # e(m x) by repeated multiplication; |m| <= M keeps the drift at a few ulp
        ex = e(x)
        pos = np.ones(x.shape, dtype=complex)
        out = np.exp(-np.pi * y**2) + 0j
        for m in range(1, self.M + 1):
            pos = pos * ex
            out += np.exp(-np.pi * (y + m) ** 2) * pos + np.exp(-np.pi * (y - m) ** 2) * pos.conj()
        return out * e(z)


@dataclass(frozen=True)
class TorusOnHeisenberg:
    """A trigonometric polynomial of the base coordinates (x, y) of G/Gamma."""

    poly: TrigPolynomial

    def __post_init__(self):
        if self.poly.dim != 2:
            raise ValueError("TorusOnHeisenberg needs a 2-dimensional trigonometric polynomial")

    @property
    def sup_bound(self) -> float:
        return self.poly.sup_bound

    def __call__(self, pts):
        return self.poly(np.asarray(pts, dtype=float)[..., :2])


@dataclass(frozen=True)
class Constant:
    value: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    @property
    def sup_bound(self) -> float:
        return abs(self.value)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], self.value, dtype=complex)


Observable = Union[TrigPolynomial, ThetaObservable, TorusOnHeisenberg, Constant]


def check_pairing(system: System, obs: Observable) -> None:
    """Raise ValueError unless ``obs`` is a function on ``system``'s phase space."""
    if isinstance(obs, Constant):
        return
    if isinstance(obs, TrigPolynomial):
        if isinstance(system, (Rotation, SkewProduct, Doubling)) and obs.dim == system.dim:
            return
        raise ValueError(
            f"trigonometric polynomial of dimension {obs.dim} is not valid on "
            f"{type(system).__name__} (dimension {system.dim})"
        )
    if isinstance(obs, (ThetaObservable, TorusOnHeisenberg)):
        if isinstance(system, Heisenberg):
            return
        raise ValueError(f"{type(obs).__name__} is only valid on the Heisenberg nilsystem")
    raise TypeError(f"unknown observable {obs!r}")


def evaluate(obs: Observable, p):
    pts = np.asarray(p, dtype=float)
    if pts.ndim == 1:
        return complex(obs(pts[None, :])[0])
    return obs(pts)


def sample_sequence(system: System, obs: Observable, start, L: int) -> np.ndarray:
    """The sequence n -> obs(T^n start), n < L."""
    check_pairing(system, obs)
    return obs(orbit(system, start, L))


def conditional_expectation(system: System, level: int, obs: Observable) -> Observable:
    """E(obs | Z_level) written as an observable on the factor system.

    Composing the result with ``apply_projection`` gives the conditional
    expectation on the original phase space. Coefficients are filtered
    exactly; no quadrature is involved.
    """
    proj = FactorProjection(system, level)
    check_pairing(system, obs)
    if isinstance(obs, Constant):
        return obs
    if isinstance(system, Rotation):
        return obs
    if isinstance(system, Doubling):
        return Constant(obs.mean)
    if isinstance(system, SkewProduct):
        if proj.target_kind != "coordinate_drop":
            return obs
        kept = tuple(((k[0],), c) for k, c in obs.terms if k[1] == 0)
        return TrigPolynomial(1, kept)
    if isinstance(system, Heisenberg):
        if proj.target_kind != "coordinate_drop":
            return obs
        if isinstance(obs, TorusOnHeisenberg):
            return obs.poly
        # theta transforms by e(t) under z -> z + t, so its fiber average vanishes
        return Constant(0.0)
    raise ValueError(f"no conditional expectation for {type(system).__name__} at level {level}")


def lipschitz_constant(obs: Observable) -> float:
    """Lipschitz bound w.r.t. the max-coordinate circle metric (trig polynomials)."""
    if isinstance(obs, Constant):
        return 0.0
    poly = obs.poly if isinstance(obs, TorusOnHeisenberg) else obs
    if not isinstance(poly, TrigPolynomial):
        raise ValueError(f"no closed-form Lipschitz constant for {type(obs).__name__}")
    return 2 * np.pi * sum(sum(abs(f) for f in k) * abs(c) for k, c in poly.terms)
