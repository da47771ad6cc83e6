"""Nilsequence-weighted one-parameter averages and their limit fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .averaging import SampleSeries, _check_schedule, continuity_modulus, DELTA_LADDER
from .observables import Observable, ThetaObservable, TorusOnHeisenberg, check_pairing, e
from .systems import Heisenberg, NilElement, Rotation, System, heis_power, heis_reduce, orbit


@dataclass(frozen=True)
class HeisenbergNilseq:
    """w(n) = g0(y0^n Gamma)."""

    y0: NilElement
    g0: Observable

    def __post_init__(self):
        object.__setattr__(self, "y0", NilElement(*(float(c) for c in self.y0)))
        if not isinstance(self.g0, (ThetaObservable, TorusOnHeisenberg)):
            raise ValueError(
                f"nilsequence observable must be ThetaObservable or TorusOnHeisenberg, "
                f"got {type(self.g0).__name__}"
            )

    @property
    def sup_bound(self) -> float:
        return self.g0.sup_bound


@dataclass(frozen=True)
class PolynomialPhase:
    """w(n) = e(c0 + c1 n + c2 n^2 + ...)."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    sup_bound = 1.0


WeightSpec = Union[HeisenbergNilseq, PolynomialPhase]


def weight_sequence(w: WeightSpec, L: int) -> np.ndarray:
    if int(L) < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    n = np.arange(int(L))
    if isinstance(w, PolynomialPhase):
        nf = n.astype(float)
        # Horner form
        phase = np.zeros(int(L))
        for c in reversed(w.coeffs):
            phase = phase * nf + c
        return e(phase)
    if isinstance(w, HeisenbergNilseq):
        pts = heis_reduce(heis_power(w.y0, n))
        return w.g0(np.stack(pts, axis=-1))
    raise TypeError(f"unknown weight {w!r}")


def ww_average(fseq, wseq, N: int) -> complex:
    """(1/N) sum_{n<N} fseq[n] wseq[n]."""
    fseq = np.asarray(fseq, dtype=complex)
    wseq = np.asarray(wseq, dtype=complex)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if fseq.shape[-1] < N or wseq.shape[-1] < N:
        raise ValueError(
            f"sequences of length {fseq.shape[-1]} and {wseq.shape[-1]} are shorter than N={N}"
        )
    val = np.sum(fseq[..., :N] * wseq[..., :N], axis=-1) / N
    return complex(val) if np.ndim(val) == 0 else val


@dataclass
class WWField:
    points: np.ndarray
    series: list[SampleSeries]
    modulus: list[tuple[float, float]] = field(default_factory=list)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([s.values[-1] for s in self.series])


def ww_limit_field(system: System, f0: Observable, w: WeightSpec, grid, schedule, ladder=DELTA_LADDER) -> WWField:
    """Weighted averages over a grid of starts along a schedule, plus the
    continuity modulus of the largest-N estimates."""
    if not isinstance(system, (Rotation, Heisenberg)):
        raise ValueError(
            f"Wiener-Wintner limits need a minimal uniquely ergodic system "
            f"(Rotation or Heisenberg), got {type(system).__name__}"
        )
    check_pairing(system, f0)
    sched = _check_schedule(schedule)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    wseq = weight_sequence(w, sched[-1])
    series = []
    for x in grid:
        fseq = f0(orbit(system, x, sched[-1]))
        series.append(SampleSeries(sched, [ww_average(fseq, wseq, N) for N in sched]))
    out = WWField(grid, series)
    if grid.shape[0] >= 2:
        out.modulus = continuity_modulus(grid, out.estimates, ladder)
    return out
