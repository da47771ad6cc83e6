"""Cubic averages, their fast convolution kernels and convergence diagnostics.

A vertex of the cube is an l-tuple of bits ``eps != (0, ..., 0)``; its
canonical index is ``sum(eps[j] * 2**j)``, and every mapping in this module
is ordered by that index. The average of order l at size N is

    A_N = N**-l * sum_{n in [0, N)^l} prod_eps s_eps[eps . n]

so every vertex sequence must hold at least ``l*(N-1) + 1`` samples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial import cKDTree

from .observables import Observable, check_pairing
from .systems import Heisenberg, Rotation, System, _wrap_unit, circle_distance, orbit, orbits

MAX_ORDER_NAIVE = 4
FAST_ORDERS = (2, 3)
DEFAULT_SCHEDULE = tuple(2**k for k in range(5, 13))
DELTA_LADDER = tuple(2.0**-k for k in range(2, 8))

# elements per block in the naive kernel
_BLOCK = 1 << 20


class FastPathUnavailable(ValueError):
    """The fast kernel only covers l in {2, 3}; the caller must fall back to naive."""


def vertices(l: int) -> list[tuple[int, ...]]:
    """Nonzero vertices of {0,1}^l in canonical index order."""
    return [tuple((i >> j) & 1 for j in range(l)) for i in range(1, 2**l)]


def vertex_index(eps: Sequence[int]) -> int:
    return sum(int(b) << j for j, b in enumerate(eps))


def parse_vertex(key, l: int) -> tuple[int, ...]:
    """Accept a bit tuple, a bit string such as ``"101"`` or a canonical index."""
    if isinstance(key, str):
        eps = tuple(int(c) for c in key)
    elif isinstance(key, (int, np.integer)):
        eps = tuple((int(key) >> j) & 1 for j in range(l))
    else:
        eps = tuple(int(b) for b in key)
    if len(eps) != l or any(b not in (0, 1) for b in eps) or not any(eps):
        raise ValueError(f"{key!r} is not a nonzero vertex of {{0,1}}^{l}")
    return eps


def required_length(l: int, N: int) -> int:
    return l * (N - 1) + 1


def _check_order(l: int, allowed):
    if l not in allowed:
        raise ValueError(f"cube order l={l} outside the supported range {tuple(allowed)}")


def _collect(seqs: Mapping, l: int, N: int) -> dict:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    need = required_length(l, N)
    out = {}
    for key, s in seqs.items():
        out[parse_vertex(key, l)] = np.asarray(s, dtype=complex)
    for eps in vertices(l):
        if eps not in out:
            raise ValueError(f"missing sequence for vertex {''.join(map(str, eps))}")
        if out[eps].shape[-1] < need:
            raise ValueError(
                f"sequence for vertex {''.join(map(str, eps))} has length "
                f"{out[eps].shape[-1]}; l={l}, N={N} requires length >= {need}"
            )
    if len(out) != 2**l - 1:
        raise ValueError(f"expected {2**l - 1} vertex sequences, got {len(out)}")
    return out


def cubic_average_naive(seqs: Mapping, l: int, N: int) -> complex:
    """Direct l-fold enumeration of the cubic average.

    The last two indices are enumerated as a dense block, the leading ones
    by an explicit loop; partial sums are combined with numpy's pairwise
    reduction.
    """
    _check_order(l, range(2, MAX_ORDER_NAIVE + 1))
    s = _collect(seqs, l, N)
    idx = np.arange(N)
    rows = max(1, _BLOCK // N)
    partial = []
    for lead in itertools.product(range(N), repeat=l - 2):
        for r0 in range(0, N, rows):
            a = idx[r0 : r0 + rows, None]  # n_{l-1}
            b = idx[None, :]  # n_l
            block = np.ones((a.shape[0], N), dtype=complex)
            for eps, seq in s.items():
                off = sum(e * n for e, n in zip(eps[:-2], lead))
                block = block * seq[off + eps[-2] * a + eps[-1] * b]
            partial.append(block.sum())
    return complex(np.sum(np.asarray(partial)) / float(N) ** l)


def _fft_size(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _conv(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Linear convolution along the last axis, broadcasting leading axes."""
    n = u.shape[-1] + v.shape[-1] - 1
    size = _fft_size(n)
    w = np.fft.ifft(np.fft.fft(u, size) * np.fft.fft(v, size))
    return w[..., :n]


def linear_convolution(u, v) -> np.ndarray:
    """w[m] = sum_{i+j=m} u[i] v[j] via zero-padded power-of-two FFTs."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape[-1] == 0 or v.shape[-1] == 0:
        raise ValueError("linear_convolution needs nonempty inputs")
    return _conv(u, v)


def cubic_average_fast(seqs: Mapping, l: int, N: int):
    """Convolution form of the cubic average, O(N log N) for l=2, O(N^2 log N) for l=3.

    Sequences may carry leading batch axes (shape ``(..., length)``); the
    result then has the batch shape.
    """
    if l not in FAST_ORDERS:
        raise FastPathUnavailable(
            f"fast kernel supports l in {FAST_ORDERS}, got l={l}: fallback to naive required"
        )
    s = _collect(seqs, l, N)
    if l == 2:
        s10, s01, s11 = s[(1, 0)], s[(0, 1)], s[(1, 1)]
        c = _conv(s10[..., :N], s01[..., :N])
        val = np.sum(s11[..., : 2 * N - 1] * c, axis=-1) / float(N) ** 2
    else:
        val = _fast3(s, N)
    return complex(val) if np.ndim(val) == 0 else val


def _fast3(s: dict, N: int):
    batch = np.broadcast_shapes(*(a.shape[:-1] for a in s.values()))
    if batch:
        flat = {k: np.broadcast_to(a, batch + a.shape[-1:]).reshape(-1, a.shape[-1]) for k, a in s.items()}
        out = np.array([_fast3({k: a[i] for k, a in flat.items()}, N) for i in range(flat[(1, 0, 0)].shape[0])])
        return out.reshape(batch)
    # rows are indexed by n1; windows give s[n1 + j]
    s100 = s[(1, 0, 0)][:N]
    u = s[(0, 1, 0)][None, :N] * sliding_window_view(s[(1, 1, 0)][: 2 * N - 1], N)
    v = s[(0, 0, 1)][None, :N] * sliding_window_view(s[(1, 0, 1)][: 2 * N - 1], N)
    w = s[(0, 1, 1)][None, : 2 * N - 1] * sliding_window_view(s[(1, 1, 1)][: 3 * N - 2], 2 * N - 1)
    inner = np.sum(w * _conv(u, v), axis=-1)
    return complex(np.sum(s100 * inner) / float(N) ** 3)


def cubic_average(seqs: Mapping, l: int, N: int):
    """Fast kernel when available, naive enumeration otherwise."""
    if l in FAST_ORDERS:
        return cubic_average_fast(seqs, l, N)
    return cubic_average_naive(seqs, l, N)


# ---------------------------------------------------------------------------
# cubes on systems


@dataclass(frozen=True)
class CubeSpec:
    """Order ``l`` and one observable per nonzero vertex."""

    l: int
    observables: Mapping[tuple[int, ...], Observable]

    def __post_init__(self):
        _check_order(self.l, range(2, MAX_ORDER_NAIVE + 1))
        obs = {parse_vertex(k, self.l): v for k, v in dict(self.observables).items()}
        for eps in vertices(self.l):
            if eps not in obs:
                raise ValueError(f"cube is missing vertex {''.join(map(str, eps))}")
        object.__setattr__(self, "observables", {eps: obs[eps] for eps in vertices(self.l)})

    @classmethod
    def uniform(cls, l: int, obs: Observable) -> "CubeSpec":
        return cls(l, {eps: obs for eps in vertices(l)})

    def check(self, system: System) -> None:
        for eps, obs in self.observables.items():
            try:
                check_pairing(system, obs)
            except ValueError as exc:
                raise ValueError(f"vertex {''.join(map(str, eps))}: {exc}") from None

    @property
    def sup_bound(self) -> float:
        return float(np.prod([o.sup_bound for o in self.observables.values()]))


@dataclass
class SampleSeries:
    """Values of a finite-N average along a strictly increasing schedule."""

    Ns: list[int]
    values: list[complex] = field(default_factory=list)

    def __post_init__(self):
        self.Ns = [int(n) for n in self.Ns]
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise ValueError(f"schedule must be strictly increasing, got {self.Ns}")
        if len(self.values) != len(self.Ns):
            raise ValueError("SampleSeries needs one value per N")
        self.values = [complex(v) for v in self.values]

    def __len__(self):
        return len(self.Ns)

    @property
    def entries(self) -> list[tuple[int, complex]]:
        return list(zip(self.Ns, self.values))


def _check_schedule(schedule) -> list[int]:
    sched = [int(n) for n in schedule]
    if not sched or sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"schedule must be a nonempty strictly increasing list of N >= 1, got {schedule}")
    return sched


def vertex_sequences(system: System, cube: CubeSpec, start, L: int) -> dict:
    """Sample every vertex observable along one orbit of length L."""
    cube.check(system)
    pts = orbit(system, start, L)
    cache: dict[int, np.ndarray] = {}
    seqs = {}
    for eps, obs in cube.observables.items():
        if id(obs) not in cache:
            cache[id(obs)] = obs(pts)
        seqs[eps] = cache[id(obs)]
    return seqs


def _field_sequences(system: System, cube: CubeSpec, starts: np.ndarray, L: int) -> dict:
    """Vertex sequences for many starts at once, each of shape (P, L)."""
    cube.check(system)
    pts = orbits(system, starts, L)
    return {eps: obs(pts) for eps, obs in cube.observables.items()}


def dual_series(system: System, cube: CubeSpec, start, schedule=DEFAULT_SCHEDULE) -> SampleSeries:
    """Cubic averages A_N(start) for each N of the schedule."""
    sched = _check_schedule(schedule)
    seqs = vertex_sequences(system, cube, start, required_length(cube.l, sched[-1]))
    return SampleSeries(sched, [cubic_average(seqs, cube.l, N) for N in sched])


def cubic_field(system: System, cube: CubeSpec, starts, N: int) -> np.ndarray:
    """A_N at every start point; batched through the fast kernel when l = 2."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    L = required_length(cube.l, N)
    if cube.l == 2:
        return np.atleast_1d(cubic_average_fast(_field_sequences(system, cube, starts, L), 2, N))
    return np.array([cubic_average(vertex_sequences(system, cube, x, L), cube.l, N) for x in starts])


@dataclass(frozen=True)
class ConvergenceReport:
    limit_estimate: complex
    deltas: list[float]
    converged: bool


def convergence_report(series: SampleSeries, tol: float) -> ConvergenceReport:
    """Cauchy test on consecutive schedule points."""
    if len(series) < 3:
        raise ValueError(f"convergence_report needs >= 3 entries, got {len(series)}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    v = np.asarray(series.values)
    deltas = [float(d) for d in np.abs(np.diff(v))]
    return ConvergenceReport(complex(v[-1]), deltas, deltas[-1] < tol)


def uniform_deviation(system: System, cube: CubeSpec, grid, pairs) -> list[float]:
    """sup over the grid of |A_{N'}(x) - A_N(x)| for each (N, N') pair."""
    if not isinstance(system, (Rotation, Heisenberg)):
        raise ValueError(
            f"uniform_deviation needs a minimal nilsystem (Rotation or Heisenberg), "
            f"got {type(system).__name__}"
        )
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise ValueError("grid must be nonempty")
    out = []
    for N, N2 in pairs:
        a = cubic_field(system, cube, grid, int(N))
        b = cubic_field(system, cube, grid, int(N2))
        out.append(float(np.max(np.abs(b - a))))
    return out


def continuity_modulus(points, values, ladder=DELTA_LADDER) -> list[tuple[float, float]]:
    """Empirical modulus of continuity omega(delta) = max |v_i - v_j| over d(i, j) <= delta.

    The metric is the max of coordinatewise circle distances. Pairs are found
    with a periodic k-d tree, so memory scales with the number of pairs at
    the largest delta.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=complex)
    if pts.shape[0] != vals.shape[0]:
        raise ValueError(f"got {pts.shape[0]} points but {vals.shape[0]} values")
    if pts.shape[0] < 2:
        raise ValueError("continuity_modulus needs at least 2 points")
    ladder = sorted(float(d) for d in ladder)
    tree = cKDTree(_wrap_unit(pts), boxsize=1.0)
    pairs = tree.query_pairs(ladder[-1] * (1 + 1e-9) + 1e-15, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return [(d, 0.0) for d in ladder]
    i, j = pairs[:, 0], pairs[:, 1]
    dist = circle_distance(pts[i], pts[j])
    diff = np.abs(vals[i] - vals[j])
    return [(d, float(np.max(diff[dist <= d], initial=0.0))) for d in ladder]
