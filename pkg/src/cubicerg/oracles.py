"""Closed forms for averages over torus rotations.

With T x = x + alpha every character average factors into geometric means
E_N(t) = (1/N) sum_{n<N} e(n t), so finite-N cubic and Wiener-Wintner
averages of trigonometric polynomials have exact expressions, and so do
their limits (E_N(t) -> [t in Z]).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .averaging import CubeSpec
from .observables import Constant, ThetaObservable, TrigPolynomial, e

MAX_SELECTIONS = 10**6
# dist(K.alpha, Z) below this (but nonzero) makes limit comparisons meaningless
NEAR_RESONANCE = 1e-6
# K.alpha + beta within this of an integer counts as exactly resonant
RESONANCE_ATOL = 1e-12

INF = math.inf


def _dist_to_int(t):
    t = np.asarray(t, dtype=float)
    return np.abs(t - np.round(t))


def dirichlet_mean(t, N: int):
    """(1/N) sum_{n<N} e(n t), via e((N-1)t/2) sin(pi N t) / (N sin(pi t))."""
    if int(N) < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    N = int(N)
    t = np.asarray(t, dtype=float)
    r = t - np.round(t)  # the mean is 1-periodic in t
    # sin(pi N r) / (N sin(pi r)) as a ratio of sincs: exact 1 at r = 0 and
    # no underflow for tiny r; sinc(r) >= 2/pi on |r| <= 1/2
    val = e((N - 1) * r / 2.0) * (np.sinc(N * r) / np.sinc(r))
    return complex(val) if val.ndim == 0 else val


def _terms(obs, dim: int):
    if isinstance(obs, Constant):
        return [((0,) * dim, obs.value)]
    if isinstance(obs, TrigPolynomial):
        if obs.dim != dim:
            raise ValueError(f"trigonometric polynomial of dimension {obs.dim} used with a {dim}-dim rotation")
        return list(obs.terms)
    raise ValueError(f"rotation oracle needs trigonometric polynomials, got {type(obs).__name__}")


def rotation_cubic_exact(cube: CubeSpec, alpha, x, N=INF):
    """Exact cubic average of trigonometric-polynomial vertices over x -> x + alpha.

    ``x`` may be one point (shape (d,), or a scalar when d = 1) or a stack
    (shape (P, d), or (P,) when d = 1). ``N=INF`` returns the limit, which
    keeps only term selections with every K_j = sum_{eps_j = 1} k_eps equal
    to zero.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    d = alpha.shape[0]
    xs = np.asarray(x, dtype=float)
    single = xs.ndim == 0 or (xs.ndim == 1 and d > 1)
    if d == 1 and xs.ndim <= 1:
        xs = xs.reshape(-1, 1)
    xs = np.atleast_2d(xs)
    if xs.ndim != 2 or xs.shape[-1] != d:
        raise ValueError(f"point dimension {xs.shape[-1]} does not match alpha dimension {d}")

    vert = list(cube.observables)
    term_lists = [_terms(cube.observables[eps], d) for eps in vert]
    count = math.prod(len(t) for t in term_lists)
    if count > MAX_SELECTIONS:
        raise ValueError(f"{count} term selections exceed the cap of {MAX_SELECTIONS}")

    limit = N == INF
    total = np.zeros(xs.shape[0], dtype=complex)
    for sel in itertools.product(*term_lists):
        ks = [np.asarray(k, dtype=np.int64) for k, _ in sel]
        coeff = math.prod(c for _, c in sel)
        if coeff == 0:
            continue
        weight = 1.0 + 0j
        for j in range(cube.l):
            K = sum((k for eps, k in zip(vert, ks) if eps[j]), np.zeros(d, dtype=np.int64))
            if limit:
                if np.any(K != 0):
                    dist = float(_dist_to_int(K @ alpha))
                    if dist < NEAR_RESONANCE:
                        raise ValueError(
                            f"near resonance: dist(K.alpha, Z) = {dist:.3g} for K = {K.tolist()}; "
                            f"limit comparison is meaningless"
                        )
                    weight = 0.0
                    break
            else:
                weight *= dirichlet_mean(float(K @ alpha), N)
        if weight == 0:
            continue
        ksum = sum(ks)
        total += coeff * weight * e(xs @ ksum.astype(float))
    return complex(total[0]) if single else total


def product_of_integrals(cube: CubeSpec) -> complex:
    """prod_eps (mean of f_eps); the limit when the characteristic factor is trivial."""
    out = 1.0 + 0j
    for eps, obs in cube.observables.items():
        if isinstance(obs, ThetaObservable):
            raise ValueError("no closed-form integral is exposed for ThetaObservable")
        if isinstance(obs, Constant):
            out *= obs.value
        elif isinstance(obs, TrigPolynomial):
            out *= obs.mean
        else:
            out *= obs.poly.mean
    return out


def ww_rotation_exact(f: TrigPolynomial, alpha: float, beta: float, x, N=INF):
    """(1/N) sum_{n<N} f(x + n alpha) e(n beta) in closed form, or its limit."""
    terms = _terms(f, 1)
    xs = np.asarray(x, dtype=float)
    total = np.zeros(xs.shape, dtype=complex)
    for (k,), c in terms:
        t = k * float(alpha) + float(beta)
        if N == INF:
            dist = float(_dist_to_int(t))
            if dist <= RESONANCE_ATOL:
                total = total + c * e(k * xs)
            elif dist < NEAR_RESONANCE:
                raise ValueError(f"near resonance: dist(k alpha + beta, Z) = {dist:.3g} for k = {k}")
        else:
            total = total + c * e(k * xs) * dirichlet_mean(t, N)
    return complex(total) if total.ndim == 0 else total


def rotation_limit_lipschitz(cube: CubeSpec, alpha) -> float:
    """Lipschitz constant 2 pi sum |sum k| |c| of the limit over surviving selections."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    d = alpha.shape[0]
    vert = list(cube.observables)
    term_lists = [_terms(cube.observables[eps], d) for eps in vert]
    total = 0.0
    for sel in itertools.product(*term_lists):
        ks = [np.asarray(k, dtype=np.int64) for k, _ in sel]
        if all(
            not np.any(sum((k for eps, k in zip(vert, ks) if eps[j]), np.zeros(d, dtype=np.int64)))
            for j in range(cube.l)
        ):
            total += float(np.sum(np.abs(sum(ks)))) * abs(math.prod(c for _, c in sel))
    return 2 * np.pi * total
