"""Numerical probes without a pass/fail criterion of their own.

These pin down observed behaviour so that changes to it are noticed; they
do not assert any theorem.
"""

import numpy as np

from cubicerg.averaging import CubeSpec, convergence_report, dual_series
from cubicerg.observables import ThetaObservable
from cubicerg.systems import Heisenberg, NilElement
from cubicerg.wiener_wintner import HeisenbergNilseq, ww_limit_field


def test_theta_weighted_field_concentrates_on_identity_coset():
    # With f0 = g0 = theta and y0 = (-alpha, beta, 0), the base rotation of the
    # orbit and of the weight cancel in x only; the estimates sit near
    # int |theta|^2 = 1/sqrt(2) at the identity coset and decay to 0 at
    # points 1/64 away, so the limit field has no continuous version on
    # this slice.
    h = Heisenberg()
    th = ThetaObservable()
    w = HeisenbergNilseq(NilElement(-h.alpha, h.beta, 0.0), th)
    pts = [[0, 0, 0], [1 / 64, 0, 0], [0, 1 / 64, 0]]
    field = ww_limit_field(h, th, w, pts, [256, 1024, 4096, 16384])
    at_identity, *nearby = (np.abs(s.values) for s in field.series)
    assert np.all(np.abs(at_identity - 1 / np.sqrt(2)) < 1e-3)
    for v in nearby:
        assert v[-1] < 0.01 and v[-1] < v[0]


def test_dual_series_at_identity_coset():
    # adversarial start for the everywhere-convergence question: the orbit of
    # the identity coset; we only record that the Cauchy deltas shrink
    h = Heisenberg()
    cube = CubeSpec.uniform(2, ThetaObservable())
    s = dual_series(h, cube, (0.0, 0.0, 0.0), [2**k for k in range(5, 13)])
    r = convergence_report(s, 1.0)
    assert r.deltas[-1] < r.deltas[0]
    assert max(abs(v) for v in s.values) <= cube.sup_bound
