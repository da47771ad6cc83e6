import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubicerg.observables import (
    Constant,
    ThetaObservable,
    TorusOnHeisenberg,
    TrigPolynomial,
    check_pairing,
    conditional_expectation,
    e,
    evaluate,
    lipschitz_constant,
    sample_sequence,
)
from cubicerg.systems import (
    SQRT2_M1,
    Doubling,
    FactorProjection,
    Heisenberg,
    NilElement,
    Rotation,
    SkewProduct,
    apply_projection,
    heis_mul,
    heis_reduce,
)

T = TrigPolynomial
THETA_AT_ORIGIN = 1.0864348112133082


def theta_untruncated(x, y, z, M=40):
    m = np.arange(-M, M + 1)
    return complex(np.sum(np.exp(-np.pi * (y + m) ** 2) * e(z + m * x)))


def test_evaluate_examples():
    assert evaluate(Constant(2), [0.3]) == 2
    assert evaluate(T.character(1), [0.25]) == pytest.approx(1j, abs=1e-15)


@pytest.mark.parametrize("M", [4, 8, 12])
def test_theta_at_origin(M):
    assert evaluate(ThetaObservable(M), [0, 0, 0]) == pytest.approx(THETA_AT_ORIGIN, abs=1e-10)


def test_theta_constant_by_direct_sum():
    assert ThetaObservable().sup_bound == pytest.approx(THETA_AT_ORIGIN, abs=1e-15)
    assert math.fsum(math.exp(-math.pi * m * m) for m in range(-30, 31)) == pytest.approx(THETA_AT_ORIGIN, abs=1e-15)


def test_theta_rejects_small_truncation():
    with pytest.raises(ValueError):
        ThetaObservable(3)


def test_theta_gamma_invariance():
    rng = np.random.default_rng(21)
    th = ThetaObservable()
    for _ in range(500):
        g = NilElement(*rng.uniform(-3, 3, 3))
        gamma = NilElement(*map(float, rng.integers(-5, 6, 3)))
        h = heis_mul(g, gamma)
        want = theta_untruncated(*h)
        got = evaluate(th, heis_reduce(g))
        # the truncation bound is far below binary64 resolution; the rest is
        # rounding in the unreduced coordinates (observed max about 5e-14)
        assert abs(got - want) < th.truncation_error + 1e-12


@pytest.mark.parametrize("obs, dim", [
    (T(2, (((1, 0), 1), ((0, 1), 0.5j), ((3, -2), -0.25))), 2),
    (TorusOnHeisenberg(T(2, (((1, 1), 2), ((0, -1), 1j)))), 3),
    (ThetaObservable(), 3),
    (Constant(-0.5 + 0.5j), 1),
])
def test_sup_bound_holds(obs, dim):
    pts = np.random.default_rng(4).random((5000, dim))
    assert np.max(np.abs(obs(pts))) <= obs.sup_bound + 1e-12


def test_duplicate_frequencies_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        T(1, (((1,), 1), ((1,), 2)))
    with pytest.raises(ValueError, match="dimension"):
        T(2, (((1,), 1),))


@pytest.mark.parametrize("system, obs", [
    (Rotation((SQRT2_M1,)), ThetaObservable()),
    (Heisenberg(), T.character(1)),
    (Rotation((SQRT2_M1,)), T.character(1, 0)),
])
def test_pairing_mismatch_rejected(system, obs):
    with pytest.raises(ValueError):
        check_pairing(system, obs)


def test_sample_sequence_examples():
    np.testing.assert_array_equal(sample_sequence(Heisenberg(), Constant(1), (0, 0, 0), 5), np.ones(5))
    x0 = 0.123
    n = np.arange(2000)
    got = sample_sequence(Rotation((SQRT2_M1,)), T.character(1), (x0,), 2000)
    np.testing.assert_allclose(got, e(x0 + n * SQRT2_M1), atol=1e-12)
    h = Heisenberg()
    got = sample_sequence(h, TorusOnHeisenberg(T.character(1, 0)), (x0, 0.5, 0.7), 2000)
    np.testing.assert_allclose(got, e(x0 + n * h.alpha), atol=1e-10)


# -- conditional expectations --------------------------------------------------


def test_skew_expectations():
    s = SkewProduct(SQRT2_M1)
    assert conditional_expectation(s, 1, T.character(2, 0)).as_dict() == {(2,): 1}
    assert conditional_expectation(s, 1, T.character(1, 1)).as_dict() == {}
    assert conditional_expectation(s, 2, T.character(1, 1)) == T.character(1, 1)


def test_doubling_expectation():
    out = conditional_expectation(Doubling(), 1, T(1, (((0,), 0.3), ((1,), 1))))
    assert out == Constant(0.3)
    assert conditional_expectation(Doubling(), 2, T.character(1)) == Constant(0)


def test_heisenberg_expectations():
    h = Heisenberg()
    poly = T(2, (((1, 0), 1), ((0, 2), 0.5)))
    assert conditional_expectation(h, 1, TorusOnHeisenberg(poly)) == poly
    assert conditional_expectation(h, 1, ThetaObservable()) == Constant(0)
    assert conditional_expectation(h, 2, ThetaObservable()) == ThetaObservable()


def test_rotation_expectation_is_identity():
    f = T(2, (((1, 2), 1), ((0, 1), 2j)))
    assert conditional_expectation(Rotation((SQRT2_M1, 0.3)), 1, f) is f


freqs = st.tuples(st.integers(-3, 3), st.integers(-3, 3))
coeffs = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
polys = st.dictionaries(freqs, coeffs, min_size=1, max_size=6).map(lambda d: T.from_dict(2, d))


@settings(max_examples=100, deadline=None)
@given(polys)
def test_expectation_idempotent(f):
    s = SkewProduct(SQRT2_M1)
    once = conditional_expectation(s, 1, f)
    target = FactorProjection(s, 1).target
    assert conditional_expectation(target, 1, once) == once
    assert once.sup_bound <= f.sup_bound


@settings(max_examples=100, deadline=None)
@given(polys, polys, st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_expectation_linear(f, g, a):
    s = SkewProduct(SQRT2_M1)
    lhs = conditional_expectation(s, 1, f.scale(a) + g).as_dict()
    rhs = (conditional_expectation(s, 1, f).scale(a) + conditional_expectation(s, 1, g)).as_dict()
    assert lhs.keys() == rhs.keys()
    for k in lhs:
        assert lhs[k] == rhs[k]


@settings(max_examples=50, deadline=None)
@given(polys)
def test_expectation_is_fiber_average(f):
    # E(f|Z_1)(x) = int_0^1 f(x, y) dy, checked by exact quadrature over 8 nodes
    s = SkewProduct(SQRT2_M1)
    proj = FactorProjection(s, 1)
    Ef = conditional_expectation(s, 1, f)
    xs = np.array([0.1, 0.37, 0.8])
    ys = np.arange(8) / 8
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    avg = f(pts).mean(axis=1)
    np.testing.assert_allclose(Ef(apply_projection(proj, pts[:, 0])), avg, atol=1e-12)


def test_lipschitz_constant():
    assert lipschitz_constant(T(1, (((2,), 0.5), ((-1,), 1)))) == pytest.approx(2 * np.pi * 2)
    assert lipschitz_constant(Constant(3)) == 0
    with pytest.raises(ValueError):
        lipschitz_constant(ThetaObservable())
