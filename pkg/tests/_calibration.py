"""Thresholds frozen from pilot brute-force runs (observed envelope x 2).

The start points are drawn in the same order as in the pilot campaign, so
the fixtures here reproduce the calibration runs exactly.
"""

import numpy as np

from cubicerg.averaging import CubeSpec
from cubicerg.observables import ThetaObservable, TorusOnHeisenberg, TrigPolynomial

T = TrigPolynomial

PILOT_SEED = 2024
PILOT_SCHEDULE = [2**k for k in range(5, 13)]

# pilot max over 16 starts at N = 4096: 0.009741
SKEW_FACTOR_GAP = 0.0195
# pilot max |A_4096| over 16 starts: 0.012811
HEIS_THETA_ABS = 0.0257
# pilot max |A_4096| over 16 starts, seed 7: 0.000268
DOUBLING_ABS = 5.4e-4
# pilot max |average| at N = 2**14 over 4 starts: 0.004523
WW_QUADRATIC_ABS = 0.00905


def pilot_starts():
    """Start points of the four pilot cases, in campaign order."""
    rng = np.random.default_rng(PILOT_SEED)
    return {
        "skew": rng.random((16, 2)),
        "heis": rng.random((16, 3)),
        "doubling": rng.random((16, 1)),
        "quadratic": rng.random((4, 1)),
    }


def skew_cube() -> CubeSpec:
    return CubeSpec(2, {
        (1, 0): T(2, (((1, 0), 1), ((0, 1), 0.5))),
        (0, 1): T(2, (((1, 0), 1), ((1, 1), 0.5))),
        (1, 1): T(2, (((-1, 0), 1), ((0, -1), 0.5))),
    })


def heis_theta_cube() -> CubeSpec:
    return CubeSpec(2, {
        (1, 0): ThetaObservable(),
        (0, 1): TorusOnHeisenberg(T.character(1, 0)),
        (1, 1): TorusOnHeisenberg(T.character(-1, 0)),
    })


def heis_mixed_cube() -> CubeSpec:
    """Cube used for the uniform-convergence check on the 16^3 grid."""
    return CubeSpec(2, {
        (1, 0): ThetaObservable(),
        (0, 1): TorusOnHeisenberg(T.character(1, 1)),
        (1, 1): TorusOnHeisenberg(T(2, (((-1, 0), 1), ((0, -1), 1)))),
    })
