"""Shared parameter sets and Monte Carlo helpers for the test suite.

The two marginal pairs are calibrated-scale values for a strongly
correlated forward pair (two power markets) and a moderately correlated
one (power against gas); dependence records nearby are used throughout.
"""

import numpy as np

from sdlevy import (
    BBSDDependence,
    LSSDDependence,
    ModelSpec,
    SSDDependence,
    VGMarginal,
    joint_chf,
)

POWER_M1 = VGMarginal(0.40, 0.31, 0.02)
POWER_M2 = VGMarginal(0.61, 0.32, 0.02)
GAS_M1 = VGMarginal(0.46, 0.43, 0.08)
GAS_M2 = VGMarginal(0.24, 0.33, 0.05)

CHF_POINTS = [(1.0, 1.0), (0.5, -0.5), (-2.0, 1.0), (2.0, 2.0), (0.0, 1.5),
              (3.0, -3.0), (-1.0, -1.0), (1.5, 2.5), (-3.0, 0.5), (2.0, -1.0)]


def ssd_power(a: float = 0.99) -> ModelSpec:
    return ModelSpec.ssd(POWER_M1, POWER_M2, SSDDependence(A=41.89, a=a))


def lssd_power(a: float = 0.99, rho: float = 1.0) -> ModelSpec:
    return ModelSpec.lssd(POWER_M1, POWER_M2,
                          LSSDDependence(A=42.31, a=a, rho=rho))


def bbsd_power(a: float = 0.99, nuR: float = 0.04) -> ModelSpec:
    return ModelSpec.bbsd(POWER_M1, POWER_M2,
                          BBSDDependence(a1=0.62, a2=0.68, a=a, nuR=nuR))


def ssd_gas() -> ModelSpec:
    return ModelSpec.ssd(GAS_M1, GAS_M2, SSDDependence(A=12.36, a=0.99))


def lssd_gas() -> ModelSpec:
    return ModelSpec.lssd(GAS_M1, GAS_M2,
                          LSSDDependence(A=9.89, a=0.90, rho=0.89))


def bbsd_gas() -> ModelSpec:
    return ModelSpec.bbsd(GAS_M1, GAS_M2,
                          BBSDDependence(a1=0.78, a2=0.77, a=0.90, nuR=0.11))


def empirical_chf_gap(spec, y1, y2, points, t=1.0):
    """Worst |empirical chf - closed form| / (4 * standard error)."""
    n = y1.size
    worst = 0.0
    for u1, u2 in points:
        z = np.exp(1j * (u1 * y1 + u2 * y2))
        se = np.sqrt((z.real.var() + z.imag.var()) / n)
        err = abs(np.mean(z) - joint_chf(spec, t, u1, u2))
        worst = max(worst, err / (4.0 * se))
    return worst
