"""Curve translation to other irradiance/temperature conditions.

Implements the three classic correction procedures plus the revised
second one: M1 shifts current by the irradiance ratio and the thermal
coefficients, M2 scales current and corrects voltage through the
irradiance logarithm, M2new additionally re-references the
open-circuit voltage term to 25 degC, and M3 interpolates affinely
between two measured curves.  These serve as the non-learning
baseline against the graphical-feature classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arraysim import IVCurve
from .errors import LengthMismatch, NoVocCrossing, ZeroIrradiance
from .pvmodule import EnvCondition

CELSIUS_OFFSET = 273.15


@dataclass(frozen=True)
class CorrectionFactors:
    """Device-specific correction coefficients.

    Attributes:
        alpha: absolute current temperature coefficient (A/K).
        beta: absolute voltage temperature coefficient (V/K).
        alpha_rel: relative current temperature coefficient (1/K).
        beta_rel: relative voltage temperature coefficient (1/K).
        r_s: internal series resistance seen at the curve terminals (ohm).
        kappa: curve correction factor (ohm/K).
        a_irr: irradiance correction factor for the Voc logarithm term.
    """

    alpha: float = 0.0
    beta: float = 0.0
    alpha_rel: float = 0.0
    beta_rel: float = 0.0
    r_s: float = 0.0
    kappa: float = 0.0
    a_irr: float = 0.0


def curve_isc(curve: IVCurve) -> float:
    """Short-circuit current read off the curve at v = 0."""
    return float(np.interp(0.0, curve.v, curve.i))


def curve_voc(curve: IVCurve) -> float:
    """Open-circuit voltage: the zero crossing of the current trace.

    Raises:
        NoVocCrossing: the curve never reaches zero current.
    """
    below = np.nonzero(curve.i <= 0.0)[0]
    if below.size == 0:
        raise NoVocCrossing("curve current never crosses zero")
    k = int(below[0])
    if k == 0:
        return float(curve.v[0])
    i0, i1 = curve.i[k - 1], curve.i[k]
    v0, v1 = curve.v[k - 1], curve.v[k]
    return float(v0 + (v1 - v0) * i0 / (i0 - i1))


def correct_m1(curve: IVCurve, to_env: EnvCondition,
               factors: CorrectionFactors) -> IVCurve:
    """Additive correction: current shifts with irradiance and temperature.

    Raises:
        ZeroIrradiance: the source curve was taken at zero irradiance.
    """
    g1 = curve.env.g
    if g1 == 0.0:
        raise ZeroIrradiance("source curve irradiance is zero")
    dt = to_env.t - curve.env.t
    isc = curve_isc(curve)
    i2 = curve.i + isc * (to_env.g / g1 - 1.0) + factors.alpha * dt
    v2 = (curve.v - factors.r_s * (i2 - curve.i)
          - factors.kappa * i2 * dt + factors.beta * dt)
    return IVCurve(v=v2, i=i2, env=to_env)


def _m2_common(curve: IVCurve, to_env: EnvCondition,
               factors: CorrectionFactors, voc_term: float) -> IVCurve:
    g1 = curve.env.g
    if g1 == 0.0 or to_env.g == 0.0:
        raise ZeroIrradiance("multiplicative correction needs nonzero irradiances")
    dt = to_env.t - curve.env.t
    i2 = curve.i * (1.0 + factors.alpha_rel * dt) * (to_env.g / g1)
    v2 = (curve.v + voc_term * (factors.beta_rel * dt + factors.a_irr * math.log(to_env.g / g1))
          - factors.r_s * (i2 - curve.i) - factors.kappa * i2 * dt)
    return IVCurve(v=v2, i=i2, env=to_env)


def correct_m2(curve: IVCurve, to_env: EnvCondition,
               factors: CorrectionFactors) -> IVCurve:
    """Multiplicative correction with relative coefficients."""
    return _m2_common(curve, to_env, factors, curve_voc(curve))


def correct_m2new(curve: IVCurve, to_env: EnvCondition,
                  factors: CorrectionFactors) -> IVCurve:
    """M2 with the Voc term re-referenced to a 25 degC cell temperature."""
    t1_c = curve.env.t - CELSIUS_OFFSET
    voc_term = curve_voc(curve) * (1.0 + factors.beta_rel * (25.0 - t1_c))
    return _m2_common(curve, to_env, factors, voc_term)


def correct_m3(curve_1: IVCurve, curve_2: IVCurve,
               gamma: float) -> tuple[IVCurve, EnvCondition]:
    """Affine interpolation between two curves sampled at equal length.

    gamma = 0 reproduces the first curve, gamma = 1 the second; the
    returned environment interpolates the same way.

    Raises:
        LengthMismatch: the curves are not on a common index grid.
    """
    if len(curve_1) != len(curve_2):
        raise LengthMismatch(
            f"curves have {len(curve_1)} and {len(curve_2)} points")
    # two-sided blend: exact at gamma = 0 and at gamma = 1, where the
    # one-sided a + gamma*(b - a) form would pick up a rounding error
    w1, w2 = 1.0 - gamma, gamma
    v3 = w1 * curve_1.v + w2 * curve_2.v
    i3 = w1 * curve_1.i + w2 * curve_2.i
    env3 = EnvCondition(
        g=w1 * curve_1.env.g + w2 * curve_2.env.g,
        t=w1 * curve_1.env.t + w2 * curve_2.env.t,
    )
    return IVCurve(v=v3, i=i3, env=env3), env3


PROCEDURES = {
    "m1": correct_m1,
    "m2": correct_m2,
    "m2new": correct_m2new,
}


def default_factors_shell_sp70_array(n_series: int = 3, n_parallel: int = 2) -> CorrectionFactors:
    """Datasheet-derived coefficients scaled to the array terminals."""
    isc_n, voc_n = 4.7, 21.4
    k_i, k_v = 2e-3, -76e-3
    return CorrectionFactors(
        alpha=k_i * n_parallel,
        beta=k_v * n_series,
        alpha_rel=k_i / isc_n,
        beta_rel=k_v / voc_n,
        r_s=0.41 * n_series / n_parallel,
        kappa=0.0,
        a_irr=0.06,
    )
