"""Single-diode model of a photovoltaic module.

The module is described by the five-parameter single-diode equivalent
circuit: a photocurrent source, one diode, a series resistance and a
shunt resistance.  All voltages are module-level, so the thermal
voltage carries the number of series-connected cells.  The implicit
characteristic is solved with a damped-free Newton iteration that is
globally convergent for this equation (the residual is concave and
strictly decreasing in the diode voltage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import Boltzmann, elementary_charge

from .errors import ConvergenceFailure, NonPositivePhotocurrent

NEWTON_MAX_ITER = 200
# tight enough that solver noise stays below the array-level voltage
# tolerances; Newton is quadratic here so the extra cost is ~1 iteration
RESIDUAL_RTOL = 1e-12


@dataclass(frozen=True)
class EnvCondition:
    """Operating environment of a module or array.

    Attributes:
        g: plane-of-array irradiance in W/m^2, non-negative.
        t: cell temperature in kelvin, positive.
    """

    g: float
    t: float

    def __post_init__(self) -> None:
        if not (self.g >= 0.0 and math.isfinite(self.g)):
            raise ValueError(f"irradiance must be finite and non-negative, got {self.g}")
        if not (self.t > 0.0 and math.isfinite(self.t)):
            raise ValueError(f"temperature must be finite and positive, got {self.t}")


STC = EnvCondition(g=1000.0, t=298.0)


@dataclass(frozen=True)
class ModuleParams:
    """Datasheet and model parameters of one module.

    Attributes:
        isc_n: nominal short-circuit current (A) at STC.
        voc_n: nominal open-circuit voltage (V) at STC.
        impp_n: nominal maximum-power-point current (A).
        vmpp_n: nominal maximum-power-point voltage (V).
        k_v: open-circuit voltage temperature coefficient (V/K).
        k_i: short-circuit current temperature coefficient (A/K).
        n_s: number of series-connected cells.
        r_s: series resistance (ohm).
        r_p: parallel (shunt) resistance (ohm).
        n_ideal: diode ideality factor.
        e_g: bandgap energy (eV).
        t_n: nominal cell temperature (K).
        g_n: nominal irradiance (W/m^2).
        v_bypass_drop: forward drop of the ideal bypass diode (V); the
            module voltage is clamped at minus this value.
    """

    isc_n: float
    voc_n: float
    impp_n: float
    vmpp_n: float
    k_v: float
    k_i: float
    n_s: int
    r_s: float
    r_p: float
    n_ideal: float = 1.3
    e_g: float = 1.12
    t_n: float = 298.0
    g_n: float = 1000.0
    v_bypass_drop: float = 0.5


# Ideality factor fitted once with fit_ideality() so the simulated STC
# maximum power point lands on the datasheet (4.25 A, 16.5 V).
SHELL_SP70_N_IDEAL = 1.2751151151040858


def shell_sp70() -> ModuleParams:
    """Shell SP-70 datasheet parameters with the fitted ideality factor."""
    return ModuleParams(
        isc_n=4.7,
        voc_n=21.4,
        impp_n=4.25,
        vmpp_n=16.5,
        k_v=-76e-3,
        k_i=2e-3,
        n_s=36,
        r_s=0.41,
        r_p=141.0,
        n_ideal=SHELL_SP70_N_IDEAL,
    )


def thermal_voltage(params: ModuleParams, t: float) -> float:
    """Module-level thermal voltage Ns*k*T/q at temperature t (K)."""
    return params.n_s * Boltzmann * t / elementary_charge


def photocurrent(params: ModuleParams, env: EnvCondition) -> float:
    """Light-generated current at the given irradiance and temperature."""
    return (params.isc_n + params.k_i * (env.t - params.t_n)) * env.g / params.g_n


def nominal_saturation_current(params: ModuleParams) -> float:
    """Diode saturation current at nominal conditions.

    Chosen so that the closed-form open-circuit voltage at nominal
    conditions reproduces voc_n exactly.
    """
    vt_n = thermal_voltage(params, params.t_n)
    return params.isc_n / math.expm1(params.voc_n / (params.n_ideal * vt_n))


def saturation_current(params: ModuleParams, t: float) -> float:
    """Diode saturation current at cell temperature t (K).

    Scales the nominal value with the cubed temperature ratio and the
    bandgap exponential.
    """
    i0_n = nominal_saturation_current(params)
    exponent = (elementary_charge * params.e_g / (params.n_ideal * Boltzmann)) * (
        1.0 / params.t_n - 1.0 / t
    )
    return i0_n * (params.t_n / t) ** 3 * math.exp(exponent)


def open_circuit_voltage(params: ModuleParams, env: EnvCondition) -> float:
    """Closed-form open-circuit voltage, shunt current neglected.

    Raises:
        NonPositivePhotocurrent: irradiance (or the temperature term)
            leaves no light-generated current to develop a voltage.
    """
    iph = photocurrent(params, env)
    if iph <= 0.0:
        raise NonPositivePhotocurrent(
            f"photocurrent {iph:.4g} A at g={env.g}, t={env.t}; no open-circuit voltage"
        )
    i0 = saturation_current(params, env.t)
    a = params.n_ideal * thermal_voltage(params, env.t)
    return a * math.log1p(iph / i0)


def _solve_diode(c, slope: float, i0: float, a: float, scale: float):
    """Solve c - i0*expm1(w/a) - slope*w = 0 for w, elementwise.

    The residual is strictly decreasing and concave in w, so a Newton
    iteration started at or right of the root converges monotonically.
    The start point drops the linear term, which always lands on the
    right side.

    Args:
        c: constant term (A), scalar or array.
        slope: coefficient of the linear term (1/ohm), positive.
        i0: diode saturation current (A).
        a: modified thermal voltage n_ideal*Vt (V).
        scale: current scale used in the relative residual tolerance.

    Returns:
        w with the same shape as c.

    Raises:
        ConvergenceFailure: the iteration cap was hit before the
            residual dropped below tolerance.
    """
    c = np.asarray(c, dtype=float)
    w = np.where(c > 0.0, a * np.log1p(np.maximum(c, 0.0) / i0), 0.0)
    tol = RESIDUAL_RTOL * max(1.0, scale)
    for _ in range(NEWTON_MAX_ITER):
        e = i0 * np.expm1(w / a)
        resid = c - e - slope * w
        if np.all(np.abs(resid) <= tol):
            return w
        deriv = -(e + i0) / a - slope
        w = w - resid / deriv
    raise ConvergenceFailure(
        f"diode solve stalled: worst residual {np.max(np.abs(resid)):.3e} A after "
        f"{NEWTON_MAX_ITER} iterations"
    )


def module_current(params: ModuleParams, env: EnvCondition, v):
    """Module current at terminal voltage v (V); v may be an array.

    Solves the implicit single-diode characteristic to the relative
    residual tolerance.
    """
    iph = photocurrent(params, env)
    i0 = saturation_current(params, env.t)
    a = params.n_ideal * thermal_voltage(params, env.t)
    v = np.asarray(v, dtype=float)
    if params.r_s == 0.0:
        i = iph - i0 * np.expm1(v / a) - v / params.r_p
        return float(i) if i.ndim == 0 else i
    # substitute w = v + i*r_s; the diode voltage w obeys the same
    # concave scalar equation with a stiffer linear term
    c = iph + v / params.r_s
    slope = 1.0 / params.r_p + 1.0 / params.r_s
    w = _solve_diode(c, slope, i0, a, scale=iph)
    i = (w - v) / params.r_s
    return float(i) if i.ndim == 0 else i


def module_voltage(params: ModuleParams, env: EnvCondition, i):
    """Module voltage at terminal current i (A); i may be an array.

    The result is clamped at -v_bypass_drop: currents above what the
    cell stack can carry force the bypass diode into conduction.
    """
    iph = photocurrent(params, env)
    i0 = saturation_current(params, env.t)
    a = params.n_ideal * thermal_voltage(params, env.t)
    i = np.asarray(i, dtype=float)
    w = _solve_diode(iph - i, 1.0 / params.r_p, i0, a, scale=iph)
    v = np.maximum(w - i * params.r_s, -params.v_bypass_drop)
    return float(v) if v.ndim == 0 else v


def module_voltage_with_derivative(params: ModuleParams, env: EnvCondition, i):
    """Module voltage and dV/dI from a single solve.

    The derivative is exactly zero where the bypass diode clamps the
    voltage; series composition relies on that to detect flat spots.
    """
    iph = photocurrent(params, env)
    i0 = saturation_current(params, env.t)
    a = params.n_ideal * thermal_voltage(params, env.t)
    i = np.asarray(i, dtype=float)
    w = _solve_diode(iph - i, 1.0 / params.r_p, i0, a, scale=iph)
    v = w - i * params.r_s
    dw = -1.0 / ((i0 * np.expm1(w / a) + i0) / a + 1.0 / params.r_p)
    clamped = v <= -params.v_bypass_drop
    v = np.where(clamped, -params.v_bypass_drop, v)
    dv = np.where(clamped, 0.0, dw - params.r_s)
    if v.ndim == 0:
        return float(v), float(dv)
    return v, dv


def module_voltage_derivative(params: ModuleParams, env: EnvCondition, i):
    """dV/dI along the module characteristic, zero where the bypass clamps."""
    return module_voltage_with_derivative(params, env, i)[1]


def module_iv_curve(params: ModuleParams, env: EnvCondition, n_points: int = 200):
    """Sample the module characteristic on a uniform voltage grid.

    Returns:
        A (v, i) pair of arrays over [0, Voc].  Zero irradiance yields
        the degenerate all-zero curve.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if photocurrent(params, env) <= 0.0:
        return np.zeros(n_points), np.zeros(n_points)
    v = np.linspace(0.0, open_circuit_voltage(params, env), n_points)
    return v, module_current(params, env, v)


def fit_ideality(params: ModuleParams, n_lo: float = 1.0, n_hi: float = 2.0) -> float:
    """Search the ideality factor so the STC maximum power point matches.

    One-dimensional bounded minimization of the squared relative
    mismatch between the simulated and nominal (impp_n, vmpp_n).
    """
    from scipy.optimize import minimize_scalar

    env = EnvCondition(g=params.g_n, t=params.t_n)

    def mismatch(n: float) -> float:
        trial = replace(params, n_ideal=float(n))
        v = np.linspace(0.0, open_circuit_voltage(trial, env), 4001)
        i = module_current(trial, env, v)
        p = v * i
        k = int(np.argmax(p))
        return (v[k] / params.vmpp_n - 1.0) ** 2 + (i[k] / params.impp_n - 1.0) ** 2

    res = minimize_scalar(mismatch, bounds=(n_lo, n_hi), method="bounded")
    return float(res.x)
