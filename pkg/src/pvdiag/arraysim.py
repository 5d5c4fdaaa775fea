"""Series-parallel array composition and fault injection.

An array is n_parallel_strings strings of n_series_modules modules.
Strings share the terminal voltage; module voltages within a string
add at the common string current.  Faults perturb per-module
irradiance (shading, soiling), remove modules (line-line shorts),
open strings, or add lumped series/shunt resistance at the array
terminals.  Blocking diodes, when present, stop strings from sinking
reverse current.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceFailure, EmptyEnvSeries
from .envseries import EnvSeries
from .pvmodule import (
    EnvCondition,
    ModuleParams,
    module_voltage_with_derivative,
    open_circuit_voltage,
    photocurrent,
    shell_sp70,
)


class FaultClass(enum.IntEnum):
    Healthy = 0
    LL1 = 1
    LL2 = 2
    OC = 3
    Shade1 = 4
    Shade2 = 5
    SDegradation = 6
    ADegradation = 7
    Soiling = 8
    Soiling_LL1 = 9
    Soiling_LL2 = 10
    Soiling_OC = 11
    Soiling_SDegradation = 12
    Soiling_ADegradation = 13


# the first nine classes exclude every soiling-compound fault
CASE2_CLASSES = tuple(FaultClass)[:9]
SCENARIO_CLASSES = {
    "case1_soiling": tuple(FaultClass),
    "case2_no_soiling": CASE2_CLASSES,
}

SHADING_RANGE = (0.2, 1.0)
SOILING_RANGE = (0.0, 0.1)
R_SERIES_DEG_RANGE = (1.0, 15.0)
R_SHUNT_DEG_RANGE = (20.0, 200.0)


@dataclass(frozen=True)
class ArrayConfig:
    module: ModuleParams = field(default_factory=shell_sp70)
    n_series_modules: int = 3
    n_parallel_strings: int = 2
    blocking_diodes: bool = True
    v_blocking_drop: float = 0.0

    @property
    def n_modules(self) -> int:
        return self.n_series_modules * self.n_parallel_strings


@dataclass(frozen=True)
class FaultSpec:
    """Concrete fault parameters drawn for one simulated sample.

    Fields irrelevant to the class stay at their zero values.  Shading
    and line-line shorts always sit on string 0, lowest module indices;
    soiling_loss covers all modules in string-major order.
    """

    fault_class: FaultClass
    shading_loss: tuple[float, ...] = ()
    soiling_loss: tuple[float, ...] = ()
    n_shorted: int = 0
    open_string_index: int | None = None
    r_series_deg: float = 0.0
    r_shunt_deg: float = 0.0
    rng_seed: int = 0


def sample_fault(fault_class: FaultClass, rng_seed: int,
                 n_series_modules: int = 3, n_parallel_strings: int = 2) -> FaultSpec:
    """Draw fault parameters for a class, deterministically from the seed."""
    rng = np.random.default_rng((int(rng_seed), int(fault_class)))
    n_modules = n_series_modules * n_parallel_strings
    soiling: tuple[float, ...] = ()
    base = fault_class
    if fault_class >= FaultClass.Soiling:
        soiling = tuple(rng.uniform(*SOILING_RANGE, size=n_modules))
        base = {
            FaultClass.Soiling: FaultClass.Healthy,
            FaultClass.Soiling_LL1: FaultClass.LL1,
            FaultClass.Soiling_LL2: FaultClass.LL2,
            FaultClass.Soiling_OC: FaultClass.OC,
            FaultClass.Soiling_SDegradation: FaultClass.SDegradation,
            FaultClass.Soiling_ADegradation: FaultClass.ADegradation,
        }[fault_class]
    shading: tuple[float, ...] = ()
    n_shorted = 0
    open_string = None
    r_ser = 0.0
    r_sh = 0.0
    if base == FaultClass.LL1:
        n_shorted = 1
    elif base == FaultClass.LL2:
        n_shorted = 2
    elif base == FaultClass.OC:
        open_string = 0
    elif base == FaultClass.Shade1:
        shading = (float(rng.uniform(*SHADING_RANGE)),)
    elif base == FaultClass.Shade2:
        shading = tuple(rng.uniform(*SHADING_RANGE, size=2))
    elif base == FaultClass.SDegradation:
        r_ser = float(rng.uniform(*R_SERIES_DEG_RANGE))
    elif base == FaultClass.ADegradation:
        r_sh = float(rng.uniform(*R_SHUNT_DEG_RANGE))
    return FaultSpec(
        fault_class=fault_class,
        shading_loss=shading,
        soiling_loss=soiling,
        n_shorted=n_shorted,
        open_string_index=open_string,
        r_series_deg=r_ser,
        r_shunt_deg=r_sh,
        rng_seed=int(rng_seed),
    )


def faulty_string_voc_ratio(n_series_modules: int, n_shorted: int) -> float:
    """Open-circuit voltage fraction left after shorting modules out."""
    return (n_series_modules - n_shorted) / n_series_modules


@dataclass(frozen=True)
class IVCurve:
    """Sampled current-voltage characteristic with its environment."""

    v: np.ndarray
    i: np.ndarray
    env: EnvCondition

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=float)
        i = np.asarray(self.i, dtype=float)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "i", i)
        if v.ndim != 1 or v.shape != i.shape:
            raise ValueError(f"v and i must be equal-length vectors, got {v.shape}, {i.shape}")
        if len(v) < 2:
            raise ValueError("a curve needs at least 2 points")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(i))):
            raise ValueError("curve contains non-finite values")
        degenerate = not v.any() and not i.any()
        if not degenerate and np.any(np.diff(v) <= 0.0):
            raise ValueError("voltages must be strictly ascending")

    @property
    def p(self) -> np.ndarray:
        return self.v * self.i

    @property
    def isc(self) -> float:
        return float(self.i[0])

    @property
    def voc(self) -> float:
        return float(self.v[-1])

    def __len__(self) -> int:
        return len(self.v)


def _active_module_irradiances(cfg: ArrayConfig, fault: FaultSpec,
                               string_index: int, g: float) -> list[float] | None:
    """Effective irradiance per remaining module, None for an open string."""
    if fault.open_string_index == string_index:
        return None
    out = []
    for m in range(cfg.n_series_modules):
        if string_index == 0 and m < fault.n_shorted:
            continue  # shorted out of the stack
        g_eff = g
        if string_index == 0 and m < len(fault.shading_loss):
            g_eff *= 1.0 - fault.shading_loss[m]
        if fault.soiling_loss:
            g_eff *= 1.0 - fault.soiling_loss[string_index * cfg.n_series_modules + m]
        out.append(g_eff)
    return out


def _stack_voltage(module: ModuleParams, t: float, g_effs: list[float], i):
    """Voltage and dV/dI of a series stack at common current i."""
    v_tot = np.zeros_like(np.asarray(i, dtype=float))
    dv_tot = np.zeros_like(v_tot)
    for g_eff in g_effs:
        env = EnvCondition(g=g_eff, t=t)
        v, dv = module_voltage_with_derivative(module, env, i)
        v_tot = v_tot + v
        dv_tot = dv_tot + dv
    return v_tot, dv_tot


def _solve_stack_current(module: ModuleParams, t: float, g_effs: list[float],
                         v_target: np.ndarray) -> np.ndarray:
    """Invert the stack characteristic: current at each target voltage.

    Safeguarded Newton: keeps a bracket per element and falls back to
    bisection whenever the Newton step leaves it or the stack is flat
    (all bypass diodes clamped).
    """
    v_target = np.asarray(v_target, dtype=float)
    iph_max = max(photocurrent(module, EnvCondition(g=g, t=t)) for g in g_effs)
    vtol = 1e-9 * max(1.0, float(np.max(np.abs(v_target))))

    lo = np.full(v_target.shape, -max(1.0, iph_max))
    for _ in range(80):
        v_lo, _ = _stack_voltage(module, t, g_effs, lo)
        short = v_lo < v_target
        if not short.any():
            break
        lo = np.where(short, lo * 2.0 - 1.0, lo)
    else:
        raise ConvergenceFailure("could not bracket stack current from below")

    hi = np.full(v_target.shape, iph_max + 1.0)
    for _ in range(80):
        v_hi, _ = _stack_voltage(module, t, g_effs, hi)
        short = v_hi > v_target
        if not short.any():
            break
        hi = np.where(short, hi * 2.0 + 1.0, hi)
    else:
        raise ConvergenceFailure("could not bracket stack current from above")

    x = 0.5 * (lo + hi)
    for _ in range(200):
        v_x, dv_x = _stack_voltage(module, t, g_effs, x)
        f = v_x - v_target
        if np.max(np.abs(f)) <= vtol:
            return x
        above = f > 0.0
        lo = np.where(above, x, lo)
        hi = np.where(above, hi, x)
        # bracket collapsed to the function's noise floor: x is as good
        # as double precision allows even if the residual check missed
        if np.all(hi - lo <= 4e-13 * np.maximum(1.0, np.abs(x))):
            return x
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / dv_x
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        x = np.where(bad, 0.5 * (lo + hi), newton)
    raise ConvergenceFailure(
        f"stack current solve stalled: worst voltage residual "
        f"{np.max(np.abs(f)):.3e} V")


def _stack_voc(module: ModuleParams, t: float, g_effs: list[float]) -> float:
    """Open-circuit voltage of a series stack, shunt current included."""
    v0, _ = _stack_voltage(module, t, g_effs, np.zeros(1))
    return float(v0[0])


def string_current(cfg: ArrayConfig, fault: FaultSpec, string_index: int,
                   env: EnvCondition, v):
    """Current of one string at terminal voltage v (scalar or array).

    An opened string contributes exactly zero.  With blocking diodes
    the result is clamped at zero; without them the string sinks
    reverse current once v exceeds its own open-circuit voltage.
    """
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    g_effs = _active_module_irradiances(cfg, fault, string_index, env.g)
    if g_effs is None or not g_effs:
        i = np.zeros_like(v_arr)
    elif cfg.blocking_diodes:
        # the diode blocks wherever the stack cannot beat the terminal voltage
        conducting = v_arr + cfg.v_blocking_drop < _stack_voc(cfg.module, env.t, g_effs)
        i = np.zeros_like(v_arr)
        if conducting.any():
            sub = _solve_stack_current(cfg.module, env.t, g_effs,
                                       v_arr[conducting] + cfg.v_blocking_drop)
            i[conducting] = np.maximum(sub, 0.0)
    else:
        i = _solve_stack_current(cfg.module, env.t, g_effs, v_arr)
    return float(i[0]) if np.ndim(v) == 0 else i


def _terminal_current(cfg: ArrayConfig, fault: FaultSpec, env: EnvCondition, v):
    """Sum of string currents minus shunt-degradation leakage at internal voltage v."""
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    total = np.zeros_like(v_arr)
    seen: dict[tuple, np.ndarray] = {}
    for s in range(cfg.n_parallel_strings):
        g_effs = _active_module_irradiances(cfg, fault, s, env.g)
        key = tuple(g_effs) if g_effs is not None else ("open",)
        if key not in seen:
            seen[key] = np.atleast_1d(string_current(cfg, fault, s, env, v_arr))
        total = total + seen[key]
    if fault.r_shunt_deg > 0.0:
        total = total - v_arr / fault.r_shunt_deg
    return float(total[0]) if np.ndim(v) == 0 else total


def array_iv_curve(cfg: ArrayConfig, fault: FaultSpec, env: EnvCondition,
                   n_points: int = 200) -> IVCurve:
    """Sweep the array characteristic and truncate it to the generating quadrant.

    The sweep grid is uniform over [0, n_series * module Voc].  Series
    degradation is applied by remapping the internal sweep voltage to
    the terminal one; the zero-voltage and zero-current end points are
    then re-solved exactly so every returned point satisfies the
    string equations.  Zero irradiance (or an array that cannot source
    current at all) yields the degenerate all-zero curve.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if photocurrent(cfg.module, env) <= 0.0:
        return IVCurve(v=np.zeros(n_points), i=np.zeros(n_points), env=env)

    voc_upper = cfg.n_series_modules * open_circuit_voltage(cfg.module, env)
    v_int = np.linspace(0.0, voc_upper, n_points)
    i_tot = _terminal_current(cfg, fault, env, v_int)
    if i_tot[0] <= 0.0:
        return IVCurve(v=np.zeros(n_points), i=np.zeros(n_points), env=env)

    # exact zero-current crossing on the internal axis; with blocking
    # diodes and no leak the current plateaus at zero once the last
    # string stops conducting, so the crossing is that string's Voc
    if cfg.blocking_diodes and fault.r_shunt_deg == 0.0:
        vocs = [
            _stack_voc(cfg.module, env.t, g_effs) - cfg.v_blocking_drop
            for s in range(cfg.n_parallel_strings)
            if (g_effs := _active_module_irradiances(cfg, fault, s, env.g))
        ]
        if not vocs or max(vocs) <= 0.0:
            return IVCurve(v=np.zeros(n_points), i=np.zeros(n_points), env=env)
        voc = min(max(vocs), voc_upper)
    else:
        cross = np.nonzero(i_tot <= 0.0)[0]
        if cross.size:
            k = int(cross[0])
            voc = brentq(lambda u: _terminal_current(cfg, fault, env, u),
                         v_int[k - 1], v_int[k], xtol=1e-12, rtol=1e-15)
        else:
            # even at the ideal upper voltage the array still sources current
            voc = voc_upper

    r_deg = fault.r_series_deg
    if r_deg > 0.0:
        v_term = v_int - i_tot * r_deg
        keep = (v_term > 0.0) & (v_int < voc)
        # exact terminal-zero point: internal voltage where v - i*r crosses 0
        v0 = brentq(lambda u: u - _terminal_current(cfg, fault, env, u) * r_deg,
                    0.0, voc, xtol=1e-12, rtol=1e-15)
        i0 = _terminal_current(cfg, fault, env, v0)
        v_out = np.concatenate(([0.0], v_term[keep], [voc]))
        i_out = np.concatenate(([i0], i_tot[keep], [0.0]))
    else:
        keep = v_int < voc
        v_out = np.concatenate((v_int[keep], [voc]))
        i_out = np.concatenate((i_tot[keep], [0.0]))
    return IVCurve(v=v_out, i=np.maximum(i_out, 0.0), env=env)


@dataclass(frozen=True)
class SimulatedSample:
    curve: IVCurve
    fault: FaultSpec
    env_index: int


def sample_seed(root_seed: int, fault_class: FaultClass, k: int) -> int:
    """Per-sample seed derived from the run seed, class and sample index."""
    ss = np.random.SeedSequence(entropy=int(root_seed),
                                spawn_key=(int(fault_class), int(k)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def simulate_sample(cfg: ArrayConfig, env_series: EnvSeries, cls: FaultClass,
                    k: int, rng_seed: int, n_points: int = 200) -> SimulatedSample:
    """Simulate sample k of a class: env pick, fault draw, curve sweep.

    The environment pick and fault draw both derive from
    ``sample_seed(rng_seed, cls, k)``, so each record is reproducible
    in isolation regardless of iteration order.
    """
    seed = sample_seed(rng_seed, cls, k)
    rng = np.random.default_rng(seed)
    env_index = int(rng.integers(len(env_series)))
    fault = sample_fault(cls, seed,
                         n_series_modules=cfg.n_series_modules,
                         n_parallel_strings=cfg.n_parallel_strings)
    curve = array_iv_curve(cfg, fault, env_series.condition(env_index),
                           n_points=n_points)
    return SimulatedSample(curve=curve, fault=fault, env_index=env_index)


def drive_series(cfg: ArrayConfig, classes, env_series: EnvSeries,
                 samples_per_class: int, rng_seed: int,
                 n_points: int = 200) -> list[SimulatedSample]:
    """Simulate a labelled curve set over randomly drawn env records."""
    if len(env_series) == 0:
        raise EmptyEnvSeries("environment series has no usable records")
    return [
        simulate_sample(cfg, env_series, cls, k, rng_seed, n_points=n_points)
        for cls in classes
        for k in range(samples_per_class)
    ]
