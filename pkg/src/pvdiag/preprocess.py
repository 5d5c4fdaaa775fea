"""Curve-to-image feature extraction.

A sampled I-V curve becomes a 50x50x2 tensor: the current and power
series are resampled onto a uniform voltage grid, normalized to [0, 1]
by one of three strategies, and converted to Gramian angular
difference fields.  The IscVoc strategy zero-extends each curve to
its environment's ideal open-circuit voltage and divides the axes by
the ideal limits, which aligns the same fault across operating
conditions; Normal rescales each curve by its own extremes and Global
by dataset-wide extremes, both on the curve's measured span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arraysim import ArrayConfig, FaultClass, IVCurve
from .errors import DegenerateRange, IdealBelowMeasured, OutOfRangeInput
from .pvmodule import EnvCondition, open_circuit_voltage, photocurrent

TENSOR_SIZE = 50
OVERSHOOT_RTOL = 0.005
GADF_DOMAIN_TOL = 1e-12
MEASURED_VOC_RTOL = 0.01


@dataclass(frozen=True)
class Normal:
    """Per-curve min-max normalization."""


@dataclass(frozen=True)
class Global:
    """Normalization by dataset-wide measured extremes."""

    max_isc: float
    max_voc: float


@dataclass(frozen=True)
class IscVoc:
    """Normalization by the ideal limits of the curve's own environment."""

    isc_ideal: float
    voc_ideal: float


NormalizationStrategy = Normal | Global | IscVoc


def ideal_limits(cfg: ArrayConfig, env: EnvCondition) -> tuple[float, float]:
    """Ideal axis limits (isc_ideal, voc_ideal) of the array at env.

    The current limit is the summed photocurrent of the parallel
    strings; the voltage limit is the stacked closed-form module Voc.
    Both bound every simulated curve's extremes from above.
    """
    isc_ideal = cfg.n_parallel_strings * photocurrent(cfg.module, env)
    voc_ideal = cfg.n_series_modules * open_circuit_voltage(cfg.module, env)
    return isc_ideal, voc_ideal


def isc_voc_strategy(cfg: ArrayConfig, env: EnvCondition) -> IscVoc:
    isc_ideal, voc_ideal = ideal_limits(cfg, env)
    return IscVoc(isc_ideal=isc_ideal, voc_ideal=voc_ideal)


def complete_and_resample(curve: IVCurve, voc_limit: float,
                          n_points: int = TENSOR_SIZE) -> IVCurve:
    """Zero-extend a curve to voc_limit and resample it uniformly.

    Beyond the measured open-circuit voltage the current (and hence
    power) is completed by zero.  Resampling a curve already on the
    target grid returns it unchanged.

    Raises:
        IdealBelowMeasured: voc_limit undercuts the measured Voc by
            more than the tolerated fraction.
    """
    if not curve.v.any():
        return IVCurve(v=np.zeros(n_points), i=np.zeros(n_points), env=curve.env)
    measured_voc = curve.voc
    if voc_limit < measured_voc * (1.0 - MEASURED_VOC_RTOL):
        raise IdealBelowMeasured(
            f"voc limit {voc_limit:.4f} V below measured {measured_voc:.4f} V")
    v_src = curve.v
    i_src = curve.i
    if voc_limit > measured_voc:
        v_src = np.append(v_src, voc_limit)
        i_src = np.append(i_src, 0.0)
    grid = np.linspace(0.0, voc_limit, n_points)
    return IVCurve(v=grid, i=np.interp(grid, v_src, i_src), env=curve.env)


def _axis_upper(strategy: NormalizationStrategy, axis_kind: str) -> float:
    if isinstance(strategy, Global):
        isc, voc = strategy.max_isc, strategy.max_voc
    else:
        isc, voc = strategy.isc_ideal, strategy.voc_ideal
    if axis_kind == "i":
        return isc
    if axis_kind == "v":
        return voc
    if axis_kind == "p":
        return isc * voc
    raise ValueError(f"axis_kind must be one of v/i/p, got {axis_kind!r}")


def normalize_axis(values, strategy: NormalizationStrategy, axis_kind: str) -> np.ndarray:
    """Map a value series into [0, 1] under the given strategy.

    Small overshoot (a curve extreme a hair past its limit) is
    clipped; anything beyond the tolerance is a modelling error.

    Raises:
        DegenerateRange: per-curve normalization of a constant series.
        OutOfRangeInput: values outside the limits beyond tolerance.
    """
    values = np.asarray(values, dtype=float)
    if isinstance(strategy, Normal):
        lo = float(values.min())
        hi = float(values.max())
        if hi == lo:
            raise DegenerateRange(f"constant {axis_kind} series cannot be min-max scaled")
        return (values - lo) / (hi - lo)
    upper = _axis_upper(strategy, axis_kind)
    if upper <= 0.0:
        raise DegenerateRange(f"non-positive {axis_kind} limit {upper}")
    x = values / upper
    if x.max() > 1.0 + OVERSHOOT_RTOL or x.min() < -OVERSHOOT_RTOL:
        raise OutOfRangeInput(
            f"{axis_kind} values span [{values.min():.4g}, {values.max():.4g}] "
            f"against limit {upper:.4g}")
    return np.clip(x, 0.0, 1.0)


def gadf(series) -> np.ndarray:
    """Gramian angular difference field of a [0, 1] series.

    With phi = arccos(x), entry (i, j) is sin(phi_i - phi_j), which
    expands to sqrt(1-x_i^2)*x_j - x_i*sqrt(1-x_j^2).  The result is
    antisymmetric with a zero diagonal, values in [-1, 1].

    Raises:
        OutOfRangeInput: series leaves [0, 1] by more than 1e-12.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise OutOfRangeInput(f"expected a 1-d series, got shape {x.shape}")
    if x.max() > 1.0 + GADF_DOMAIN_TOL or x.min() < -GADF_DOMAIN_TOL:
        raise OutOfRangeInput(
            f"series spans [{x.min():.4g}, {x.max():.4g}], outside [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    y = np.sqrt(1.0 - x * x)
    return np.outer(y, x) - np.outer(x, y)


def resample_for_strategy(curve: IVCurve, strategy: NormalizationStrategy,
                          n_points: int = TENSOR_SIZE) -> IVCurve:
    """Resample a curve on the voltage span its strategy reads it over.

    Only IscVoc zero-extends the curve to the environment's ideal Voc;
    that completion step is what encodes the open-circuit deficit of a
    fault.  The Normal and Global scalings are the plain series-imaging
    baselines and read the curve on its own measured span.
    """
    if isinstance(strategy, IscVoc):
        voc_limit = strategy.voc_ideal
    else:
        voc_limit = curve.voc
    return complete_and_resample(curve, voc_limit, n_points=n_points)


@dataclass(frozen=True)
class FeatureTensor:
    """Stacked GADF channels with the label and draw provenance."""

    data: np.ndarray
    fault_class: FaultClass
    env: EnvCondition
    strategy: NormalizationStrategy
    rng_seed: int = 0


def stacked_feature(curve: IVCurve, fault_class: FaultClass,
                    strategy: NormalizationStrategy, rng_seed: int = 0,
                    n_points: int = TENSOR_SIZE) -> FeatureTensor:
    """Build the (n, n, 2) feature tensor: GADF of current, GADF of power."""
    res = resample_for_strategy(curve, strategy, n_points=n_points)
    i_norm = normalize_axis(res.i, strategy, "i")
    p_norm = normalize_axis(res.p, strategy, "p")
    data = np.stack([gadf(i_norm), gadf(p_norm)], axis=-1)
    return FeatureTensor(data=data, fault_class=fault_class, env=curve.env,
                         strategy=strategy, rng_seed=rng_seed)


def gtiv_matrix(curve: IVCurve) -> np.ndarray:
    """Tabular baseline feature: columns [g, t, v, i], one row per point."""
    n = len(curve)
    out = np.empty((n, 4), dtype=float)
    out[:, 0] = curve.env.g
    out[:, 1] = curve.env.t
    out[:, 2] = curve.v
    out[:, 3] = curve.i
    return out


def channel_to_image(matrix: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] GADF channel to an 8-bit grayscale image."""
    return np.clip(np.rint((np.asarray(matrix) + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)
