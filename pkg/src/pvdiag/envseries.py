"""Reading and generating environmental condition series.

A series is a CSV file with header ``timestamp,g_wm2,t_celsius``.
Temperatures are converted to kelvin on load; rows below the
irradiance floor are dropped (night and deep-overcast records carry
no usable curve information).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedEnvRow
from .pvmodule import EnvCondition

HEADER = ("timestamp", "g_wm2", "t_celsius")
MIN_IRRADIANCE = 100.0
KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class EnvSeries:
    """Filtered environment records, temperatures in kelvin."""

    timestamps: tuple[str, ...]
    g: np.ndarray
    t: np.ndarray
    n_rejected_low_g: int = 0

    def __len__(self) -> int:
        return len(self.timestamps)

    def condition(self, index: int) -> EnvCondition:
        return EnvCondition(g=float(self.g[index]), t=float(self.t[index]))


def load_env_csv(path, min_irradiance: float = MIN_IRRADIANCE) -> EnvSeries:
    """Parse an environment CSV, rejecting malformed rows by line number.

    Args:
        path: CSV file with the ``timestamp,g_wm2,t_celsius`` header.
        min_irradiance: rows with lower irradiance are filtered out.

    Raises:
        MalformedEnvRow: bad header, wrong column count, or a value
            that does not parse as a physical irradiance/temperature.
    """
    timestamps: list[str] = []
    g_vals: list[float] = []
    t_vals: list[float] = []
    rejected = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedEnvRow("line 1: file is empty, expected header "
                                  + ",".join(HEADER)) from None
        if tuple(col.strip() for col in header) != HEADER:
            raise MalformedEnvRow(f"line 1: expected header {','.join(HEADER)}, "
                                  f"got {','.join(header)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue  # blank trailing line
            if len(row) != 3:
                raise MalformedEnvRow(f"line {line_no}: expected 3 columns, got {len(row)}")
            stamp = row[0].strip()
            try:
                g = float(row[1])
                t_c = float(row[2])
            except ValueError:
                raise MalformedEnvRow(
                    f"line {line_no}: non-numeric irradiance or temperature "
                    f"({row[1]!r}, {row[2]!r})") from None
            if not (math.isfinite(g) and math.isfinite(t_c)):
                raise MalformedEnvRow(f"line {line_no}: non-finite value")
            if g < 0.0:
                raise MalformedEnvRow(f"line {line_no}: negative irradiance {g}")
            if t_c < -KELVIN_OFFSET:
                raise MalformedEnvRow(f"line {line_no}: temperature {t_c} below absolute zero")
            if g < min_irradiance:
                rejected += 1
                continue
            timestamps.append(stamp)
            g_vals.append(g)
            t_vals.append(t_c + KELVIN_OFFSET)
    return EnvSeries(
        timestamps=tuple(timestamps),
        g=np.asarray(g_vals, dtype=float),
        t=np.asarray(t_vals, dtype=float),
        n_rejected_low_g=rejected,
    )


def write_synthetic_env_csv(path, n_days: int = 30, seed: int = 0,
                            start_day: int = 80) -> None:
    """Write a plausible hourly irradiance/temperature series.

    Stand-in for field measurements: a seasonal-diurnal clear-sky
    shape modulated by random cloudiness, with cell temperature
    tracking ambient plus an irradiance-proportional rise.  Night rows
    are kept so downstream filtering is exercised.
    """
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for d in range(n_days):
            doy = start_day + d
            season = 0.75 + 0.25 * math.sin(2.0 * math.pi * doy / 365.0 - math.pi / 2.0)
            for h in range(24):
                elevation = math.sin(math.pi * (h - 6.0) / 12.0)
                if elevation <= 0.0:
                    g = 0.0
                else:
                    cloud = rng.uniform(0.25, 1.0)
                    g = min(1150.0 * season * elevation * cloud, 1360.0)
                t_amb = 6.0 + 14.0 * season + 9.0 * max(elevation, 0.0) + rng.normal(0.0, 1.5)
                t_cell = t_amb + 0.025 * g
                writer.writerow([f"2021-{doy:03d}T{h:02d}:00", f"{g:.2f}", f"{t_cell:.2f}"])
