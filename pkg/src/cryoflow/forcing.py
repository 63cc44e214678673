"""Annual climate forcing: piecewise-linear, periodic with a one-year period."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

YEAR = 365.0 * 86400.0
FORCING_COLUMNS = ("time_s", "precip_m_s", "pet_m_s", "t_north_c", "t_south_c")
ASPECTS = ("north", "south")


@dataclass(frozen=True)
class ClimateForcing:
    time: np.ndarray
    precip: np.ndarray
    pet: np.ndarray
    t_north: np.ndarray
    t_south: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("time", "precip", "pet", "t_north", "t_south"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)
        t = arrays["time"]
        if t.size == 0:
            raise ConfigError("forcing has no breakpoints")
        if any(a.size != t.size for a in arrays.values()):
            raise ConfigError("forcing columns differ in length")
        if t[0] != 0.0:
            raise ConfigError("first forcing time stamp must be 0")
        if np.any(np.diff(t) <= 0.0):
            raise ConfigError("forcing time stamps must be strictly increasing")
        if t[-1] >= YEAR:
            raise ConfigError(f"forcing time stamps must lie within one year (< {YEAR:.0f} s)")
        if np.any(arrays["precip"] < 0.0) or np.any(arrays["pet"] < 0.0):
            raise ConfigError("precip and pet must be non-negative")
        for a in arrays.values():
            if not np.all(np.isfinite(a)):
                raise ConfigError("forcing contains non-finite values")

    def _series(self, name: str) -> np.ndarray:
        if name in ("t_surface_north", "north"):
            name = "t_north"
        elif name in ("t_surface_south", "south"):
            name = "t_south"
        return getattr(self, name)

    def _locate(self, t: float):
        tau = t % YEAR
        times = np.append(self.time, YEAR)
        i = int(np.searchsorted(times, tau, side="right")) - 1
        i = min(i, self.time.size - 1)
        return i, tau, times

    def value(self, name: str, t: float) -> float:
        """Interpolated value of column ``name`` at absolute time ``t`` (s)."""
        v = self._series(name)
        i, tau, times = self._locate(t)
        t0, t1 = times[i], times[i + 1]
        v0, v1 = v[i], v[(i + 1) % v.size]
        if tau == t0:
            return float(v0)
        return float(v0 + (v1 - v0) * (tau - t0) / (t1 - t0))

    def slope(self, name: str, t: float) -> float:
        """Rate of change of ``name`` in the segment starting at or containing ``t``."""
        v = self._series(name)
        i, _, times = self._locate(t)
        return float((v[(i + 1) % v.size] - v[i]) / (times[i + 1] - times[i]))

    def next_breakpoint(self, t: float) -> float:
        """Smallest absolute breakpoint time more than a microsecond after ``t``."""
        i, tau, times = self._locate(t)
        if times[i + 1] - tau < 1e-6:
            i, tau, times = self._locate(t + 1e-6)
            tau -= 1e-6
        return t - tau + times[i + 1]


@dataclass(frozen=True)
class AspectForcing:
    """Forcing as seen by one slope: surface temperature by aspect, scaled PET."""

    forcing: ClimateForcing
    aspect: str = "north"
    pet_multiplier: float = 1.0

    def __post_init__(self):
        if self.aspect not in ASPECTS:
            raise ConfigError(f"aspect must be one of {', '.join(ASPECTS)}")
        if not self.pet_multiplier >= 0.0:
            raise ConfigError("pet_multiplier must be >= 0")

    def surface_temperature(self, t: float) -> float:
        return self.forcing.value(self.aspect, t)

    def surface_temperature_slope(self, t: float) -> float:
        return self.forcing.slope(self.aspect, t)

    def precip(self, t: float) -> float:
        return self.forcing.value("precip", t)

    def pet(self, t: float) -> float:
        return self.pet_multiplier * self.forcing.value("pet", t)

    def next_breakpoint(self, t: float) -> float:
        return self.forcing.next_breakpoint(t)


def load_forcing(path) -> ClimateForcing:
    """Read a forcing CSV with header ``time_s,precip_m_s,pet_m_s,t_north_c,t_south_c``."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read forcing file: {exc.strerror}", path) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError("forcing file is empty", path, 1)
        header = [h.strip() for h in header]
        missing = [c for c in FORCING_COLUMNS if c not in header]
        if missing:
            raise ConfigError(f"missing forcing column(s): {', '.join(missing)}", path, 1)
        unknown = [c for c in header if c not in FORCING_COLUMNS]
        if unknown:
            raise ConfigError(f"unknown forcing column(s): {', '.join(unknown)}", path, 1)
        cols = [header.index(c) for c in FORCING_COLUMNS]
        rows = []
        previous = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ConfigError(f"expected {len(header)} values, found {len(row)}", path, lineno)
            try:
                values = [float(row[c]) for c in cols]
            except ValueError as exc:
                raise ConfigError(f"non-numeric value: {exc}", path, lineno) from exc
            t, precip, pet = values[:3]
            if not all(np.isfinite(values)):
                raise ConfigError("non-finite value", path, lineno)
            if previous is None and t != 0.0:
                raise ConfigError("first time stamp must be 0", path, lineno)
            if previous is not None and t <= previous:
                raise ConfigError("time stamps must be strictly increasing", path, lineno)
            if t >= YEAR:
                raise ConfigError(f"time stamp {t} beyond one year", path, lineno)
            if precip < 0.0:
                raise ConfigError("negative precip_m_s", path, lineno)
            if pet < 0.0:
                raise ConfigError("negative pet_m_s", path, lineno)
            previous = t
            rows.append(values)
    if not rows:
        raise ConfigError("forcing file has no data rows", path)
    a = np.array(rows)
    return ClimateForcing(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4])


def write_forcing(forcing: ClimateForcing, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FORCING_COLUMNS)
        for row in zip(forcing.time, forcing.precip, forcing.pet, forcing.t_north, forcing.t_south):
            writer.writerow([f"{v:.17g}" for v in row])


def sinusoidal_forcing(
    n_points: int = 73,
    t_mean: float = -3.0,
    t_amplitude: float = 18.0,
    south_offset: float = 3.0,
    precip_mm_year: float = 350.0,
    pet_mm_year: float = 400.0,
    warmest_day: float = 196.0,
) -> ClimateForcing:
    """Idealized continental-boreal year sampled at ``n_points`` breakpoints.

    Surface temperature follows a cosine peaking on ``warmest_day``; precip
    and PET follow the positive part of the same seasonal wave (no snow,
    no winter evaporation), scaled to the given annual totals.
    """
    t = np.linspace(0.0, YEAR, n_points, endpoint=False)
    phase = 2.0 * np.pi * (t / 86400.0 - warmest_day) / 365.0
    wave = np.cos(phase)
    temp = t_mean + t_amplitude * wave
    season = np.clip(temp, 0.0, None)
    if season.sum() == 0.0:
        season = np.ones_like(season)
    # trapezoid on the periodic grid equals the plain sum times the spacing
    shape = season / (season.sum() * (YEAR / n_points))
    precip = precip_mm_year * 1e-3 * shape
    pet = pet_mm_year * 1e-3 * shape
    return ClimateForcing(t, precip, pet, temp, temp + south_offset)
