"""Device-level voltage sensitivity and the Forming Index.

``S_v(s) = [I + l_g Z(s) Y(s)]^-1`` maps a grid-voltage perturbation to the
converter terminal-voltage perturbation. Its largest singular value on the
imaginary axis is the Forming Index: at or below 1 the converter rejects grid
voltage variations (grid-forming), above 1 it follows and amplifies them
(grid-following).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .converters import AdmittanceModel, ConverterSpec
from .errors import ConfigError, NumericalError
from .tfcore import I2, FrequencyGrid, LineParams, eval_Z, map_points, svd_extremes

GFM = "GFM"
GFL = "GFL"
SINGULAR_COND = 1e13


def _as_model(Y) -> Callable[[complex], np.ndarray]:
    if isinstance(Y, ConverterSpec):
        return AdmittanceModel(Y)
    if not callable(Y):
        raise ConfigError("admittance must be a ConverterSpec or a callable s -> 2x2")
    return Y


def sensitivity(Y, line: LineParams, s: complex) -> np.ndarray:
    """``[I2 + l_g Z(s) Y(s)]^-1`` for an admittance model ``Y`` behind ``line``."""
    Y = _as_model(Y)
    if line.l_g == 0:
        return I2.copy()
    L = line.l_g * eval_Z(s, line.tau, line.omega0) @ np.asarray(Y(s), dtype=complex)
    M = I2 + L
    # a bracket that cancels to rounding noise can still look well conditioned
    cancelled = np.linalg.norm(M) <= 1e-12 * (1.0 + np.linalg.norm(L))
    if not np.all(np.isfinite(M)) or cancelled or np.linalg.cond(M) > SINGULAR_COND:
        raise NumericalError("sensitivity bracket I + l_g Z Y is singular", s)
    return np.linalg.inv(M)


def forming_index(Y, line: LineParams, f_hz: float) -> float:
    """Forming Index at a single frequency (Hz)."""
    return svd_extremes(sensitivity(Y, line, 2j * np.pi * f_hz))[0]


@dataclass(frozen=True)
class SweepResult:
    grid: FrequencyGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.grid)

    def to_columns(self) -> dict[str, np.ndarray]:
        return {"f_hz": self.grid.points, "fi": self.values}


def forming_index_sweep(Y, line: LineParams, grid: FrequencyGrid) -> SweepResult:
    """FI at every grid frequency. Failures name the offending frequency."""
    model = _as_model(Y)

    def point(f):
        try:
            return forming_index(model, line, f)
        except NumericalError as exc:
            raise NumericalError(f"FI sweep failed at f = {f:.6g} Hz: {exc}") from exc

    values = np.array(map_points(point, grid.points), dtype=float)
    spec = getattr(model, "spec", None)
    meta = {"strategy": getattr(spec, "strategy", "custom"), "l_g": line.l_g, "tau": line.tau,
            "omega0": line.omega0}
    return SweepResult(grid, values, meta)


@dataclass(frozen=True)
class Classification:
    bands: list  # (f_low, f_high, label)
    crossovers: list

    def label_at(self, f_hz: float) -> str:
        for lo, hi, label in self.bands:
            if lo <= f_hz <= hi:
                return label
        raise ValueError(f"{f_hz} Hz outside the classified range")


def classify(sweep: SweepResult) -> Classification:
    """Split the sweep range into GFM (FI <= 1) and GFL (FI > 1) bands.

    Crossovers are located by linear interpolation in (log f, FI).
    """
    f = sweep.grid.points
    fi = np.asarray(sweep.values, dtype=float)
    if fi.size == 0:
        raise ConfigError("cannot classify an empty sweep")
    labels = np.where(fi <= 1.0, GFM, GFL)
    crossovers = []
    bands = []
    start = f[0]
    for k in range(len(f) - 1):
        if labels[k] == labels[k + 1]:
            continue
        lf0, lf1 = np.log(f[k]), np.log(f[k + 1])
        frac = (1.0 - fi[k]) / (fi[k + 1] - fi[k])
        x = float(np.exp(lf0 + frac * (lf1 - lf0)))
        crossovers.append(x)
        bands.append((float(start), x, str(labels[k])))
        start = x
    bands.append((float(start), float(f[-1]), str(labels[-1])))
    return Classification(bands, crossovers)
