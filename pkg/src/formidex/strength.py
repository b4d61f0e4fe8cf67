"""System strength, grid strength and the lower bounds that tie them to the Forming Index.

At each frequency:

* system strength ``kappa = sigma_min(Ỹ_Cl)``; ``1/kappa`` is the worst-case gain
  from a multi-bus current disturbance to the multi-bus voltage,
* grid strength ``alpha = sigma_min(B̃_net)``, the network subsystem alone,
* ``alpha >= sigma_min(B1) - sigma_max(B2 B3 / B4) * sigma_max(S_v)``,
* ``kappa >= sigma_min(Z^-1) * alpha - sigma_max(Ỹ_de)``.

Both bounds follow from Weyl's inequality for singular values, so a violation
means an implementation bug. The kappa bound is evaluated with the computed
alpha (not its bound) so the exact inequality chain is exercised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .forming_index import Classification, SweepResult, classify
from .network import NetworkCase, _blocks_of, evaluate_blocks
from .tfcore import FrequencyGrid, eval_Zinv, map_points, svd_extremes

# relative slack for the bound flags (rounding only; the inequalities are exact)
BOUND_RTOL = 1e-9


@dataclass(frozen=True)
class StrengthSweep:
    grid: FrequencyGrid
    kappa: np.ndarray
    alpha: np.ndarray
    bound_kappa: np.ndarray
    bound_alpha: np.ndarray
    sv_max: np.ndarray  # sigma_max(S_v) of the extra device at l_g = 1/B4; NaN without one
    yde_max: np.ndarray

    @property
    def vacuous(self) -> np.ndarray:
        """Points where a bound is non-positive and therefore says nothing."""
        return (self.bound_kappa <= 0) | (self.bound_alpha <= 0)

    @property
    def kappa_ok(self) -> np.ndarray:
        return self.kappa >= self.bound_kappa - BOUND_RTOL * np.maximum(1.0, np.abs(self.bound_kappa))

    @property
    def alpha_ok(self) -> np.ndarray:
        return self.alpha >= self.bound_alpha - BOUND_RTOL * np.maximum(1.0, np.abs(self.bound_alpha))

    def to_columns(self) -> dict[str, np.ndarray]:
        return {
            "f_hz": self.grid.points,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "bound_kappa": self.bound_kappa,
            "bound_alpha": self.bound_alpha,
            "sv_max": self.sv_max,
            "vacuous": self.vacuous.astype(int),
        }


def strength_point(case: NetworkCase, s: complex) -> tuple[float, ...]:
    """``(kappa, alpha, bound_kappa, bound_alpha, sv_max, yde_max)`` at one Laplace point."""
    blocks = _blocks_of(case)
    ev = evaluate_blocks(case, s)
    kappa = svd_extremes(ev.Y_cl)[1]
    alpha = svd_extremes(ev.B_net)[1]
    b1_min = svd_extremes(blocks.B1)[1]
    sv = svd_extremes(ev.S_v)[0] if ev.S_v is not None else np.nan
    coupling = svd_extremes(blocks.coupling())[0] if blocks.has_extra else 0.0
    bound_alpha = b1_min - coupling * (sv if blocks.has_extra else 0.0)
    zmin = svd_extremes(eval_Zinv(s, case.tau, case.omega0))[1]
    yde = max(svd_extremes(ev.Y_de[2 * k : 2 * k + 2, 2 * k : 2 * k + 2])[0] for k in range(case.n))
    bound_kappa = zmin * alpha - yde
    return kappa, alpha, bound_kappa, bound_alpha, sv, yde


def strength_sweep(case: NetworkCase, grid: FrequencyGrid) -> StrengthSweep:
    rows = np.array(map_points(lambda f: strength_point(case, 2j * np.pi * f), grid.points), dtype=float)
    return StrengthSweep(grid, *(rows[:, k].copy() for k in range(6)))


@dataclass(frozen=True)
class Prop1Report:
    sweep: StrengthSweep
    gfm: np.ndarray  # extra device rejects grid voltage (sv_max <= 1) at this frequency
    bands: Classification

    @property
    def alpha_ok(self) -> np.ndarray:
        return self.sweep.alpha_ok

    @property
    def kappa_ok(self) -> np.ndarray:
        return self.sweep.kappa_ok

    @property
    def all_satisfied(self) -> bool:
        return bool(np.all(self.alpha_ok) and np.all(self.kappa_ok))


def prop1_check(case: NetworkCase, grid: FrequencyGrid) -> Prop1Report:
    """Check both strength lower bounds on the grid and mark where the extra device is grid-forming."""
    if case.extra is None:
        raise ConfigError("bound check needs an extra device")
    sweep = strength_sweep(case, grid)
    bands = classify(SweepResult(grid, sweep.sv_max))
    return Prop1Report(sweep, sweep.sv_max <= 1.0, bands)


@dataclass(frozen=True)
class ScenarioComparison:
    a: StrengthSweep
    b: StrengthSweep

    @property
    def d_kappa(self) -> np.ndarray:
        return self.b.kappa - self.a.kappa

    @property
    def d_alpha(self) -> np.ndarray:
        return self.b.alpha - self.a.alpha

    def summary(self) -> dict[str, float]:
        return {
            "min_kappa_a": float(self.a.kappa.min()),
            "min_kappa_b": float(self.b.kappa.min()),
            "min_alpha_a": float(self.a.alpha.min()),
            "min_alpha_b": float(self.b.alpha.min()),
            "min_d_kappa": float(self.d_kappa.min()),
            "max_d_kappa": float(self.d_kappa.max()),
            "min_d_alpha": float(self.d_alpha.min()),
            "max_d_alpha": float(self.d_alpha.max()),
        }


def compare_scenarios(case_a: NetworkCase, case_b: NetworkCase, grid: FrequencyGrid) -> ScenarioComparison:
    """Per-frequency strength differences ``b - a`` between two cases with the same retained buses."""
    if tuple(case_a.retained) != tuple(case_b.retained):
        raise ConfigError("scenarios must share the retained bus list")
    return ScenarioComparison(strength_sweep(case_a, grid), strength_sweep(case_b, grid))
