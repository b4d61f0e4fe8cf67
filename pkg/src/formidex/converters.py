"""Small-signal dq admittance models of converters under different control strategies.

Every model maps a Laplace point ``s`` (rad/s) to a 2x2 complex matrix ``Y(s)``
with ``dI = Y(s) @ dU`` where ``dI`` is the current *absorbed* by the device
(load convention). With this convention the grid-to-terminal sensitivity is
``[I + l_g Z(s) Y(s)]^-1``.

The voltage-source and PLL-based strategies are surrogates assembled from a
handful of reusable blocks:

* filter admittance ``G_f(s) = [l_f Z_{r_f/l_f}(s)]^-1`` between an internal
  EMF and the terminal,
* first-order low-pass ``F(s) = w_f / (s + w_f)`` on power measurements,
* a PI-type PLL driven by the q-axis terminal voltage in the PLL frame,
* a first-order current loop ``T_i(s) = w_i / (s + w_i)``.

Each strategy is written in the implicit form
``dI_out = A(s) dU + B(s) dI_out`` (``dI_out`` = current delivered to the grid)
and solved as ``Y = -(I - B)^-1 A``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, NumericalError
from .tfcore import I2, J, OMEGA0_DEFAULT, eval_Z, rot

STRATEGIES = (
    "droop",
    "vsg",
    "voc",
    "vfc",
    "pll_pq",
    "pll_pv",
    "pll_gfm",
    "ideal_source",
    "static_admittance",
    "custom",
)
# the seven control strategies compared in the forming-index taxonomy
CONTROL_STRATEGIES = ("droop", "vsg", "voc", "vfc", "pll_pq", "pll_pv", "pll_gfm")

_PLL = {"kp_pll": 0.47, "ki_pll": 42.0}
_PQ = {"kp": 0.25, "ki": 50.0, "omega_i": 2 * np.pi * 300.0, "omega_m": 2 * np.pi * 5.0}

DEFAULT_PARAMS: Mapping[str, Mapping[str, float]] = MappingProxyType(
    {
        "droop": {"m_p": 0.05, "m_q": 0.05, "omega_f": 2 * np.pi * 5.0},
        "vsg": {"t_j": 4.0, "d_p": 20.0, "m_q": 0.05, "omega_f": 2 * np.pi * 5.0},
        "voc": {"m_p": 0.05, "omega_f": 2 * np.pi * 5.0, "eta": 0.05, "alpha": 10.0},
        "vfc": {"m_p": 0.05},
        "pll_pq": {**_PQ, **_PLL},
        "pll_pv": {**_PQ, "kp_v": 0.25, "ki_v": 50.0, **_PLL},
        "pll_gfm": {"m_p": 0.05, "m_q": 0.05, "omega_f": 2 * np.pi * 5.0, "omega_i": 2 * np.pi * 300.0, **_PLL},
        "ideal_source": {},
        "static_admittance": {"g": 1.0},
        "custom": {},
    }
)
# parameters allowed to be zero; everything else must be strictly positive
_NONNEG = {"m_q", "g", "kp", "ki", "kp_v", "ki_v", "kp_pll", "ki_pll", "d_p", "m_p"}

COND_LIMIT = 1e12


@dataclass(frozen=True)
class OperatingPoint:
    """Steady-state terminal voltage and output current (converter -> grid), per unit."""

    ud: float = 1.0
    uq: float = 0.0
    id: float = 0.0
    iq: float = 0.0

    def __post_init__(self):
        vals = (self.ud, self.uq, self.id, self.iq)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigError("operating point must be finite")
        if np.hypot(self.ud, self.uq) <= 0:
            raise ConfigError("operating point terminal voltage must be non-zero")

    @property
    def u(self) -> np.ndarray:
        return np.array([self.ud, self.uq])

    @property
    def i(self) -> np.ndarray:
        return np.array([self.id, self.iq])


def flat_profile_op(p_export: float, l_g: float = 0.3, tau: float = 0.1, u: float = 1.0) -> OperatingPoint:
    """Operating point exporting ``p_export`` with |U_grid| = |U_terminal| across the line.

    The q-axis current is the smaller root of ``|u - l_g (tau + j)(p/u + j iq)| = u``.
    """
    c = l_g * complex(tau, 1.0)
    w = u - c * (p_export / u)
    jc = 1j * c
    # |w - jc iq|^2 = u^2  ->  |jc|^2 iq^2 - 2 Re(conj(w) jc) iq + |w|^2 - u^2 = 0
    a2 = abs(jc) ** 2
    a1 = -2.0 * (w.conjugate() * jc).real
    a0 = abs(w) ** 2 - u * u
    if a2 == 0:
        return OperatingPoint(u, 0.0, p_export / u, 0.0)
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        raise ConfigError(f"no flat-profile operating point for p={p_export} on l_g={l_g}")
    roots = ((-a1 - np.sqrt(disc)) / (2 * a2), (-a1 + np.sqrt(disc)) / (2 * a2))
    iq = min(roots, key=abs)
    return OperatingPoint(u, 0.0, p_export / u, float(iq))


NO_LOAD = OperatingPoint(1.0, 0.0, 0.0, 0.0)
# 0.2 pu export with a flat voltage profile over the default 0.3 pu test line
DEFAULT_OP = flat_profile_op(0.2, 0.3, 0.1)


@dataclass(frozen=True)
class FilterParams:
    l_f: float = 0.1
    r_f: float = 0.01

    def __post_init__(self):
        if not (np.isfinite(self.l_f) and self.l_f > 0):
            raise ConfigError(f"filter inductance must be positive, got {self.l_f}")
        if not (np.isfinite(self.r_f) and self.r_f >= 0):
            raise ConfigError(f"filter resistance must be non-negative, got {self.r_f}")

    @property
    def tau(self) -> float:
        return self.r_f / self.l_f


def linearize_power(op: OperatingPoint) -> tuple[np.ndarray, np.ndarray]:
    """Rows of dP and dQ over ``[dUd, dUq, dId, dIq]``.

    P = Ud Id + Uq Iq and Q = Uq Id - Ud Iq with I the output current.
    """
    if not isinstance(op, OperatingPoint):
        op = OperatingPoint(*op)
    ud, uq, id0, iq0 = op.ud, op.uq, op.id, op.iq
    dp = np.array([id0, iq0, ud, uq], dtype=float)
    dq = np.array([-iq0, id0, uq, -ud], dtype=float)
    return dp, dq


@dataclass(frozen=True)
class ConverterSpec:
    strategy: str
    params: Mapping[str, float] = field(default_factory=dict)
    filter: FilterParams = field(default_factory=FilterParams)
    op: OperatingPoint = field(default_factory=lambda: DEFAULT_OP)
    omega0: float = OMEGA0_DEFAULT
    evaluator: Callable[[complex], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if not self.omega0 > 0:
            raise ConfigError("omega0 must be positive")
        merged = dict(DEFAULT_PARAMS[self.strategy])
        if self.strategy == "custom":
            if self.evaluator is None and "entries" not in self.params:
                raise ConfigError("custom strategy needs an evaluator or rational 'entries'")
            merged.update(self.params)
        else:
            unknown = set(self.params) - set(merged)
            if unknown:
                raise ConfigError(f"unknown parameters for {self.strategy}: {sorted(unknown)}")
            for key, val in self.params.items():
                val = float(val)
                if not np.isfinite(val) or val < 0 or (val == 0 and key not in _NONNEG):
                    raise ConfigError(f"parameter {self.strategy}.{key} out of range: {val}")
                merged[key] = val
        object.__setattr__(self, "params", MappingProxyType(merged))

    def with_params(self, **kw) -> "ConverterSpec":
        params = {**self.params, **kw}
        return ConverterSpec(self.strategy, params, self.filter, self.op, self.omega0, self.evaluator)


def _rational(entry, s):
    num = np.polyval(np.asarray(entry["num"], dtype=float), s)
    den = np.polyval(np.asarray(entry["den"], dtype=float), s)
    return num / den


class AdmittanceModel:
    """Evaluator ``s -> Y(s)`` for a converter spec; immutable after construction."""

    def __init__(self, spec: ConverterSpec, scale: float = 1.0):
        self.spec = spec
        self.scale = float(scale)
        p = spec.params
        op = spec.op
        self._w0 = spec.omega0
        self._u0 = op.u
        self._i0 = op.i
        self._umag = float(np.hypot(op.ud, op.uq))
        self._theta0 = float(np.arctan2(op.uq, op.ud))
        dp, dq = linearize_power(op)
        # [dP; dQ] = JU @ dU + JI @ dI
        self._JU = np.vstack([dp[:2], dq[:2]])
        self._JI = np.vstack([dp[2:], dq[2:]])
        zf0 = spec.filter.l_f * eval_Z(0.0, spec.filter.tau, self._w0).real
        e0 = self._u0 + zf0 @ self._i0
        self._emag = float(np.hypot(*e0))
        # maps [dE_magnitude; d_angle] to dE_dq around the steady-state EMF
        self._PE = rot(np.arctan2(e0[1], e0[0])) @ np.diag([1.0, self._emag])
        self._Ji0 = J @ self._i0
        # PLL q-axis voltage row: dUq_pll = qrow @ dU - |U0| d_theta
        self._qrow = np.array([-np.sin(self._theta0), np.cos(self._theta0)])
        self._drow = np.array([np.cos(self._theta0), np.sin(self._theta0)])
        self._R0 = rot(self._theta0)
        self._blocks = getattr(self, f"_blocks_{spec.strategy}", None)

    def __repr__(self):
        return f"AdmittanceModel({self.spec.strategy!r}, scale={self.scale})"

    # -- shared building blocks -------------------------------------------
    def _Gf(self, s):
        f = self.spec.filter
        return np.linalg.inv(f.l_f * eval_Z(s, f.tau, self._w0))

    def _pll(self, s):
        """Closed-loop PLL angle response to its q-axis voltage input row."""
        p = self.spec.params
        h = self._w0 * (p["kp_pll"] + p["ki_pll"] / s) / s
        return h / (1.0 + self._umag * h)

    def _vsource(self, s, kp, kq):
        """A, B for an EMF behind the filter; kp: dP -> d_angle, kq: dQ -> dE."""
        K = np.array([[0.0, kq], [kp, 0.0]], dtype=complex)
        C = self._PE @ K
        G = self._Gf(s)
        return G @ (C @ self._JU - I2), G @ C @ self._JI

    # -- strategies -------------------------------------------------------
    def _blocks_ideal_source(self, s):
        return -self._Gf(s), np.zeros((2, 2), complex)

    def _blocks_droop(self, s):
        p = self.spec.params
        F = p["omega_f"] / (s + p["omega_f"])
        return self._vsource(s, -self._w0 * p["m_p"] * F / s, -p["m_q"] * F)

    def _blocks_vsg(self, s):
        p = self.spec.params
        F = p["omega_f"] / (s + p["omega_f"])
        return self._vsource(s, -self._w0 / (s * (p["t_j"] * s + p["d_p"])), -p["m_q"] * F)

    def _blocks_voc(self, s):
        p = self.spec.params
        F = p["omega_f"] / (s + p["omega_f"])
        return self._vsource(s, -self._w0 * p["m_p"] * F / s, -p["eta"] / (s + p["eta"] * p["alpha"]))

    def _blocks_vfc(self, s):
        p = self.spec.params
        return self._vsource(s, -self._w0 * p["m_p"] / s, 0.0)

    def _current_source(self, s, D):
        """A, B for a PLL-synchronised current source with PLL-frame references ``D @ [dP; dQ]``."""
        p = self.spec.params
        Ti = p["omega_i"] / (s + p["omega_i"])
        # measured P, Q (and |U|) pass a first-order filter before the PI loops
        RD = self._R0 @ D * (p["omega_m"] / (s + p["omega_m"]))
        A = Ti * RD @ self._JU + np.outer(self._Ji0, self._qrow) * self._pll(s)
        B = Ti * RD @ self._JI
        return A, B

    def _blocks_pll_pq(self, s):
        p = self.spec.params
        pi = p["kp"] + p["ki"] / s
        return self._current_source(s, np.array([[-pi, 0.0], [0.0, pi]], dtype=complex))

    def _blocks_pll_pv(self, s):
        p = self.spec.params
        pi_p = p["kp"] + p["ki"] / s
        pi_v = p["kp_v"] + p["ki_v"] / s
        A, B = self._current_source(s, np.array([[-pi_p, 0.0], [0.0, 0.0]], dtype=complex))
        # q reference raised with terminal-voltage magnitude (reactive support on sag)
        Fm = p["omega_m"] / (s + p["omega_m"])
        A = A + np.outer(self._R0[:, 1], self._drow) * (p["omega_i"] / (s + p["omega_i"])) * pi_v * Fm
        return A, B

    def _blocks_pll_gfm(self, s):
        p = self.spec.params
        F = p["omega_f"] / (s + p["omega_f"])
        Ti = p["omega_i"] / (s + p["omega_i"])
        Av, Bv = self._vsource(s, -self._w0 * p["m_p"] * F / s, -p["m_q"] * F)
        # current reference from a virtual EMF behind Y_v = G_f, tracked through the
        # PLL frame; the PLL angle only leaks in where the current loop lags
        A = Ti * Av + (1.0 - Ti) * np.outer(self._Ji0, self._qrow) * self._pll(s)
        return A, Ti * Bv

    # -- evaluation -------------------------------------------------------
    def blocks(self, s: complex) -> tuple[np.ndarray, np.ndarray]:
        """Implicit-form matrices ``A(s), B(s)`` of the output-current equation."""
        if self._blocks is None:
            raise ConfigError(f"strategy {self.spec.strategy!r} has no block-diagram form")
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            try:
                return self._blocks(complex(s))
            except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
                raise NumericalError(f"{self.spec.strategy}: evaluation hit a pole ({exc})", s) from exc

    def __call__(self, s: complex) -> np.ndarray:
        s = complex(s)
        strategy = self.spec.strategy
        if strategy == "static_admittance":
            Y = self.spec.params["g"] * I2
        elif strategy == "custom":
            if self.spec.evaluator is not None:
                Y = np.asarray(self.spec.evaluator(s), dtype=complex)
            else:
                ent = self.spec.params["entries"]
                with np.errstate(divide="ignore", invalid="ignore"):
                    Y = np.array([[_rational(ent[r][c], s) for c in range(2)] for r in range(2)], dtype=complex)
            if Y.shape != (2, 2):
                raise NumericalError(f"custom evaluator returned shape {Y.shape}", s)
        else:
            A, B = self.blocks(s)
            M = I2 - B
            if np.linalg.cond(M) > COND_LIMIT:
                raise NumericalError(f"{strategy}: current-loop elimination is singular", s)
            Y = -np.linalg.solve(M, A)
        if not np.all(np.isfinite(Y)):
            raise NumericalError(f"{strategy}: non-finite admittance", s)
        return self.scale * Y if self.scale != 1.0 else Y

    def scaled(self, factor: float) -> "AdmittanceModel":
        return AdmittanceModel(self.spec, self.scale * factor)


def build_admittance(spec: ConverterSpec) -> AdmittanceModel:
    return AdmittanceModel(spec)


def eval_admittance(model: AdmittanceModel, s: complex) -> np.ndarray:
    return model(s)


def converter(strategy: str, op: OperatingPoint | None = None, filter: FilterParams | None = None,
              omega0: float = OMEGA0_DEFAULT, **params) -> AdmittanceModel:
    """Shorthand: build the admittance model of ``strategy`` with parameter overrides."""
    spec = ConverterSpec(strategy, params, filter or FilterParams(), op or DEFAULT_OP, omega0)
    return AdmittanceModel(spec)
