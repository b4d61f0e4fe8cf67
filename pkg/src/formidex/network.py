"""Multi-bus network cases, reduced susceptance blocks and Kron absorption.

Bus ordering everywhere is ``retained`` (as listed in the case) followed by the
optional extra-device bus. The reduced susceptance matrix ``B`` is the Schur
complement of the branch Laplacian (weights ``1/l_pu``) onto those buses, so
``B ⊗ Z^-1(s)`` is the network admittance seen from the device terminals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Hashable

import jsonschema
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .converters import (
    DEFAULT_OP,
    DEFAULT_PARAMS,
    STRATEGIES,
    AdmittanceModel,
    ConverterSpec,
    FilterParams,
    OperatingPoint,
)
from .errors import ConfigError, NumericalError
from .forming_index import sensitivity
from .tfcore import I2, OMEGA0_DEFAULT, LineParams, block_diag2, eval_Zinv, kron_block

DUAL_FORM_RTOL = 1e-9

_NUM = {"type": "number"}
_ID = {"type": ["integer", "string"]}
_DEVICE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["bus", "strategy"],
    "properties": {
        "bus": _ID,
        "strategy": {"enum": [s for s in STRATEGIES if s != "custom"] + ["custom"]},
        "params": {"type": "object"},
        "operating_point": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"ud": _NUM, "uq": _NUM, "id": _NUM, "iq": _NUM},
        },
    },
}
CASE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["buses", "branches", "devices", "retained"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "omega0_rad_s": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number", "minimum": 0},
        "buses": {"type": "array", "items": _ID, "minItems": 1, "uniqueItems": True},
        "branches": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to", "l_pu"],
                "properties": {"from": _ID, "to": _ID, "l_pu": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "devices": {"type": "array", "items": _DEVICE},
        "retained": {"type": "array", "items": _ID, "minItems": 1, "uniqueItems": True},
        "extra_device": _DEVICE,
    },
}
# device params that configure the filter / rating rather than the control law
_DEVICE_KEYS = ("l_f", "r_f", "rating")


@dataclass(frozen=True)
class Device:
    """A converter/load model placed at a bus; ``rating`` scales its admittance to system base."""

    bus: Hashable
    spec: ConverterSpec
    rating: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.rating) and self.rating >= 0):
            raise ConfigError(f"device at bus {self.bus}: rating must be non-negative")

    @cached_property
    def model(self) -> AdmittanceModel:
        return AdmittanceModel(self.spec, self.rating)

    def __call__(self, s):
        try:
            return self.model(s)
        except NumericalError as exc:
            raise NumericalError(f"device at bus {self.bus}: {exc}", exc.s) from exc


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple
    branches: tuple  # (from, to, l_pu); parallel branches already merged
    devices: tuple  # Device per retained bus, in retained order
    retained: tuple
    extra: Device | None = None
    tau: float = 0.1
    omega0: float = OMEGA0_DEFAULT
    name: str = ""
    # reduced susceptance over ``kept`` buses given directly instead of branches
    susceptance: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for attr in ("buses", "branches", "devices", "retained"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if not self.omega0 > 0:
            raise ConfigError("omega0 must be positive")
        if not self.tau >= 0:
            raise ConfigError("tau must be non-negative")
        if len(set(self.buses)) != len(self.buses):
            raise ConfigError("duplicate bus ids")
        known = set(self.buses)
        pairs = set()
        for k, (a, b, l) in enumerate(self.branches):
            if a not in known or b not in known:
                raise ConfigError(f"branches[{k}]: unknown bus {a if a not in known else b}")
            if a == b:
                raise ConfigError(f"branches[{k}]: self-loop at bus {a}")
            if not (np.isfinite(l) and l > 0):
                raise ConfigError(f"branches[{k}].l_pu must be positive, got {l}")
            key = frozenset((a, b))
            if key in pairs:
                raise ConfigError(f"branches[{k}]: duplicate branch {a}-{b}")
            pairs.add(key)
        if len(set(self.retained)) != len(self.retained):
            raise ConfigError("duplicate retained bus")
        for b in self.retained:
            if b not in known:
                raise ConfigError(f"retained bus {b} is not a bus")
        if [d.bus for d in self.devices] != list(self.retained):
            raise ConfigError("exactly one device per retained bus, in retained order, is required")
        if self.extra is not None:
            if self.extra.bus not in known:
                raise ConfigError(f"extra_device.bus {self.extra.bus} is not a bus")
            if self.extra.bus in self.retained:
                raise ConfigError(f"extra_device.bus {self.extra.bus} is also retained")
        if self.susceptance is not None:
            B = np.array(self.susceptance, dtype=float)
            m = len(self.kept)
            if B.shape != (m, m) or not np.all(np.isfinite(B)):
                raise ConfigError(f"susceptance must be a finite {m}x{m} matrix")
            if not np.allclose(B, B.T, rtol=0, atol=1e-12 * max(1.0, np.abs(B).max())):
                raise ConfigError("susceptance must be symmetric")
            B.setflags(write=False)
            object.__setattr__(self, "susceptance", B)
        elif not self.is_connected():
            raise ConfigError("network graph is disconnected")

    # -- topology ----------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.retained)

    @property
    def kept(self) -> tuple:
        """Retained buses followed by the extra-device bus, if any."""
        return self.retained + ((self.extra.bus,) if self.extra is not None else ())

    @cached_property
    def _index(self) -> dict:
        return {b: k for k, b in enumerate(self.buses)}

    def laplacian(self) -> np.ndarray:
        idx = self._index
        L = np.zeros((len(self.buses), len(self.buses)))
        for a, b, l in self.branches:
            w = 1.0 / l
            i, j = idx[a], idx[b]
            L[i, i] += w
            L[j, j] += w
            L[i, j] -= w
            L[j, i] -= w
        return L

    def is_connected(self) -> bool:
        if len(self.buses) == 1:
            return True
        idx = self._index
        rows = [idx[a] for a, _, _ in self.branches]
        cols = [idx[b] for _, b, _ in self.branches]
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(self.buses),) * 2)
        ncomp, _ = connected_components(graph, directed=False)
        return ncomp == 1

    # -- variants ----------------------------------------------------------
    def with_extra(self, spec: ConverterSpec | None, rating: float = 1.0, bus=None) -> "NetworkCase":
        """Same case with the extra device replaced (``None`` drops it)."""
        if spec is None:
            return replace(self, extra=None)
        bus = bus if bus is not None else self.extra.bus
        return replace(self, extra=Device(bus, spec, rating))

    def with_device(self, bus, spec: ConverterSpec, rating: float = 1.0) -> "NetworkCase":
        if self.extra is not None and bus == self.extra.bus:
            return self.with_extra(spec, rating)
        if bus not in self.retained:
            raise ConfigError(f"bus {bus} has no device")
        devices = tuple(Device(bus, spec, rating) if d.bus == bus else d for d in self.devices)
        return replace(self, devices=devices)

    def scaled(self, c: float) -> "NetworkCase":
        """Every branch weight and device admittance multiplied by ``c``."""
        branches = tuple((a, b, l / c) for a, b, l in self.branches)
        devices = tuple(replace(d, rating=d.rating * c) for d in self.devices)
        extra = replace(self.extra, rating=self.extra.rating * c) if self.extra is not None else None
        B = None if self.susceptance is None else c * self.susceptance
        return replace(self, branches=branches, devices=devices, extra=extra, susceptance=B)

    @classmethod
    def from_susceptance(cls, B, devices, extra: Device | None = None, tau: float = 0.1,
                         omega0: float = OMEGA0_DEFAULT, name: str = "") -> "NetworkCase":
        """Case defined by its reduced susceptance over the device buses (extra bus last)."""
        devices = tuple(devices)
        retained = tuple(d.bus for d in devices)
        buses = retained + ((extra.bus,) if extra is not None else ())
        return cls(buses, (), devices, retained, extra, tau, omega0, name, np.asarray(B, dtype=float))


def _parse_device(doc: dict, omega0: float, path: str) -> Device:
    params = dict(doc.get("params", {}))
    strategy = doc["strategy"]
    filt = {k: params.pop(k) for k in ("l_f", "r_f") if k in params}
    rating = params.pop("rating", 1.0)
    opdoc = doc.get("operating_point")
    try:
        if opdoc is None:
            op = DEFAULT_OP
        else:
            op = OperatingPoint(opdoc.get("ud", 1.0), opdoc.get("uq", 0.0), opdoc.get("id", 0.0), opdoc.get("iq", 0.0))
        spec = ConverterSpec(strategy, params, FilterParams(**filt), op, omega0)
        return Device(doc["bus"], spec, float(rating))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{path}.params: {exc}") from exc


def _json_path(error) -> str:
    out = "$"
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def _read_json(document, what: str):
    if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
        path = Path(document)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (FileNotFoundError, IsADirectoryError):
            raise ConfigError(f"{what} not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    if isinstance(document, str):
        try:
            return json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON ({exc})") from None
    return document


def check_schema(document) -> None:
    """Raise ConfigError naming the first offending field path."""
    errors = sorted(jsonschema.Draft202012Validator(CASE_SCHEMA).iter_errors(document),
                    key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(f"{_json_path(errors[0])}: {errors[0].message}")


def load_case(document) -> NetworkCase:
    """Build a validated case from a JSON document (dict, JSON text, or file path)."""
    document = _read_json(document, "case file")
    check_schema(document)

    omega0 = float(document.get("omega0_rad_s", OMEGA0_DEFAULT))
    tau = float(document.get("tau", 0.1))
    # merge parallel branches: admittance weights add
    merged: dict = {}
    order = []
    for k, br in enumerate(document["branches"]):
        key = frozenset((br["from"], br["to"]))
        if len(key) == 1:
            raise ConfigError(f"$.branches[{k}]: self-loop at bus {br['from']}")
        if key not in merged:
            merged[key] = (br["from"], br["to"], 0.0)
            order.append(key)
        a, b, w = merged[key]
        merged[key] = (a, b, w + 1.0 / br["l_pu"])
    branches = tuple((merged[k][0], merged[k][1], 1.0 / merged[k][2]) for k in order)

    by_bus: dict = {}
    for k, dev in enumerate(document["devices"]):
        if dev["bus"] in by_bus:
            raise ConfigError(f"$.devices[{k}].bus: duplicate device at bus {dev['bus']}")
        by_bus[dev["bus"]] = _parse_device(dev, omega0, f"$.devices[{k}]")
    retained = tuple(document["retained"])
    missing = [b for b in retained if b not in by_bus]
    if missing:
        raise ConfigError(f"$.retained: buses without a device: {missing}")
    stray = [b for b in by_bus if b not in retained]
    if stray:
        raise ConfigError(f"$.devices: devices on non-retained buses: {stray}")
    extra = None
    if "extra_device" in document:
        extra = _parse_device(document["extra_device"], omega0, "$.extra_device")
    return NetworkCase(
        buses=tuple(document["buses"]),
        branches=branches,
        devices=tuple(by_bus[b] for b in retained),
        retained=retained,
        extra=extra,
        tau=tau,
        omega0=omega0,
        name=document.get("name", ""),
    )


_STANDALONE_DEVICE = {**_DEVICE, "required": ["strategy"]}


def load_device(document, omega0: float = OMEGA0_DEFAULT) -> Device:
    """A single device entry (``bus`` optional) from a dict, JSON text or file path."""
    document = _read_json(document, "device file")
    errors = sorted(jsonschema.Draft202012Validator(_STANDALONE_DEVICE).iter_errors(document),
                    key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(f"{_json_path(errors[0])}: {errors[0].message}")
    return _parse_device({"bus": 0, **document}, omega0, "$")


def device_to_json(dev: Device) -> dict:
    spec = dev.spec
    defaults = DEFAULT_PARAMS[spec.strategy]
    params = {k: v for k, v in spec.params.items() if k not in defaults or defaults[k] != v}
    params.update({"l_f": spec.filter.l_f, "r_f": spec.filter.r_f})
    if dev.rating != 1.0:
        params["rating"] = dev.rating
    op = spec.op
    return {"bus": dev.bus, "strategy": spec.strategy, "params": params,
            "operating_point": {"ud": op.ud, "uq": op.uq, "id": op.id, "iq": op.iq}}


def case_to_json(case: NetworkCase) -> dict:
    if case.susceptance is not None:
        raise ConfigError("cases defined by a susceptance matrix have no branch-list form")
    doc = {
        "name": case.name,
        "omega0_rad_s": case.omega0,
        "tau": case.tau,
        "buses": list(case.buses),
        "branches": [{"from": a, "to": b, "l_pu": l} for a, b, l in case.branches],
        "devices": [device_to_json(d) for d in case.devices],
        "retained": list(case.retained),
    }
    if case.extra is not None:
        doc["extra_device"] = device_to_json(case.extra)
    return doc


def bundled_case_path(name: str = "ieee39") -> Path:
    return Path(str(resources.files("formidex") / "data" / f"{name}.json"))


def load_bundled(name: str = "ieee39") -> NetworkCase:
    return load_case(bundled_case_path(name))


# -- reduced susceptance -------------------------------------------------------


@dataclass(frozen=True)
class SusceptanceBlocks:
    B: np.ndarray
    n: int
    has_extra: bool

    @property
    def B1(self) -> np.ndarray:
        return self.B[: self.n, : self.n]

    @property
    def B2(self) -> np.ndarray:
        return self.B[: self.n, self.n :]

    @property
    def B3(self) -> np.ndarray:
        return self.B[self.n :, : self.n]

    @property
    def B4(self) -> float:
        return float(self.B[self.n, self.n]) if self.has_extra else 0.0

    def coupling(self) -> np.ndarray:
        """``B2 B3 / B4``; zero without an extra bus."""
        if not self.has_extra:
            return np.zeros((self.n, self.n))
        return self.B2 @ self.B3 / self.B4


def schur_reduce(L: np.ndarray, keep: list[int]) -> np.ndarray:
    """Schur complement of ``L`` onto the ``keep`` indices (order preserved)."""
    m = L.shape[0]
    drop = [k for k in range(m) if k not in set(keep)]
    Lkk = L[np.ix_(keep, keep)]
    if not drop:
        return Lkk.copy()
    Lii = L[np.ix_(drop, drop)]
    if np.linalg.cond(Lii) > 1e12:
        raise ConfigError("interior network block is singular (an interior subnetwork is isolated)")
    Lki = L[np.ix_(keep, drop)]
    return Lkk - Lki @ np.linalg.solve(Lii, Lki.T)


def build_susceptance(case: NetworkCase) -> SusceptanceBlocks:
    if case.susceptance is not None:
        B = np.array(case.susceptance)
    else:
        idx = case._index
        B = schur_reduce(case.laplacian(), [idx[b] for b in case.kept])
        B = 0.5 * (B + B.T)
    blocks = SusceptanceBlocks(B, case.n, case.extra is not None)
    if blocks.has_extra and not blocks.B4 > 0:
        raise ConfigError(f"extra bus {case.extra.bus} has no electrical connection")
    return blocks


def _blocks_of(case: NetworkCase) -> SusceptanceBlocks:
    # cases are immutable; cache the reduction on the instance
    cached = case.__dict__.get("_susceptance")
    if cached is None:
        cached = build_susceptance(case)
        object.__setattr__(case, "_susceptance", cached)
    return cached


# -- frequency-domain blocks ---------------------------------------------------


def device_block(case: NetworkCase, s: complex) -> np.ndarray:
    """Block-diagonal admittance of the retained devices."""
    return block_diag2(d(s) for d in case.devices)


def dual_forms(blocks: SusceptanceBlocks, Y_extra, s: complex, tau: float,
               omega0: float = OMEGA0_DEFAULT):
    """Both expressions for the reduced network admittance ``Ỹ_net``.

    Returns ``(direct, factored, B̃_net)``: the direct Kron elimination of the
    extra bus, and ``(I ⊗ Z^-1) B̃_net`` built from the device's sensitivity
    at ``l_g = 1/B4``. They are algebraically identical.
    """
    n = blocks.n
    Zi = eval_Zinv(s, tau, omega0)
    B1 = blocks.B1
    if not blocks.has_extra:
        direct = kron_block(B1, Zi)
        return direct, direct, kron_block(B1, I2)
    if Y_extra is None:
        def Y_extra(_s):
            return np.zeros((2, 2), complex)

    B4 = blocks.B4
    bracket = B4 * Zi + np.asarray(Y_extra(s), dtype=complex)
    if not np.all(np.isfinite(bracket)) or np.linalg.cond(bracket) > 1e13:
        raise NumericalError("extra-bus bracket B4 Z^-1 + Y is singular", s)
    left = kron_block(blocks.B2, Zi)
    right = kron_block(blocks.B3, Zi)
    direct = kron_block(B1, Zi) - left @ np.linalg.solve(bracket, right)
    Sv = sensitivity(Y_extra, LineParams(1.0 / B4, tau, omega0), s)
    Bt = kron_block(B1, I2) - kron_block(blocks.coupling(), Sv)
    factored = kron_block(np.eye(n), Zi) @ Bt
    return direct, factored, Bt


def absorb_device(blocks: SusceptanceBlocks, Y_extra, s: complex, tau: float,
                  omega0: float = OMEGA0_DEFAULT, rtol: float = DUAL_FORM_RTOL):
    """Kron-absorb the extra bus and its device; returns ``(B̃_net, Ỹ_net)``.

    The two forms from :func:`dual_forms` must agree to ``rtol`` (relative
    Frobenius norm) or a NumericalError flags a convention bug.
    """
    direct, factored, Bt = dual_forms(blocks, Y_extra, s, tau, omega0)
    scale = max(np.linalg.norm(direct), np.linalg.norm(factored))
    diff = np.linalg.norm(direct - factored)
    if not diff <= rtol * scale:
        raise NumericalError(f"dual-form mismatch in extra-bus absorption (rel. diff {diff / scale:.3g})", s)
    return Bt, factored


@dataclass(frozen=True)
class BlockEvaluation:
    s: complex
    Y_de: np.ndarray  # retained devices, block diagonal
    B_net: np.ndarray  # B̃_net
    Y_net: np.ndarray  # Ỹ_net
    Y_cl: np.ndarray  # Ỹ_net + Y_de
    S_v: np.ndarray | None = field(default=None)  # extra device sensitivity at l_g = 1/B4


def evaluate_blocks(case: NetworkCase, s: complex) -> BlockEvaluation:
    blocks = _blocks_of(case)
    Bt, Yt = absorb_device(blocks, case.extra, s, case.tau, case.omega0)
    Yde = device_block(case, s)
    Sv = None
    if case.extra is not None:
        Sv = sensitivity(case.extra, LineParams(1.0 / blocks.B4, case.tau, case.omega0), s)
    return BlockEvaluation(complex(s), Yde, Bt, Yt, Yt + Yde, Sv)


def closed_loop(case: NetworkCase, s: complex) -> np.ndarray:
    """Closed-loop matrix ``Ỹ_Cl(s)`` mapping retained-bus voltages to injected currents."""
    blocks = _blocks_of(case)
    _, Yt = absorb_device(blocks, case.extra, s, case.tau, case.omega0)
    return Yt + device_block(case, s)


def full_system(case: NetworkCase, s: complex) -> np.ndarray:
    """Unreduced ``Y_de + B ⊗ Z^-1`` over retained buses plus the extra bus."""
    blocks = _blocks_of(case)
    devs = list(case.devices) + ([case.extra] if case.extra is not None else [])
    return block_diag2(d(s) for d in devs) + kron_block(blocks.B, eval_Zinv(s, case.tau, case.omega0))
