"""Numerical backbone: dq line-impedance form, Kronecker blocks, singular-value extremes."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

OMEGA0_DEFAULT = 2 * np.pi * 60.0
I2 = np.eye(2, dtype=complex)
# 90-degree rotation in the dq plane: J @ [d, q] = [-q, d]
J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class LineParams:
    """Inductive line in per-unit: inductance ``l_g``, R/L ratio ``tau``."""

    l_g: float
    tau: float = 0.1
    omega0: float = OMEGA0_DEFAULT

    def __post_init__(self):
        if not self.l_g >= 0:
            raise ConfigError(f"l_g must be non-negative, got {self.l_g}")
        if not self.tau >= 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        if not self.omega0 > 0:
            raise ConfigError(f"omega0 must be positive, got {self.omega0}")


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing frequencies in Hz."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("frequency grid needs at least two points")
        if not np.all(np.isfinite(pts)) or pts[0] <= 0:
            raise ConfigError("frequency grid points must be finite and positive")
        if np.any(np.diff(pts) <= 0):
            raise ConfigError("frequency grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    @property
    def s(self) -> np.ndarray:
        """Laplace points j*2*pi*f in rad/s."""
        return 2j * np.pi * self.points


def make_freq_grid(fmin_hz: float = 0.01, fmax_hz: float = 1000.0, n_points: int = 400) -> FrequencyGrid:
    """Log-spaced grid with both endpoints included."""
    if not (np.isfinite(fmin_hz) and np.isfinite(fmax_hz)) or not 0 < fmin_hz < fmax_hz:
        raise ConfigError(f"need 0 < fmin < fmax, got fmin={fmin_hz}, fmax={fmax_hz}")
    if int(n_points) != n_points or n_points < 2:
        raise ConfigError(f"n_points must be an integer >= 2, got {n_points}")
    pts = np.logspace(np.log10(fmin_hz), np.log10(fmax_hz), int(n_points))
    # pin the endpoints exactly; logspace can be off by an ulp
    pts[0], pts[-1] = fmin_hz, fmax_hz
    return FrequencyGrid(pts)


def eval_Z(s: complex, tau: float, omega0: float = OMEGA0_DEFAULT) -> np.ndarray:
    """Per-unit dq impedance shape of an RL branch, ``[[s/w0+tau, -1], [1, s/w0+tau]]``.

    ``s`` is in absolute rad/s; the normalisation by ``omega0`` happens here.
    The physical branch impedance is ``l * eval_Z(s, r/l)``.
    """
    if not omega0 > 0:
        raise ConfigError(f"omega0 must be positive, got {omega0}")
    d = s / omega0 + tau
    return np.array([[d, -1.0], [1.0, d]], dtype=complex)


def eval_Zinv(s: complex, tau: float, omega0: float = OMEGA0_DEFAULT) -> np.ndarray:
    """Closed-form inverse of :func:`eval_Z`."""
    d = s / omega0 + tau
    det = d * d + 1.0
    if det == 0:
        raise NumericalError("line impedance form is singular", s)
    return np.array([[d, 1.0], [-1.0, d]], dtype=complex) / det


def check_finite(M: np.ndarray, what: str = "matrix", s=None) -> np.ndarray:
    if not np.all(np.isfinite(M)):
        raise NumericalError(f"non-finite entries in {what}", s)
    return M


def svd_extremes(M) -> tuple[float, float]:
    """Largest and smallest singular value of ``M``."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ConfigError("svd_extremes expects a 2-D matrix")
    check_finite(M)
    try:
        sv = np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    return float(sv[0]), float(sv[-1])


def sigma_max(M) -> float:
    return svd_extremes(M)[0]


def sigma_min(M) -> float:
    return svd_extremes(M)[1]


def kron_block(B, M) -> np.ndarray:
    """``B ⊗ M``: block (i, k) equals ``B[i, k] * M``."""
    B = np.atleast_2d(np.asarray(B))
    if not np.all(np.isfinite(B)):
        raise ConfigError("kron_block: B has non-finite entries")
    return np.kron(B, np.asarray(M, dtype=complex))


def block_diag2(blocks) -> np.ndarray:
    """Block-diagonal assembly of a sequence of 2x2 matrices."""
    blocks = list(blocks)
    out = np.zeros((2 * len(blocks), 2 * len(blocks)), dtype=complex)
    for k, b in enumerate(blocks):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = b
    return out


def rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def thread_count() -> int:
    """Worker cap from ``FORMIDEX_THREADS`` (default 1)."""
    raw = os.environ.get("FORMIDEX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"FORMIDEX_THREADS must be an integer, got {raw!r}") from None


def map_points(fn, points) -> list:
    """Apply ``fn`` to each point; results keep input order regardless of threading."""
    points = list(points)
    n = thread_count()
    if n == 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, points))
