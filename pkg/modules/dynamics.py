"""One-step transition maps of the delayed-dither extremum seeking systems.

All maps work on a batch of independent trajectories at once: every array
in a `TrajectoryState` has the trajectory index as its first axis. A map is
pure: it returns a new state and never touches the one it was given.
"""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from modules.dither import DitherDraw, DitherSpec, sample
from utils.exceptions import ConfigError
from utils.rng import TAG_BOOTSTRAP


class SystemKind(str, Enum):
    ADAPTIVE_1D = "adaptive1d"
    NONADAPTIVE_1D = "nonadaptive1d"
    FIRST_ORDER = "firstorder"
    MULTIDIM = "multidim"


@dataclass(frozen=True)
class AlgoParams:
    rho: float
    beta: float
    eps: float
    dither: DitherSpec
    g_decay: bool = False  # first-order system only: g_k = g(w_k)/√k

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ConfigError(f"rho must be positive, got {self.rho!r}")
        if not (0 < self.beta < 2):
            raise ConfigError(f"beta must lie in (0, 2), got {self.beta!r}")
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ConfigError(f"eps must be positive, got {self.eps!r}")

    @property
    def gamma(self):
        return self.dither.gamma


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    x: np.ndarray
    y: np.ndarray
    y_prev: np.ndarray
    J_prev: np.ndarray
    w_prev: DitherDraw
    k: int
    diverged: np.ndarray

    @property
    def batch(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]


def _broadcast_rows(value, batch, dim, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.ndim == 1:
        if arr.size != dim:
            raise ConfigError(f"{name} has dimension {arr.size}, objective expects {dim}")
        arr = np.tile(arr, (batch, 1))
    if arr.shape != (batch, dim):
        raise ConfigError(f"{name} has shape {arr.shape}, expected ({batch}, {dim})")
    return arr.copy()


def init_state(x0, y0, obj, stream, dither):
    """Start every trajectory of `stream` at (x0, y0) with x₋₁ := x₀ and y₋₁ := y₀."""
    batch, dim = stream.batch, obj.dim
    x = _broadcast_rows(x0, batch, dim, "x0")
    y = _broadcast_rows(y0, batch, dim, "y0")
    return TrajectoryState(
        x=x,
        y=y,
        y_prev=y.copy(),
        J_prev=obj(x),
        w_prev=sample(dither, stream.at(0), dim=dim, tag=TAG_BOOTSTRAP),
        k=0,
        diverged=np.zeros(batch, dtype=bool),
    )


def _advance(s, x, y, J_x, w):
    """Assemble the successor state and freeze rows that stopped being finite."""
    bad = s.diverged | ~(
        np.isfinite(x).all(axis=1) & np.isfinite(y).all(axis=1) & np.isfinite(J_x)
    )
    if bad.any():
        x[bad] = np.nan
        y[bad] = np.nan
        J_x = np.where(bad, np.nan, J_x)
    return TrajectoryState(
        x=x, y=y, y_prev=s.y, J_prev=J_x, w_prev=w, k=s.k + 1, diverged=bad,
    )


def step_adaptive_1d(s, p, obj, stream):
    if obj.dim != 1:
        raise ConfigError(f"adaptive 1-D step needs a one-dimensional objective, got dim {obj.dim}")
    w = sample(p.dither, stream.at(s.k), dim=1)
    with np.errstate(over="ignore", invalid="ignore"):
        J_x = obj(s.x)
        x = s.x - p.rho * s.y + (np.abs(s.y) + p.eps) * w.g_of_w
        y = (1.0 - p.beta) * s.y + (s.w_prev.h_of_w / (np.abs(s.y_prev) + p.eps)) * (J_x - s.J_prev)[:, None]
    return _advance(s, x, y, J_x, w)


def step_nonadaptive_1d(s, p, obj, stream):
    if obj.dim != 1:
        raise ConfigError(f"non-adaptive 1-D step needs a one-dimensional objective, got dim {obj.dim}")
    w = sample(p.dither, stream.at(s.k), dim=1)
    with np.errstate(over="ignore", invalid="ignore"):
        J_x = obj(s.x)
        x = s.x - p.rho * s.y + w.g_of_w
        y = (1.0 - p.beta) * s.y + s.w_prev.h_of_w * (J_x - s.J_prev)[:, None]
    return _advance(s, x, y, J_x, w)


def step_first_order(s, p, obj, stream):
    """x⁺ = x − h(w_prev)·(J(x) − J_prev) + g_k; the y slots stay at zero."""
    if obj.dim != 1:
        raise ConfigError(f"first-order step needs a one-dimensional objective, got dim {obj.dim}")
    w = sample(p.dither, stream.at(s.k), dim=1)
    g_k = w.g_of_w / math.sqrt(max(s.k, 1)) if p.g_decay else w.g_of_w
    with np.errstate(over="ignore", invalid="ignore"):
        J_x = obj(s.x)
        x = s.x - s.w_prev.h_of_w * (J_x - s.J_prev)[:, None] + g_k
    return _advance(s, x, np.zeros_like(s.y), J_x, w)


def step_multidim(s, p, obj, stream):
    w = sample(p.dither, stream.at(s.k), dim=obj.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        J_x = obj(s.x)
        scale = np.abs(s.y) + p.eps
        scale_prev = np.abs(s.y_prev) + p.eps
        sq_norm_prev = np.sum(scale_prev * scale_prev, axis=1, keepdims=True)
        x = s.x - p.rho * s.y + w.g_of_w * scale
        y = (1.0 - p.beta) * s.y + (s.w_prev.h_of_w * scale_prev / sq_norm_prev) * (J_x - s.J_prev)[:, None]
    return _advance(s, x, y, J_x, w)


STEP_FUNCTIONS = {
    SystemKind.ADAPTIVE_1D: step_adaptive_1d,
    SystemKind.NONADAPTIVE_1D: step_nonadaptive_1d,
    SystemKind.FIRST_ORDER: step_first_order,
    SystemKind.MULTIDIM: step_multidim,
}


def step(system, s, p, obj, stream):
    return STEP_FUNCTIONS[SystemKind(system)](s, p, obj, stream)


def delta_expansion(x_prev, y_prev, g_prev, p, quad):
    """Δ with J(x_k) = J(x_{k−1}) + μΔ_{k−1} along the adaptive map on a 1-D quadratic."""
    x_tilde = np.asarray(x_prev, dtype=float) - quad.center[0]
    y_prev = np.asarray(y_prev, dtype=float)
    g_prev = np.asarray(g_prev, dtype=float)
    scale = np.abs(y_prev) + p.eps
    return (
        (x_tilde - p.rho * y_prev) * scale * g_prev
        - p.rho * x_tilde * y_prev
        + 0.5 * p.rho ** 2 * y_prev ** 2
        + 0.5 * g_prev ** 2 * scale ** 2
    )
