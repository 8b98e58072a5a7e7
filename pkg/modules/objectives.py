"""Objective functions J: ℝⁿ → ℝ, evaluated on batches of points."""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from utils.exceptions import ConfigError, CurvatureError, NotPositiveDefiniteError

J_OFFSET = 10000.0

OBJECTIVE_IDS = ("quad1d", "x2cos", "logistic", "quadNd")

MULTIDIM_X_STAR = [5.2e5, 1.23e5, -3.2e5]
MULTIDIM_HESSIAN = [
    [0.7, 0.1, 0.2],
    [0.3, 0.4, 0.3],
    [0.4, 0.0, 0.5],
]


def as_batch(x, dim):
    """Reshape a point or a batch of points to (batch, dim)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[-1] != dim:
        raise ConfigError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """J(x) = offset + (x − center)ᵀ H (x − center), H kept exactly as given."""
    offset: float
    center: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        hessian = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        if hessian.shape != (center.size, center.size):
            raise ConfigError(f"hessian shape {hessian.shape} does not match center of size {center.size}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "hessian", hessian)
        eigenvalues = linalg.eigvalsh(self.symmetric_part())
        if eigenvalues.min() <= 0:
            raise NotPositiveDefiniteError(
                f"symmetric part of H is not positive definite (smallest eigenvalue {eigenvalues.min():.6g})"
            )

    @property
    def dim(self):
        return self.center.size

    @property
    def mu(self):
        if self.dim != 1:
            raise ConfigError("scalar curvature is only defined for one-dimensional quadratics")
        return 2.0 * float(self.hessian[0, 0])

    def symmetric_part(self):
        return 0.5 * (self.hessian + self.hessian.T)

    def __call__(self, x):
        d = as_batch(x, self.dim) - self.center
        return self.offset + np.einsum("bi,ij,bj->b", d, self.hessian, d)

    def gradient(self, x):
        d = as_batch(x, self.dim) - self.center
        return d @ (self.hessian + self.hessian.T).T


@dataclass(frozen=True, eq=False)
class Objective:
    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    dim: int
    known_minimizer: Optional[np.ndarray] = None
    known_curvature_mu: Optional[float] = None
    quadratic: Optional[QuadraticForm] = field(default=None, repr=False)

    def __call__(self, x):
        return self.eval(as_batch(x, self.dim))


def _x2cos(x):
    return J_OFFSET + (x[:, 0] ** 2) * np.cos(0.2 * x[:, 0])


def _x2cos_minimizer(guess):
    result = minimize_scalar(
        lambda t: t * t * math.cos(0.2 * t),
        bounds=(guess - 5.0, guess + 5.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    # the origin is a stationary point the bounded search only approaches
    return 0.0 if abs(result.x) < 1e-6 else float(result.x)


def make_objective(objective_id, params=None):
    params = dict(params or {})
    if objective_id == "quad1d":
        x_star = float(params.get("x_star", 25.0))
        quad = QuadraticForm(offset=J_OFFSET, center=[x_star], hessian=[[1.0]])
        return Objective(
            name="quad1d", eval=quad, dim=1,
            known_minimizer=np.array([x_star]), known_curvature_mu=2.0, quadratic=quad,
        )

    if objective_id == "x2cos":
        x_star = _x2cos_minimizer(float(params.get("x_star", 0.0)))
        return Objective(name="x2cos", eval=_x2cos, dim=1, known_minimizer=np.array([x_star]))

    if objective_id == "logistic":
        x_star = float(params.get("x_star", 350.0))

        def logistic(x):
            d = x[:, 0] - x_star
            return J_OFFSET + np.logaddexp(0.0, d) + np.logaddexp(0.0, -d)

        return Objective(name="logistic", eval=logistic, dim=1, known_minimizer=np.array([x_star]))

    if objective_id == "quadNd":
        x_star = np.asarray(params.get("x_star", MULTIDIM_X_STAR), dtype=float)
        hessian = np.asarray(params.get("hessian", MULTIDIM_HESSIAN), dtype=float)
        quad = QuadraticForm(offset=J_OFFSET, center=x_star, hessian=hessian)
        mu = quad.mu if quad.dim == 1 else None
        return Objective(
            name="quadNd", eval=quad, dim=quad.dim,
            known_minimizer=x_star, known_curvature_mu=mu, quadratic=quad,
        )

    raise ConfigError(f"unknown objective id {objective_id!r}; expected one of {', '.join(OBJECTIVE_IDS)}")


def curvature_at_minimizer(obj):
    if obj.known_minimizer is None:
        raise ConfigError(f"objective {obj.name} has no known minimizer")
    if obj.known_curvature_mu is not None:
        return float(obj.known_curvature_mu)
    if obj.dim != 1:
        raise ConfigError("finite-difference curvature is only defined for one-dimensional objectives")

    x_star = float(obj.known_minimizer[0])
    h = 1e-4 * (1.0 + abs(x_star))
    values = obj(np.array([x_star - h, x_star, x_star + h]))
    mu = float((values[0] - 2.0 * values[1] + values[2]) / (h * h))
    if not mu > 0:
        raise CurvatureError(f"non-positive curvature estimate {mu:.6g} at x = {x_star:.6g} for {obj.name}")
    return mu


def gradient_fd(obj, x, step=1e-3):
    """Central-difference gradient at a single point."""
    x = np.asarray(x, dtype=float).reshape(obj.dim)
    offsets = step * np.eye(obj.dim)
    return (obj(x + offsets) - obj(x - offsets)) / (2.0 * step)
