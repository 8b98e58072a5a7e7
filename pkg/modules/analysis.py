"""Theoretical objects of the convergence analysis.

Covers the 2×2 expectation dynamics A_E, the 6×6 second-moment dynamics A_ms
with its ε-perturbation brackets (Q₁, Q₂, b₁, b₂), the Jury tests, the
parameter feasibility report and a numerical verifier for bracketed affine
recursions. Everything here is for one-dimensional quadratic objectives
J(x) = J* + (μ/2)(x − x*)².

Moment vectors use the layout
    ν_k = (x̃_k, y_k)
    ζ_k = [x̃²_{k−1}, x̃²_k, y²_{k−1}, y²_k, x̃_{k−1}y_{k−1}, x̃_k y_k]
with x̃ = x − x*.
"""
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import linalg

from utils.exceptions import BracketError, ConfigError, MomentBoundError
from utils.logger import logger

STABILITY_GUARD = 1e-12
SIGMA_GUARD = 1e-9
BRACKET_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    relation: str  # ">" or "<"

    @property
    def margin(self):
        return self.lhs - self.rhs if self.relation == ">" else self.rhs - self.lhs

    @property
    def holds(self):
        return self.margin > STABILITY_GUARD

    def to_dict(self):
        return {**asdict(self), "margin": self.margin, "holds": self.holds}


@dataclass(frozen=True)
class JuryResult:
    passed: bool
    conditions: List[Condition]


@dataclass(frozen=True, eq=False)
class JuryTable:
    stable: bool
    rows: List[np.ndarray]


@dataclass(frozen=True)
class StabilityReport:
    feasible: bool
    reasons: List[Condition]
    spectral_radius_ae: float
    spectral_radius_ams: float
    jury_quintic_pass: bool
    mu: Optional[float] = None

    def failed(self):
        return [c.name for c in self.reasons if not c.holds]

    def to_dict(self):
        return {
            "feasible": self.feasible,
            "mu": self.mu,
            "spectral_radius_ae": self.spectral_radius_ae,
            "spectral_radius_ams": self.spectral_radius_ams,
            "jury_quintic_pass": self.jury_quintic_pass,
            "reasons": [c.to_dict() for c in self.reasons],
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True, eq=False)
class ExpectationMatrix:
    a_e: np.ndarray

    @property
    def trace(self):
        return float(np.trace(self.a_e))

    @property
    def det(self):
        return float(linalg.det(self.a_e))


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    a_ms: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    M: float
    F: float
    c_bar: float
    eps: float
    a_e: np.ndarray = field(repr=False, default=None)

    @property
    def lower_matrix(self):
        return self.a_ms + self.eps * self.q1

    @property
    def upper_matrix(self):
        return self.a_ms + self.eps * self.q2


@dataclass(frozen=True, eq=False)
class MomentBounds:
    lower: np.ndarray
    upper: np.ndarray
    expectation: np.ndarray
    sigma_x_upper: np.ndarray
    sigma_y_upper: np.ndarray


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    passed: bool
    limsup: float
    bound: float
    constant_c: float
    lyapunov: np.ndarray
    final_states: np.ndarray
    spectral_radii: dict


@dataclass(frozen=True)
class RhoInterval:
    low: float
    high: float
    beta: float


def spectral_radius(matrix):
    balanced, _ = linalg.matrix_balance(np.asarray(matrix, dtype=float), permute=False)
    return float(np.max(np.abs(linalg.eigvals(balanced))))


# --- Expectation dynamics ---

def build_expectation_matrix(p, mu):
    return ExpectationMatrix(a_e=np.array([
        [1.0, -p.rho],
        [mu * p.gamma, 1.0 - p.beta],
    ]))


def jury_quadratic(p, mu):
    """Jury test for λ² − (2−β)λ + (1−β+μγρ)."""
    mgr = mu * p.gamma * p.rho
    conditions = [
        Condition("expectation p(1) > 0", mgr, 0.0, ">"),
        Condition("expectation p(-1) > 0", 4.0 - 2.0 * p.beta + mgr, 0.0, ">"),
        Condition("expectation |p(0)| < 1", abs(1.0 - p.beta + mgr), 1.0, "<"),
    ]
    return JuryResult(passed=all(c.holds for c in conditions), conditions=conditions)


def expectation_roots(p, mu):
    return np.roots([1.0, -(2.0 - p.beta), 1.0 - p.beta + mu * p.gamma * p.rho])


def propagate_expectation(m, nu0, k):
    """ν_j = A_E^j ν₀ for j = 0..k, shape (k+1, 2)."""
    out = np.empty((k + 1, 2))
    out[0] = np.asarray(nu0, dtype=float)
    for j in range(1, k + 1):
        out[j] = m.a_e @ out[j - 1]
    return out


# --- Second-moment dynamics ---

def build_moment_matrix(p, mu):
    rho, beta, eps = p.rho, p.beta, p.eps
    chi, psi, gamma = p.dither.chi, p.dither.psi, p.gamma
    M, F = 1.0 / eps, 4.0 * eps
    eps0 = eps
    c_bar = rho ** 2 * (rho ** 2 * chi + 2.0 * gamma ** 2) / 4.0

    a_ms = np.zeros((6, 6))
    a_ms[0, 1] = 1.0
    a_ms[1] = [0.0, 1.0, 0.0, rho ** 2 + psi, 0.0, -2.0 * rho]
    a_ms[2, 3] = 1.0
    a_ms[3] = [
        mu ** 2 * (gamma ** 2 + rho ** 2 * chi),
        0.0,
        mu ** 2 / 4.0 * (rho ** 4 * chi + 6.0 * gamma ** 2 * rho ** 2 + gamma ** 2 * psi),
        (1.0 - beta) ** 2,
        -mu ** 2 * rho * (3.0 * gamma ** 2 + rho ** 2 * chi),
        2.0 * (1.0 - beta) * mu * gamma,
    ]
    a_ms[4, 5] = 1.0
    a_ms[5] = [
        mu * gamma,
        0.0,
        mu * gamma / 2.0 * (3.0 * rho ** 2 + psi),
        -rho * (1.0 - beta),
        -3.0 * mu * rho * gamma,
        1.0 - beta - mu * rho * gamma,
    ]

    q1 = np.zeros((6, 6))
    q1[3, 0] = q1[3, 1] = -mu ** 2 * rho ** 2 * chi * M / 2.0

    q2 = np.zeros((6, 6))
    q2[1, 3] = 2.0 * psi
    q2[3, 2] = mu ** 2 * (gamma ** 2 * psi / 2.0 + c_bar * M)
    q2[5, 2] = mu * gamma * psi

    b1 = np.array([0.0, psi * eps0, 0.0, mu ** 2 * gamma ** 2 * psi * eps0 / 4.0, 0.0, mu * gamma * psi * eps0 / 2.0])
    b2 = np.array([
        0.0,
        psi * (0.5 + eps0),
        0.0,
        mu ** 2 * (gamma ** 2 * psi / 4.0 * (eps0 + 0.5) + rho ** 2 * gamma ** 2 * F / 2.0),
        0.0,
        mu * gamma * psi / 4.0 * (2.0 * eps0 + 1.0),
    ])
    return MomentMatrix(
        a_ms=a_ms, q1=q1, q2=q2, b1=b1, b2=b2, M=M, F=F, c_bar=c_bar, eps=eps,
        a_e=build_expectation_matrix(p, mu).a_e,
    )


def jury_quintic_coeffs(rho, beta, q1_weight, q2_weight):
    """(a₄, a₃, a₂, a₁, a₀) of the quintic factor of det(λI − A_ms) with χ = q₁/μ², ψ = q₂ρ⁴."""
    q1, q2 = q1_weight, q2_weight
    s = math.sqrt(q1 * q2)
    r3, r4, r6, r7, r8, r9, r11 = (rho ** e for e in (3, 4, 6, 7, 8, 9, 11))
    q1_32 = q1 ** 1.5

    a4 = 3 * beta - beta ** 2 + s * r3 - 3
    a3 = (
        3 - 6 * beta - 0.25 * q1 * r4 + 4 * beta ** 2 - beta ** 3 - 1.5 * q1 * q2 * r6
        - 0.25 * q1 * q2 ** 2 * r8 + (3 - 2 * beta + beta ** 2) * s * r3
    )
    a2 = (
        3 * beta - 1.5 * q1 * r4 - 3 * beta ** 2 + beta ** 3 + 0.75 * beta * q1 * r4 - 5 * q1 * q2 * r6
        - 1.5 * q1 * q2 ** 2 * r8 - 5 * s * r3 - 0.25 * q1_32 * q2 ** 0.5 * r7
        - 1.5 * q1_32 * q2 ** 1.5 * r9 - 0.25 * q1_32 * q2 ** 2.5 * r11 + 8 * beta * s * r3
        + 4.5 * beta * q1 * q2 * r6 - 4 * beta ** 2 * s * r3 + 0.75 * beta * q1 * q2 ** 2 * r8 - 1
    )
    a1 = (
        -0.25 * q1 * r4 + 0.25 * beta * q1 * r4 + 2.5 * q1 * q2 * r6 - 0.25 * q1 * q2 ** 2 * r8
        + s * r3 - 2 * beta * s * r3 - 2.5 * beta * q1 * q2 * r6
        + beta ** 2 * s * r3 + 0.25 * beta * q1 * q2 ** 2 * r8
    )
    a0 = -0.25 * q1_32 * q2 ** 0.5 * r7 - 1.5 * (q1 * q2) ** 1.5 * r9 - 0.25 * q1_32 * q2 ** 2.5 * r11
    return np.array([a4, a3, a2, a1, a0])


def jury_table(coeffs, guard=STABILITY_GUARD):
    """Jury stability table of a real polynomial, coefficients highest power first."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size == 0:
        raise ValueError("polynomial has no non-zero coefficient")
    if c[0] < 0:
        c = -c
    degree = c.size - 1
    rows = [c]
    stable = np.polyval(c, 1.0) > guard and (-1) ** degree * np.polyval(c, -1.0) > guard
    current = c
    while stable and current.size > 1:
        lead, last = current[0], current[-1]
        if abs(last) >= abs(lead) * (1.0 - guard):
            stable = False
            break
        current = (lead * current - last * current[::-1])[:-1]
        rows.append(current)
    return JuryTable(stable=bool(stable), rows=rows)


def jury_quintic(rho, beta, q1_weight, q2_weight):
    coeffs = jury_quintic_coeffs(rho, beta, q1_weight, q2_weight)
    table = jury_table(np.concatenate([[1.0], coeffs]))
    return table.stable, coeffs


def check_feasibility(p, mu):
    ae = build_expectation_matrix(p, mu)
    ms = build_moment_matrix(p, mu)
    jury = jury_quadratic(p, mu)
    radius_ae = spectral_radius(ae.a_e)
    radius_ams = spectral_radius(ms.a_ms)
    radius_upper = spectral_radius(ms.upper_matrix)
    quintic_pass, _ = jury_quintic(p.rho, p.beta, mu ** 2 * p.dither.chi, p.dither.psi / p.rho ** 4)

    reasons = [
        Condition("beta > mu*gamma*rho", p.beta, mu * p.gamma * p.rho, ">"),
        *jury.conditions,
        Condition("spectral_radius(A_ms) < 1", radius_ams, 1.0, "<"),
        Condition("spectral_radius(A_ms + eps*Q2) < 1", radius_upper, 1.0, "<"),
    ]
    report = StabilityReport(
        feasible=all(c.holds for c in reasons),
        reasons=reasons,
        spectral_radius_ae=radius_ae,
        spectral_radius_ams=radius_ams,
        jury_quintic_pass=quintic_pass,
        mu=float(mu),
    )
    if not report.feasible:
        logger.info(f"Parameters infeasible for mu = {mu:.6g}: failed {', '.join(report.failed())}")
    return report


def check_feasibility_per_coordinate(p, quad):
    """One-dimensional surrogate reports with μᵢ = 2·sym(H)ᵢᵢ for each coordinate."""
    curvatures = 2.0 * np.diag(quad.symmetric_part())
    return [check_feasibility(p, float(mu)) for mu in curvatures]


def _check_zeta(zeta, tol=1e-9):
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (6,):
        raise ConfigError(f"zeta must have 6 entries, got shape {zeta.shape}")
    scale = 1.0 + np.abs(zeta).max()
    if (zeta[:4] < -tol * scale).any():
        raise ConfigError(f"second-moment entries must be non-negative, got {zeta[:4]}")
    if zeta[4] ** 2 > zeta[0] * zeta[2] + tol * scale ** 2 or zeta[5] ** 2 > zeta[1] * zeta[3] + tol * scale ** 2:
        raise ConfigError("cross moments violate the Cauchy-Schwarz inequality")
    return zeta


def moment_bracket(m, zeta):
    """One-step bracket [(A+εQ₁)ζ + εb₁, (A+εQ₂)ζ + εb₂]."""
    zeta = np.asarray(zeta, dtype=float)
    lower = m.lower_matrix @ zeta + m.eps * m.b1
    upper = m.upper_matrix @ zeta + m.eps * m.b2
    return lower, upper


def _sigma_bound(second, mean, label):
    radicand = second - mean ** 2
    floor = -SIGMA_GUARD * np.maximum(1.0, np.abs(second))
    if (radicand < floor).any():
        k = int(np.argmax(radicand < floor))
        raise MomentBoundError(f"{label} variance bound is negative at step {k}: {radicand[k]:.6g}")
    if (radicand < 0).any():
        logger.warning(f"Clamped {int((radicand < 0).sum())} slightly negative {label} variance bounds to zero")
    return np.sqrt(np.maximum(radicand, 0.0))


def propagate_moment_bounds(m, zeta0, k, nu0=None):
    """Iterate both bound recursions k times from ζ₀, plus the 1-σ upper bounds."""
    zeta0 = _check_zeta(zeta0)
    lower = np.empty((k + 1, 6))
    upper = np.empty((k + 1, 6))
    lower[0] = upper[0] = zeta0
    for j in range(1, k + 1):
        lower[j] = m.lower_matrix @ lower[j - 1] + m.eps * m.b1
        upper[j] = m.upper_matrix @ upper[j - 1] + m.eps * m.b2

    nu0 = np.zeros(2) if nu0 is None else np.asarray(nu0, dtype=float)
    expectation = propagate_expectation(ExpectationMatrix(m.a_e), nu0, k)
    return MomentBounds(
        lower=lower,
        upper=upper,
        expectation=expectation,
        sigma_x_upper=_sigma_bound(upper[:, 1], expectation[:, 0], "x"),
        sigma_y_upper=_sigma_bound(upper[:, 3], expectation[:, 1], "y"),
    )


def initial_moments(p, x0, y0, x_star):
    """(ν₁, ζ₁) for a deterministic start with x₋₁ := x₀, y₋₁ := y₀."""
    xt0 = float(x0) - float(x_star)
    y0 = float(y0)
    xt1 = xt0 - p.rho * y0
    y1 = (1.0 - p.beta) * y0
    nu1 = np.array([xt1, y1])
    zeta1 = np.array([
        xt0 ** 2,
        xt1 ** 2 + (abs(y0) + p.eps) ** 2 * p.dither.psi,
        y0 ** 2,
        y1 ** 2,
        xt0 * y0,
        xt1 * y1,
    ])
    return nu1, zeta1


def theoretical_profile(p, mu, x0, y0, x_star, n_steps):
    """Theoretical mean and 1-σ upper bounds for steps 0..n_steps from a deterministic start."""
    nu1, zeta1 = initial_moments(p, x0, y0, x_star)
    bounds = propagate_moment_bounds(build_moment_matrix(p, mu), zeta1, n_steps - 1, nu0=nu1)
    return pd.DataFrame({
        "k": np.arange(n_steps + 1),
        "theory_mean_x": np.concatenate([[float(x0)], bounds.expectation[:, 0] + float(x_star)]),
        "theory_mean_y": np.concatenate([[float(y0)], bounds.expectation[:, 1]]),
        "theory_sigma_x_upper": np.concatenate([[0.0], bounds.sigma_x_upper]),
        "theory_sigma_y_upper": np.concatenate([[0.0], bounds.sigma_y_upper]),
    })


def bound_abs_expectation(second_moment):
    if second_moment < 0:
        raise ValueError(f"second moment must be non-negative, got {second_moment}")
    return 0.25 + second_moment


def t1(y, eps):
    a = np.abs(y)
    return (eps + 2.0 * a) / (a + eps) ** 2


def t2(y, eps):
    a = np.abs(y)
    return eps * (eps + 2.0 * a) ** 2 / (a + eps) ** 2


def remainder_ry(p, mu, x_tilde_prev, x_tilde, y_prev):
    """Sample estimate of the ε-remainder R_y(ε) in the E[y²_{k+1}] recursion."""
    eps, chi, psi, gamma, rho = p.eps, p.dither.chi, p.dither.psi, p.gamma, p.rho
    c_bar = rho ** 2 * (rho ** 2 * chi + 2.0 * gamma ** 2) / 4.0
    x_tilde_prev, x_tilde, y_prev = (np.asarray(a, dtype=float) for a in (x_tilde_prev, x_tilde, y_prev))
    T1 = t1(y_prev, eps)
    return mu ** 2 * eps * (
        gamma ** 2 * psi / 4.0 * (eps + 2.0 * np.mean(np.abs(y_prev)))
        - rho ** 2 * chi / 2.0 * np.mean(T1 * (x_tilde ** 2 + x_tilde_prev ** 2))
        + c_bar * np.mean(T1 * y_prev ** 2)
        + rho ** 2 * gamma ** 2 / 2.0 * np.mean(t2(y_prev, eps))
    )


def remainder_bounds(m, zeta):
    """Row-4 ε-terms of the two bound recursions: the bracket on R_y(ε)."""
    zeta = np.asarray(zeta, dtype=float)
    lower = m.eps * (m.q1[3] @ zeta + m.b1[3])
    upper = m.eps * (m.q2[3] @ zeta + m.b2[3])
    return lower, upper


def feasible_rho_interval(p, mu, rho_max=1.0, tol=1e-6, n_grid=200):
    """Feasible ρ-interval at fixed β, χ, ψ, ε found by a log-grid scan and bisection."""
    def feasible(rho):
        return check_feasibility(replace(p, rho=float(rho)), mu).feasible

    grid = np.geomspace(rho_max * 1e-6, rho_max, n_grid)
    verdicts = [feasible(r) for r in grid]
    if not any(verdicts):
        logger.warning(f"No feasible rho found on (0, {rho_max}] for beta = {p.beta}")
        return None
    first = verdicts.index(True)
    last = first
    while last + 1 < n_grid and verdicts[last + 1]:
        last += 1

    def bisect(bad, good):
        while abs(good - bad) > tol:
            mid = 0.5 * (bad + good)
            if feasible(mid):
                good = mid
            else:
                bad = mid
        return good

    low = grid[0] if first == 0 else bisect(grid[first - 1], grid[first])
    high = grid[-1] if last == n_grid - 1 else bisect(grid[last + 1], grid[last])
    logger.info(f"Feasible rho interval at beta = {p.beta}: [{low:.6g}, {high:.6g}]")
    return RhoInterval(low=float(low), high=float(high), beta=p.beta)


# --- Bracketed affine recursions ---

def verify_practical_convergence(a, q1, q2, b1, b2, eta, trials, theta0=None, n_steps=5000, seed=0):
    """Drive θ_{k+1} uniformly inside [(a+ηq₁)θ_k + ηb₁, (a+ηq₂)θ_k + ηb₂] and measure limsup ‖θ_k‖."""
    a, q1, q2 = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (a, q1, q2))
    b1, b2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (b1, b2))
    n = a.shape[0]
    lower_matrix, upper_matrix = a + eta * q1, a + eta * q2

    radii = {
        "a": spectral_radius(a),
        "a + eta*q1": spectral_radius(lower_matrix),
        "a + eta*q2": spectral_radius(upper_matrix),
    }
    unstable = [name for name, r in radii.items() if not r < 1.0]
    if unstable:
        raise ConfigError(f"spectral radius not below 1 for {', '.join(unstable)}: {radii}")

    lyapunov = linalg.solve_discrete_lyapunov(a.T, np.eye(n))
    resolvent = linalg.inv(np.eye(n) - upper_matrix)
    constant_c = 2.0 * linalg.norm(resolvent, 2) * max(linalg.norm(b1), linalg.norm(b2))
    bound = constant_c * eta

    theta_start = np.zeros(n) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=float))
    tail = max(1, n_steps // 10)
    limsup = 0.0
    finals = np.empty((trials, n))
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        theta = theta_start.copy()
        for k in range(n_steps):
            lower = lower_matrix @ theta + eta * b1
            upper = upper_matrix @ theta + eta * b2
            empty = lower - upper > BRACKET_TOLERANCE * (1.0 + np.abs(upper))
            if empty.any():
                i = int(np.argmax(empty))
                raise BracketError(
                    f"empty bracket at step {k}, entry {i}: lower {lower[i]:.6g} > upper {upper[i]:.6g}"
                )
            theta = lower + rng.random(n) * (upper - lower)
            if k >= n_steps - tail:
                limsup = max(limsup, float(linalg.norm(theta)))
        finals[trial] = theta

    atol = BRACKET_TOLERANCE * max(1.0, float(linalg.norm(theta_start)))
    passed = limsup <= bound + atol
    logger.info(f"Practical convergence check: limsup {limsup:.6g} vs bound {bound:.6g} ({'pass' if passed else 'fail'})")
    return ConvergenceReport(
        passed=passed, limsup=limsup, bound=bound, constant_c=constant_c,
        lyapunov=lyapunov, final_states=finals, spectral_radii=radii,
    )
