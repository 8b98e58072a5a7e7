"""Monte Carlo ensembles of independent trajectories and their per-step statistics.

Trajectories are split into fixed index ranges ("chunks"). Every chunk is
simulated as one vectorized batch and reduced to per-step central moments;
the chunk moments are then merged pairwise in index order. The partition
depends on the chunk size only, so statistics are bit-identical for any
number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import pandas as pd

from config import CHUNK_SIZE, CSV_COLUMNS, ES_THREADS, Y0_HIGH, Y0_LOW
from modules.dynamics import SystemKind, init_state, step
from utils.exceptions import ConfigError, DivergenceError
from utils.logger import logger
from utils.rng import TAG_X0, TAG_Y0, RandomStream

MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class UniformRange:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ConfigError(f"uniform range needs low < high, got [{self.low}, {self.high}]")

    def scale(self, u):
        return self.low + (self.high - self.low) * u

    def to_dict(self):
        return {"uniform": [self.low, self.high]}


def draw_y0(seed, dim, spread=None):
    """The one-time y₀ draw shared by every trajectory of a run."""
    spread = spread or UniformRange(Y0_LOW, Y0_HIGH)
    u = RandomStream.for_trajectories(seed, 0, 1).uniforms(dim=dim, tag=TAG_Y0)[0]
    return spread.scale(u)


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    n_traj: int
    n_steps: int
    seed: int
    x0: object
    y0: object = field(default_factory=lambda: UniformRange(Y0_LOW, Y0_HIGH))
    system: SystemKind = SystemKind.ADAPTIVE_1D
    n_threads: int = ES_THREADS
    chunk_size: int = CHUNK_SIZE

    def __post_init__(self):
        if int(self.n_traj) < 1:
            raise ConfigError(f"n_traj must be at least 1, got {self.n_traj}")
        if int(self.n_steps) < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.n_threads) < 1 or int(self.chunk_size) < 1:
            raise ConfigError("n_threads and chunk_size must be positive")
        try:
            object.__setattr__(self, "system", SystemKind(self.system))
        except ValueError:
            raise ConfigError(f"unknown system {self.system!r}")

    def resolved_y0(self, dim):
        if isinstance(self.y0, UniformRange):
            return draw_y0(self.seed, dim, self.y0)
        return np.atleast_1d(np.asarray(self.y0, dtype=float))

    def initial_x(self, stream, dim):
        if isinstance(self.x0, UniformRange):
            return self.x0.scale(stream.at(0).uniforms(dim=dim, tag=TAG_X0))
        return np.atleast_1d(np.asarray(self.x0, dtype=float))

    def chunks(self):
        size = int(self.chunk_size)
        return [(start, min(start + size, self.n_traj)) for start in range(0, self.n_traj, size)]


@dataclass(eq=False)
class ChunkMoments:
    """Per-step count, means and central moment sums of one index range."""
    count: np.ndarray
    mean_x: np.ndarray
    m2_x: np.ndarray
    m3_x: np.ndarray
    m4_x: np.ndarray
    mean_y: np.ndarray
    m2_y: np.ndarray
    c_xy: np.ndarray

    @classmethod
    def empty(cls, n_rows, dim):
        zeros = lambda: np.zeros((n_rows, dim))
        return cls(np.zeros(n_rows), zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros())

    def record(self, k, x, y, valid):
        n = int(valid.sum())
        self.count[k] = n
        if n == 0:
            return
        xv, yv = x[valid], y[valid]
        mx, my = xv.mean(axis=0), yv.mean(axis=0)
        dx, dy = xv - mx, yv - my
        dx2 = dx * dx
        self.mean_x[k], self.mean_y[k] = mx, my
        self.m2_x[k] = dx2.sum(axis=0)
        self.m3_x[k] = (dx2 * dx).sum(axis=0)
        self.m4_x[k] = (dx2 * dx2).sum(axis=0)
        self.m2_y[k] = (dy * dy).sum(axis=0)
        self.c_xy[k] = (dx * dy).sum(axis=0)

    def merge(self, other):
        """Pairwise update of means and central moment sums."""
        na, nb = self.count[:, None], other.count[:, None]
        n = na + nb
        with np.errstate(invalid="ignore", divide="ignore"):
            fb = np.where(n > 0, nb / n, 0.0)
            nab = np.where(n > 0, na * nb / n, 0.0)
            dx = other.mean_x - self.mean_x
            dy = other.mean_y - self.mean_y
            m2a, m2b = self.m2_x, other.m2_x
            m3a, m3b = self.m3_x, other.m3_x

            m4 = (
                self.m4_x + other.m4_x
                + dx ** 4 * nab * np.where(n > 0, (na * na - na * nb + nb * nb) / (n * n), 0.0)
                + 6.0 * dx ** 2 * np.where(n > 0, (na * na * m2b + nb * nb * m2a) / (n * n), 0.0)
                + 4.0 * dx * np.where(n > 0, (na * m3b - nb * m3a) / n, 0.0)
            )
            m3 = (
                m3a + m3b
                + dx ** 3 * nab * np.where(n > 0, (na - nb) / n, 0.0)
                + 3.0 * dx * np.where(n > 0, (na * m2b - nb * m2a) / n, 0.0)
            )
        return ChunkMoments(
            count=self.count + other.count,
            mean_x=self.mean_x + dx * fb,
            m2_x=m2a + m2b + dx * dx * nab,
            m3_x=m3,
            m4_x=m4,
            mean_y=self.mean_y + dy * fb,
            m2_y=self.m2_y + other.m2_y + dy * dy * nab,
            c_xy=self.c_xy + other.c_xy + dx * dy * nab,
        )


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    mean_x: np.ndarray
    var_x: np.ndarray
    mean_y: np.ndarray
    var_y: np.ndarray
    cov_xy: np.ndarray
    m4_x: np.ndarray
    n_valid: np.ndarray
    n_traj: int
    n_diverged: int

    @classmethod
    def from_moments(cls, moments, n_traj, n_diverged):
        n = moments.count[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            unbiased = np.where(n > 1, 1.0 / np.maximum(n - 1, 1), 0.0)
            per_sample = np.where(n > 0, 1.0 / np.maximum(n, 1), np.nan)
        return cls(
            mean_x=np.where(n > 0, moments.mean_x, np.nan),
            var_x=moments.m2_x * unbiased,
            mean_y=np.where(n > 0, moments.mean_y, np.nan),
            var_y=moments.m2_y * unbiased,
            cov_xy=moments.c_xy * unbiased,
            m4_x=moments.m4_x * per_sample,
            n_valid=moments.count.astype(int),
            n_traj=int(n_traj),
            n_diverged=int(n_diverged),
        )

    @property
    def sigma_x(self):
        return np.sqrt(self.var_x)

    @property
    def sigma_y(self):
        return np.sqrt(self.var_y)

    @property
    def n_steps(self):
        return self.mean_x.shape[0] - 1

    @property
    def dim(self):
        return self.mean_x.shape[1]

    def standard_error_mean_x(self):
        return self.sigma_x / np.sqrt(np.maximum(self.n_valid, 1))[:, None]

    def standard_error_sigma_x(self):
        """Delta-method standard error of sigma_x: sqrt((m₄ − σ⁴)/N) / (2σ)."""
        n = np.maximum(self.n_valid, 1)[:, None]
        var_pop = self.var_x * np.maximum(n - 1, 1) / n
        spread = np.sqrt(np.maximum(self.m4_x - var_pop ** 2, 0.0) / n)
        sigma = self.sigma_x
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(sigma > 0, spread / (2.0 * sigma), 0.0)

    def second_moments(self, x_star):
        """Empirical ζ_k = [x̃²_{k−1}, x̃²_k, y²_{k−1}, y²_k, x̃_{k−1}y_{k−1}, x̃_k y_k]; row 0 is NaN."""
        n = np.maximum(self.n_valid, 1).astype(float)
        shrink = np.maximum(n - 1, 1) / n
        x_tilde = self.mean_x[:, 0] - float(np.atleast_1d(x_star)[0])
        ex2 = self.var_x[:, 0] * shrink + x_tilde ** 2
        ey2 = self.var_y[:, 0] * shrink + self.mean_y[:, 0] ** 2
        exy = self.cov_xy[:, 0] * shrink + x_tilde * self.mean_y[:, 0]
        zeta = np.full((self.n_steps + 1, 6), np.nan)
        zeta[1:] = np.column_stack([ex2[:-1], ex2[1:], ey2[:-1], ey2[1:], exy[:-1], exy[1:]])
        return zeta

    def to_frame(self):
        frame = pd.DataFrame({
            "k": np.arange(self.n_steps + 1),
            "mean_x": self.mean_x[:, 0],
            "sigma_x": self.sigma_x[:, 0],
            "mean_y": self.mean_y[:, 0],
            "sigma_y": self.sigma_y[:, 0],
        }, columns=CSV_COLUMNS)
        if self.dim > 1:
            for i in range(self.dim):
                frame[f"mean_x_{i + 1}"] = self.mean_x[:, i]
                frame[f"sigma_x_{i + 1}"] = self.sigma_x[:, i]
                frame[f"mean_y_{i + 1}"] = self.mean_y[:, i]
                frame[f"sigma_y_{i + 1}"] = self.sigma_y[:, i]
        return frame


@dataclass(frozen=True, eq=False)
class TrajectoryPath:
    index: int
    x: np.ndarray
    y: np.ndarray


def _check_dimensions(config, obj):
    if config.system is not SystemKind.MULTIDIM and obj.dim != 1:
        raise ConfigError(f"system {config.system.value} is one-dimensional, objective {obj.name} has dim {obj.dim}")


def _simulate_chunk(config, params, obj, y0, start, stop, record_steps=()):
    stream = RandomStream.for_trajectories(config.seed, start, stop)
    x0 = config.initial_x(stream, obj.dim)
    if config.system is SystemKind.FIRST_ORDER:
        y0 = np.zeros_like(y0)  # no y state in the first-order update
    state = init_state(x0, y0, obj, stream, params.dither)
    moments = ChunkMoments.empty(config.n_steps + 1, obj.dim)
    recorded = {}
    record_steps = set(record_steps)

    for k in range(config.n_steps + 1):
        if k > 0:
            state = step(config.system, state, params, obj, stream)
        moments.record(k, state.x, state.y, ~state.diverged)
        if k in record_steps:
            recorded[k] = (state.x.copy(), state.y.copy())
    return moments, int(state.diverged.sum()), recorded


def run(config, params, obj):
    """Simulate config.n_traj trajectories and return statistics at steps 0..n_steps."""
    _check_dimensions(config, obj)
    y0 = config.resolved_y0(obj.dim)
    chunks = config.chunks()
    logger.info(
        f"Running {config.n_traj} {config.system.value} trajectories for {config.n_steps} steps "
        f"({len(chunks)} chunks, {config.n_threads} threads, seed {config.seed})"
    )

    def task(bounds):
        return _simulate_chunk(config, params, obj, y0, *bounds)

    with ThreadPoolExecutor(max_workers=int(config.n_threads)) as pool:
        results = list(pool.map(task, chunks))

    moments = reduce(ChunkMoments.merge, (r[0] for r in results))
    n_diverged = sum(r[1] for r in results)
    if n_diverged == config.n_traj:
        raise DivergenceError(f"all {config.n_traj} trajectories diverged", n_diverged=n_diverged)
    if n_diverged:
        logger.warning(f"{n_diverged} of {config.n_traj} trajectories diverged and were excluded from the statistics")

    stats = EnsembleStats.from_moments(moments, config.n_traj, n_diverged)
    logger.info(f"Ensemble finished: final mean_x = {stats.mean_x[-1, 0]:.6g}, sigma_x = {stats.sigma_x[-1, 0]:.6g}")
    return stats


def sample_paths(config, params, obj, count):
    """Full (x_k, y_k) paths of the first `count` trajectory indices."""
    if count < 0 or count > config.n_traj:
        raise ConfigError(f"count must lie in [0, {config.n_traj}], got {count}")
    if count == 0:
        return []
    _check_dimensions(config, obj)
    steps = range(config.n_steps + 1)
    _, _, recorded = _simulate_chunk(config, params, obj, config.resolved_y0(obj.dim), 0, count, steps)
    xs = np.stack([recorded[k][0] for k in steps], axis=1)
    ys = np.stack([recorded[k][1] for k in steps], axis=1)
    return [TrajectoryPath(index=i, x=xs[i], y=ys[i]) for i in range(count)]


def collect_moment_samples(config, params, obj, steps):
    """Raw (x, y) arrays of every trajectory at the listed steps."""
    _check_dimensions(config, obj)
    y0 = config.resolved_y0(obj.dim)
    samples = {k: ([], []) for k in steps}
    for start, stop in config.chunks():
        _, _, recorded = _simulate_chunk(config, params, obj, y0, start, stop, steps)
        for k, (x, y) in recorded.items():
            samples[k][0].append(x)
            samples[k][1].append(y)
    return {k: (np.concatenate(xs), np.concatenate(ys)) for k, (xs, ys) in samples.items()}
