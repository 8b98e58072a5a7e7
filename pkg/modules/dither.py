"""Two-point exploration sequence and the odd maps h, g built on it."""
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from utils.exceptions import ConfigError
from utils.rng import TAG_DITHER


@dataclass(frozen=True)
class DitherSpec:
    """Law 𝒟 = {−ω, +ω} with E[h²] = χ and E[g²] = ψ."""
    chi: float
    psi: float
    omega: float = 1.0

    def __post_init__(self):
        for name in ("omega", "chi", "psi"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"dither {name} must be a positive finite number, got {value!r}")

    @property
    def gamma(self):
        return math.sqrt(self.chi * self.psi)

    @property
    def maps(self):
        return LinearMapPair.from_spec(self)


class OddMapPair(Protocol):
    def h(self, w): ...

    def g(self, w): ...


@dataclass(frozen=True)
class LinearMapPair:
    """h(w) = √χ·w/ω, g(w) = √ψ·w/ω."""
    h_scale: float
    g_scale: float
    omega: float = 1.0

    @classmethod
    def from_spec(cls, spec):
        return cls(h_scale=math.sqrt(spec.chi), g_scale=math.sqrt(spec.psi), omega=spec.omega)

    def h(self, w):
        return self.h_scale * (np.asarray(w) / self.omega)

    def g(self, w):
        return self.g_scale * (np.asarray(w) / self.omega)


@dataclass(frozen=True, eq=False)
class DitherDraw:
    w: np.ndarray
    h_of_w: np.ndarray
    g_of_w: np.ndarray


def sample(spec, stream, dim=1, tag=TAG_DITHER):
    """Draw w ∈ {−ω, +ω} for every trajectory of `stream`, shape (batch, dim)."""
    w = spec.omega * stream.signs(dim=dim, tag=tag)
    maps = spec.maps
    return DitherDraw(w=w, h_of_w=maps.h(w), g_of_w=maps.g(w))


def moment(spec, m, p):
    """Exact E[h^m g^p] by enumerating the two support points."""
    if m < 0 or p < 0:
        raise ValueError(f"moment orders must be non-negative, got m={m}, p={p}")
    if (m + p) % 2:
        return 0.0
    maps = spec.maps
    plus = maps.h(spec.omega) ** m * maps.g(spec.omega) ** p
    minus = maps.h(-spec.omega) ** m * maps.g(-spec.omega) ** p
    return float(0.5 * (plus + minus))


def identity_moment(spec, m, j):
    """Closed form E[h^m g^(m+2j)] = γ^m ψ^j."""
    if m < 0 or j < 0:
        raise ValueError(f"moment orders must be non-negative, got m={m}, j={j}")
    return spec.gamma ** m * spec.psi ** j


def empirical_moment(spec, m, p, stream, n):
    """Monte-Carlo mean of h^m g^p over n draws and its standard error."""
    draws = sample(spec, stream, dim=n)
    values = draws.h_of_w ** m * draws.g_of_w ** p
    values = values.ravel()
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))
