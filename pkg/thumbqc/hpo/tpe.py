"""
Tree-structured Parzen Estimator

Suggests integer lattice points for a maximised objective. Past observations
are split at the gamma quantile into good and bad sets; each dimension gets
an independent Gaussian Parzen mixture per set (one kernel per observation
plus a wide prior kernel at the centre of the range). Candidates are drawn
from the good mixtures and the one maximising ``l(x) / g(x)`` wins.

Kernel bandwidth is Scott's rule ``std * m^(-1/5)`` floored at the lattice
step, so a set concentrated on one point still spreads over its neighbours.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import logsumexp
from scipy.stats import norm

from thumbqc.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.25
DEFAULT_N_STARTUP = 10
DEFAULT_N_CANDIDATES = 24

Point = Dict[str, int]


class Dimension(BaseModel):
    """Integer range ``low, low + step, ..., high``."""
    name: str
    low: int
    high: int
    step: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_lattice(self) -> "Dimension":
        if self.low > self.high:
            raise ValueError(f"{self.name}: low {self.low} exceeds high {self.high}")
        if (self.high - self.low) % self.step:
            raise ValueError(f"{self.name}: step {self.step} does not divide {self.high - self.low}")
        return self

    @property
    def n_values(self) -> int:
        return (self.high - self.low) // self.step + 1

    def quantize(self, values: np.ndarray) -> np.ndarray:
        k = np.rint((np.clip(values, self.low, self.high) - self.low) / self.step)
        return (self.low + k * self.step).astype(np.int64)

    def contains(self, value: int) -> bool:
        return self.low <= value <= self.high and (value - self.low) % self.step == 0


class SearchSpace(BaseModel):
    dimensions: List[Dimension]

    @model_validator(mode="after")
    def check_names(self) -> "SearchSpace":
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        return self

    @classmethod
    def head_widths(cls, low: int = 64, high: int = 2048, step: int = 64) -> "SearchSpace":
        """Three hidden-layer widths of the classification head."""
        return cls(dimensions=[Dimension(name=f"layer_{i}", low=low, high=high, step=step) for i in (1, 2, 3)])

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dimensions]

    def contains(self, point: Point) -> bool:
        return set(point) == set(self.names) and all(d.contains(point[d.name]) for d in self.dimensions)

    def lattice(self) -> List[Point]:
        """Every point of the space, in row-major order."""
        grids = np.meshgrid(*[d.low + d.step * np.arange(d.n_values) for d in self.dimensions], indexing="ij")
        flat = [g.reshape(-1) for g in grids]
        return [{d.name: int(col[i]) for d, col in zip(self.dimensions, flat)} for i in range(len(flat[0]))]


@dataclass(frozen=True)
class Observation:
    point: Point
    value: float


def _require_space(space: SearchSpace) -> None:
    if not space.dimensions:
        raise InvalidInputError("search space has no dimensions")


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Point:
    _require_space(space)
    return {d.name: int(d.low + d.step * rng.integers(0, d.n_values)) for d in space.dimensions}


@dataclass(frozen=True)
class ParzenEstimator:
    """Equal-weight Gaussian mixture over one dimension."""
    mus: np.ndarray
    sigmas: np.ndarray

    @classmethod
    def fit(cls, values: Sequence[float], dim: Dimension) -> "ParzenEstimator":
        span = float(dim.high - dim.low)
        prior_mu = (dim.low + dim.high) / 2.0
        prior_sigma = max(span, float(dim.step))
        observed = np.asarray(values, dtype=np.float64)
        if observed.size:
            std = float(np.std(observed))
            bandwidth = max(std * observed.size ** (-1.0 / 5.0), float(dim.step))
        else:
            bandwidth = float(dim.step)
        mus = np.concatenate([observed, [prior_mu]])
        sigmas = np.concatenate([np.full(observed.size, bandwidth), [prior_sigma]])
        return cls(mus=mus, sigmas=sigmas)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        component = rng.integers(0, len(self.mus), size=size)
        return rng.normal(self.mus[component], self.sigmas[component])

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        per_kernel = norm.logpdf(x[:, None], loc=self.mus[None, :], scale=self.sigmas[None, :])
        return logsumexp(per_kernel, axis=1) - math.log(len(self.mus))


def split_observations(
    history: Sequence[Observation], gamma: float
) -> Tuple[List[Observation], List[Observation]]:
    """Top ``max(1, ceil(gamma * n))`` observations by value, and the rest."""
    ranked = sorted(history, key=lambda o: -o.value)
    n_good = max(1, math.ceil(gamma * len(history)))
    return ranked[:n_good], ranked[n_good:]


def tpe_suggest(
    history: Sequence[Observation],
    space: SearchSpace,
    rng: np.random.Generator,
    gamma: float = DEFAULT_GAMMA,
    n_candidates: int = DEFAULT_N_CANDIDATES,
    n_startup: int = DEFAULT_N_STARTUP,
) -> Point:
    """Next point to evaluate; uniform until ``n_startup`` observations exist."""
    _require_space(space)
    if len(history) < n_startup or not history:
        return sample_uniform(space, rng)

    good, bad = split_observations(history, gamma)
    candidates: Dict[str, np.ndarray] = {}
    log_ratio = np.zeros(n_candidates)
    for dim in space.dimensions:
        l_est = ParzenEstimator.fit([o.point[dim.name] for o in good], dim)
        g_est = ParzenEstimator.fit([o.point[dim.name] for o in bad], dim)
        xs = dim.quantize(l_est.sample(rng, n_candidates))
        candidates[dim.name] = xs
        x = xs.astype(np.float64)
        log_ratio += l_est.log_pdf(x) - g_est.log_pdf(x)

    best = int(np.argmax(log_ratio))
    return {name: int(values[best]) for name, values in candidates.items()}
