"""Domain types, effect-scale transforms and dataset checks.

Effects are always stored on the *analysis* scale: raw mean differences on
the identity scale, log odds/risk ratios on the log scale.  Within-study
variances are treated as known constants.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats

from .errors import (
    DuplicateLabel,
    EmptyDataset,
    InvalidBounds,
    NonPositiveRatio,
    NonPositiveVariance,
    TooFewStudies,
)

__all__ = [
    "EffectScale",
    "Study",
    "Dataset",
    "PooledResult",
    "HeterogeneityStats",
    "normal_quantile",
    "ci_from_bounds",
    "validate",
    "heterogeneity",
    "make_dataset",
    "MODELS",
]

MODELS = ("common", "random", "fixed-unweighted", "fixed-weighted", "fixed-optimal")


def normal_quantile(p):
    """Standard-normal quantile (inverse CDF) at probability ``p``."""
    return float(special.ndtri(p))


def critical_value(level):
    """Two-sided standard-normal critical value for a ``level`` interval."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    return normal_quantile((1.0 + level) / 2.0)


class EffectScale(str, enum.Enum):
    IDENTITY = "identity"
    LOG = "log"

    def to_analysis(self, x):
        """Map a user-facing value (e.g. an odds ratio) to the analysis scale."""
        if self is EffectScale.LOG:
            x = np.asarray(x, dtype=float)
            if np.any(x <= 0):
                raise NonPositiveRatio("ratio measures must be strictly positive on the log scale")
            out = np.log(x)
            return float(out) if out.ndim == 0 else out
        return x

    def to_display(self, x):
        if self is EffectScale.LOG:
            out = np.exp(np.asarray(x, dtype=float))
            return float(out) if out.ndim == 0 else out
        return x

    @property
    def null_value(self):
        """Display-scale value of 'no effect'."""
        return 1.0 if self is EffectScale.LOG else 0.0


@dataclass(frozen=True)
class Study:
    label: str
    y: float
    var: float
    n: int | None = None  # display only, never used in estimation

    @property
    def se(self):
        return math.sqrt(self.var)


@dataclass(frozen=True)
class Dataset:
    studies: tuple[Study, ...]
    scale: EffectScale = EffectScale.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        object.__setattr__(self, "scale", EffectScale(self.scale))

    @property
    def k(self):
        return len(self.studies)

    @property
    def y(self):
        return np.array([s.y for s in self.studies], dtype=float)

    @property
    def var(self):
        return np.array([s.var for s in self.studies], dtype=float)

    @property
    def labels(self):
        return [s.label for s in self.studies]

    def __len__(self):
        return self.k


def make_dataset(y: Sequence[float], var: Sequence[float], labels: Iterable[str] | None = None,
                 scale=EffectScale.IDENTITY) -> Dataset:
    """Convenience constructor from parallel arrays; the result is validated."""
    y = [float(v) for v in y]
    var = [float(v) for v in var]
    if len(y) != len(var):
        raise ValueError("y and var must have equal length")
    if labels is None:
        labels = [f"Study {i + 1}" for i in range(len(y))]
    studies = [Study(str(lab), yi, vi) for lab, yi, vi in zip(labels, y, var)]
    return validate(Dataset(tuple(studies), EffectScale(scale)))


@dataclass(frozen=True)
class PooledResult:
    """A pooled estimate on the analysis scale.

    ``weights`` are normalized to sum to one and follow study order.  ``tau2``
    is only set for the random-effects model; ``active_set`` lists studies
    that received zero weight from the constrained optimal-weight solve.
    """

    model: str
    estimate: float
    variance: float
    ci_low: float
    ci_high: float
    level: float
    weights: tuple[float, ...]
    tau2: float | None = None
    tau2_method: str | None = None
    solver: str | None = None
    active_set: tuple[int, ...] = field(default_factory=tuple)

    @property
    def se(self):
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class HeterogeneityStats:
    Q: float
    df: int
    I2: float
    p_value: float


def validate(dataset: Dataset) -> Dataset:
    """Check dataset invariants and return it unchanged.

    Raises
    ------
    EmptyDataset, NonPositiveVariance, DuplicateLabel
    """
    if dataset.k == 0:
        raise EmptyDataset("dataset contains no studies")
    seen = set()
    for s in dataset.studies:
        if not math.isfinite(s.y):
            raise ValueError(f"study {s.label!r}: effect size must be finite")
        if not (s.var > 0) or not math.isfinite(s.var):
            raise NonPositiveVariance(f"study {s.label!r}: variance must be > 0, got {s.var!r}")
        if s.label in seen:
            raise DuplicateLabel(f"duplicate study label {s.label!r}")
        seen.add(s.label)
    return dataset


def require_pooling(dataset: Dataset) -> Dataset:
    validate(dataset)
    if dataset.k < 2:
        raise TooFewStudies(f"pooling needs at least 2 studies, got {dataset.k}")
    return dataset


def ci_from_bounds(low, high, level=0.95):
    """Recover ``(y, var)`` from a symmetric normal-theory interval.

    Bounds must already be on the analysis scale (log them first for ratio
    measures).
    """
    if not high > low:
        raise InvalidBounds(f"upper bound {high!r} must exceed lower bound {low!r}")
    z = critical_value(level)
    return (low + high) / 2.0, ((high - low) / (2.0 * z)) ** 2


def bounds_from_estimate(y, var, level=0.95):
    half = critical_value(level) * math.sqrt(var)
    return y - half, y + half


def heterogeneity(dataset: Dataset) -> HeterogeneityStats:
    """Cochran's Q, I-squared and the chi-square p-value."""
    require_pooling(dataset)
    y, v = dataset.y, dataset.var
    w = 1.0 / v
    theta = math.fsum(w * y) / math.fsum(w)
    Q = math.fsum(w * (y - theta) ** 2)
    df = dataset.k - 1
    if Q > 0:
        I2 = max(0.0, (Q - df) / Q)
        p = float(stats.chi2.sf(Q, df))
    else:
        Q, I2, p = 0.0, 0.0, 1.0
    return HeterogeneityStats(Q=Q, df=df, I2=I2, p_value=p)
