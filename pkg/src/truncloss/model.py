"""Parameter, schedule and data types plus the elementary Pareto formulas.

Time is measured in fractional years.  Year ``m`` (``m = 1, 2, ...``) of an
observation window covers ``[t_start + m - 1, t_start + m)``; an exponential
schedule uses that same 1-based index, so the first year's threshold is
``L0 * exp(r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "DomainError",
    "ThresholdViolation",
    "NoEventsError",
    "ModelParams",
    "ThresholdSchedule",
    "IntensityFunction",
    "ObservationWindow",
    "EventTimes",
    "AnnualCounts",
    "Dataset",
    "severity_cdf",
    "severity_logsf",
    "severity_logpdf",
    "truncated_severity_logpdf",
    "thinned_intensity",
    "exposure_segments",
    "cumulative_intensity",
]


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class ThresholdViolation(DomainError):
    """A reported loss lies below the threshold in force at its time."""

    def __init__(self, index, loss, level):
        self.index = int(index)
        self.loss = float(loss)
        self.level = float(level)
        super().__init__(
            f"loss {self.loss!r} at record {self.index} is below its "
            f"threshold {self.level!r}"
        )


class NoEventsError(DomainError):
    """The dataset holds no reported events."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Poisson rate ``lam`` (per year) and Pareto shape/scale."""

    lam: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("lam", "alpha", "beta"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.alpha, self.beta])

    @classmethod
    def from_array(cls, a) -> "ModelParams":
        lam, alpha, beta = (float(v) for v in a)
        return cls(lam, alpha, beta)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class ObservationWindow:
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))
        if not self.t_end > self.t_start:
            raise DomainError("t_end must exceed t_start")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def is_whole_years(self) -> bool:
        d = self.duration
        return abs(d - round(d)) < 1e-9 and round(d) >= 1

    @property
    def n_years(self) -> int:
        """Number of (possibly partial) years touched by the window."""
        if self.is_whole_years:
            return int(round(self.duration))
        return int(math.ceil(self.duration))

    def year_index(self, t):
        """1-based year index of time(s) ``t``; ``t_end`` maps to the last year."""
        m = np.floor(np.asarray(t, dtype=float) - self.t_start).astype(np.int64) + 1
        return np.minimum(np.maximum(m, 1), self.n_years)

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end}


@dataclass(frozen=True)
class ThresholdSchedule:
    """Known reporting level L(t), constant within each year.

    Build with :meth:`constant`, :meth:`piecewise` or :meth:`exponential`.
    A constant level of ``inf`` is accepted and truncates everything.
    """

    kind: str
    level: float = 0.0
    rate: float = 0.0
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise", "exponential"):
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        lv = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "level", float(self.level))
        object.__setattr__(self, "rate", float(self.rate))
        if self.level < 0 or any(not v >= 0 for v in lv) or math.isnan(self.level):
            raise DomainError("threshold levels must be >= 0")
        if self.kind == "piecewise" and not lv:
            raise DomainError("piecewise schedule needs at least one level")
        if not math.isfinite(self.rate):
            raise DomainError("rate must be finite")

    @classmethod
    def constant(cls, level: float) -> "ThresholdSchedule":
        return cls("constant", level=level)

    @classmethod
    def piecewise(cls, levels) -> "ThresholdSchedule":
        return cls("piecewise", levels=tuple(levels))

    @classmethod
    def exponential(cls, level0: float, rate: float) -> "ThresholdSchedule":
        return cls("exponential", level=level0, rate=rate)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def year_levels(self, n_years: int) -> np.ndarray:
        """Levels L_1..L_n for the first ``n_years`` years."""
        m = np.arange(1, n_years + 1)
        if self.kind == "constant":
            return np.full(n_years, self.level)
        if self.kind == "exponential":
            return self.level * np.exp(self.rate * m)
        if n_years > len(self.levels):
            raise DomainError(
                f"piecewise schedule has {len(self.levels)} levels, "
                f"{n_years} years requested"
            )
        return np.array(self.levels[:n_years])

    def level_at(self, t, window: ObservationWindow) -> np.ndarray:
        m = window.year_index(t)
        return self.year_levels(window.n_years)[m - 1]

    def max_level(self, n_years: int) -> float:
        return float(np.max(self.year_levels(n_years)))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "level": self.level}
        if self.kind == "exponential":
            return {"kind": "exponential", "level0": self.level, "rate": self.rate}
        return {"kind": "piecewise", "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdSchedule":
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(d["level"])
        if kind == "exponential":
            return cls.exponential(d["level0"], d["rate"])
        if kind == "piecewise":
            return cls.piecewise(d["levels"])
        raise DomainError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class IntensityFunction:
    """Pre-truncation event rate: constant, or piecewise constant in time.

    ``levels[i]`` applies on ``[breakpoints[i-1], breakpoints[i])``.
    """

    levels: tuple
    breakpoints: tuple = ()

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        bp = tuple(float(v) for v in self.breakpoints)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "breakpoints", bp)
        if len(lv) != len(bp) + 1:
            raise DomainError("need exactly one more level than breakpoints")
        if any(not v > 0 for v in lv):
            raise DomainError("intensity levels must be > 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise DomainError("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, lam: float) -> "IntensityFunction":
        return cls((lam,))

    @classmethod
    def piecewise(cls, breakpoints, levels) -> "IntensityFunction":
        return cls(tuple(levels), tuple(breakpoints))

    @property
    def is_constant(self) -> bool:
        return not self.breakpoints

    def __call__(self, t):
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right")
        return np.asarray(self.levels)[idx]


def _check_losses(losses, levels):
    bad = np.nonzero(~(losses >= levels))[0]
    if bad.size:
        i = bad[0]
        raise ThresholdViolation(i, losses[i], levels[i])


@dataclass(frozen=True)
class EventTimes:
    """Reported events as (event time, loss) records."""

    times: np.ndarray
    losses: np.ndarray
    window: ObservationWindow
    schedule: ThresholdSchedule = field(default_factory=lambda: ThresholdSchedule.constant(0.0))

    def __post_init__(self):
        t = _frozen(self.times)
        x = _frozen(self.losses)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "losses", x)
        if t.shape != x.shape:
            raise DomainError("times and losses differ in length")
        if t.size:
            if np.any(np.diff(t) <= 0):
                raise DomainError("event times must be strictly increasing")
            if t[0] <= self.window.t_start or t[-1] > self.window.t_end:
                raise DomainError("event times must lie in (t_start, t_end]")
            self.schedule.year_levels(self.window.n_years)
            _check_losses(x, self.schedule.level_at(t, self.window))

    @property
    def n_events(self) -> int:
        return int(self.losses.size)

    @property
    def inter_arrivals(self) -> np.ndarray:
        return np.diff(self.times, prepend=self.window.t_start)

    def with_schedule(self, schedule: ThresholdSchedule) -> "EventTimes":
        return EventTimes(self.times, self.losses, self.window, schedule)


@dataclass(frozen=True)
class AnnualCounts:
    """Reported events as yearly counts plus losses tagged with their year."""

    counts: np.ndarray
    losses: np.ndarray
    years: np.ndarray
    window: ObservationWindow
    schedule: ThresholdSchedule = field(default_factory=lambda: ThresholdSchedule.constant(0.0))

    def __post_init__(self):
        n = _frozen(self.counts, np.int64)
        x = _frozen(self.losses)
        y = _frozen(self.years, np.int64)
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "losses", x)
        object.__setattr__(self, "years", y)
        if not self.window.is_whole_years:
            raise DomainError("annual-count data need a whole number of years")
        M = self.window.n_years
        if n.size != M:
            raise DomainError(f"expected {M} yearly counts, got {n.size}")
        if np.any(n < 0):
            raise DomainError("counts must be nonnegative")
        if x.shape != y.shape:
            raise DomainError("losses and year indices differ in length")
        if y.size and (y.min() < 1 or y.max() > M):
            raise DomainError("year indices must be in 1..M")
        if not np.array_equal(np.bincount(y - 1, minlength=M) if y.size else np.zeros(M, int), n):
            raise DomainError("counts disagree with the losses' year indices")
        _check_losses(x, self.schedule.year_levels(M)[y - 1] if y.size else np.empty(0))

    @property
    def n_events(self) -> int:
        return int(self.counts.sum())


Dataset = Union[EventTimes, AnnualCounts]


def _check_severity(alpha, beta):
    if not (alpha > 0 and beta > 0):
        raise DomainError("alpha and beta must be positive")


def severity_cdf(x, alpha, beta):
    """Pareto CDF ``1 - (1 + x/beta)**(-alpha)`` for ``x >= 0``."""
    _check_severity(alpha, beta)
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("severity is supported on x >= 0")
    out = -np.expm1(-alpha * np.log1p(x / beta))
    return out if out.ndim else float(out)


def severity_logsf(x, alpha, beta):
    """log(1 - F(x)); ``-inf`` at ``x = inf``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        out = -alpha * np.log1p(x / beta)
    return out if out.ndim else float(out)


def severity_logpdf(x, alpha, beta):
    x = np.asarray(x, dtype=float)
    out = math.log(alpha / beta) - (alpha + 1.0) * np.log1p(x / beta)
    return out if out.ndim else float(out)


def truncated_severity_logpdf(x, alpha, beta, L):
    """Log density of a loss known to exceed the threshold ``L``.

    Raises
    ------
    DomainError
        If any ``x < L`` (an observation below its own threshold).
    """
    _check_severity(alpha, beta)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.any(~(L >= 0)) or np.any(~(x >= L)):
        raise DomainError("need x >= L >= 0")
    out = (
        math.log(alpha / beta)
        - (alpha + 1.0) * np.log1p(x / beta)
        + alpha * np.log1p(L / beta)
    )
    return out if out.ndim else float(out)


def thinned_intensity(params: ModelParams, L):
    """Rate of reported events above level ``L``: ``lam * (1 - F(L))``."""
    L = np.asarray(L, dtype=float)
    if np.any(~(L >= 0)):
        raise DomainError("threshold must be >= 0")
    out = params.lam * np.exp(severity_logsf(L, params.alpha, params.beta))
    return out if out.ndim else float(out)


def exposure_segments(schedule, window, t=None, h=None, intensity=None):
    """Split ``[t, t + h]`` into pieces where both L and lambda are constant.

    Returns ``(durations, levels, rates)``; ``rates`` is ``None`` when no
    intensity function is given.
    """
    t = window.t_start if t is None else float(t)
    h = window.duration if h is None else float(h)
    if h < 0 or t < window.t_start - 1e-12 or t + h > window.t_end + 1e-9:
        raise DomainError("interval outside the observation window")
    if h == 0:
        empty = np.empty(0)
        return empty, empty, (empty if intensity is not None else None)
    a, b = t, t + h
    k0 = math.floor(a - window.t_start) + 1
    k1 = math.ceil(b - window.t_start)
    cuts = [window.t_start + k for k in range(k0, k1)]
    if intensity is not None:
        cuts += [c for c in intensity.breakpoints if a < c < b]
    # offsets from t keep short intervals exact (b - a would round)
    offsets = np.unique(np.clip(np.array([0.0, h] + [c - a for c in cuts]), 0.0, h))
    durations = np.diff(offsets)
    mids = a + 0.5 * (offsets[:-1] + offsets[1:])
    keep = durations > 0
    durations, mids = durations[keep], mids[keep]
    levels = schedule.level_at(mids, window)
    rates = intensity(mids) if intensity is not None else None
    return durations, levels, rates


def cumulative_intensity(params, schedule, t, h, *, window, intensity=None):
    """Expected number of reported events in ``[t, t + h]``.

    Evaluated exactly as a sum over the piecewise-constant segments of the
    schedule and (optional) intensity function.  When ``intensity`` is given
    it supersedes ``params.lam``.
    """
    d, L, rates = exposure_segments(schedule, window, t, h, intensity)
    if d.size == 0:
        return 0.0
    surv = np.exp(severity_logsf(L, params.alpha, params.beta))
    lam = params.lam if rates is None else rates
    return float(np.sum(lam * surv * d))
