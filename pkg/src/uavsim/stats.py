"""Empirical distributions shared by every study.

Quantiles use the Hazen plotting position: the ``i``-th smallest of ``n``
samples (1-based) sits at cumulative probability ``(i - 0.5) / n`` and values
in between are linearly interpolated. Probabilities outside the first/last
plotting positions clamp to the extreme samples.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np


class CdfSummary:
    """Sorted sample set with percentile and CDF queries.

    Summaries are mergeable: ``a.merge(b)`` equals summarising the
    concatenation of the underlying samples, so partial results from
    parallel workers can be reduced in any fixed order.
    """

    __slots__ = ("_samples", "_cache")

    def __init__(self, samples: Iterable[float] = ()):
        arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                         dtype=float).ravel()
        arr = arr[~np.isnan(arr)]
        self._samples = np.sort(arr, kind="stable")
        self._samples.setflags(write=False)
        self._cache: dict[float, float] = {}

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def count(self) -> int:
        return int(self._samples.size)

    def __len__(self) -> int:
        return self.count

    def __repr__(self) -> str:
        if not self.count:
            return "CdfSummary(empty)"
        return (f"CdfSummary(n={self.count}, p5={self.percentile(0.05):.4g}, "
                f"p50={self.percentile(0.5):.4g})")

    def merge(self, other: "CdfSummary") -> "CdfSummary":
        return CdfSummary(np.concatenate([self._samples, other._samples]))

    def finite(self) -> "CdfSummary":
        """Drop +-inf sentinels (e.g. users that never transmitted)."""
        return CdfSummary(self._samples[np.isfinite(self._samples)])

    def percentile(self, p: float) -> float:
        return percentile(self, p)

    def median(self) -> float:
        return percentile(self, 0.5)

    def cdf(self, x) -> np.ndarray:
        """Empirical CDF ``P(X <= x)`` (right-continuous step function)."""
        if not self.count:
            raise ValueError("empty CdfSummary")
        return np.searchsorted(self._samples, np.asarray(x, dtype=float),
                               side="right") / self.count

    def mean(self) -> float:
        return float(np.mean(self._samples))


def _as_summary(cdf) -> CdfSummary:
    return cdf if isinstance(cdf, CdfSummary) else CdfSummary(cdf)


def percentile(cdf, p: float) -> float:
    """Hazen quantile of ``cdf`` at probability ``p`` (0 < p < 1)."""
    cdf = _as_summary(cdf)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    n = cdf.count
    if n == 0:
        raise ValueError("percentile of an empty distribution")
    cached = cdf._cache.get(p)
    if cached is not None:
        return cached
    x = cdf.samples
    h = n * p + 0.5  # 1-based fractional rank
    if h <= 1.0:
        value = float(x[0])
    elif h >= n:
        value = float(x[-1])
    else:
        lo = int(np.floor(h))
        frac = h - lo
        a, b = x[lo - 1], x[lo]
        value = float(a) if frac == 0.0 or a == b else float(a + frac * (b - a))
    cdf._cache[p] = value
    return value


def fraction_above(cdf, threshold: float) -> float:
    """Fraction of samples strictly greater than ``threshold``."""
    cdf = _as_summary(cdf)
    if cdf.count == 0:
        raise ValueError("fraction_above of an empty distribution")
    return float(cdf.count - np.searchsorted(cdf.samples, threshold, side="right")) / cdf.count


def stochastic_dominance(a, b, tolerance: float = 0.0) -> bool:
    """True iff ``a`` first-order dominates ``b`` within ``tolerance``.

    Checks ``F_a(x) <= F_b(x) + tolerance`` at every point of the merged
    support, i.e. ``a`` tends to take larger values than ``b``.
    """
    a, b = _as_summary(a), _as_summary(b)
    if a.count == 0 or b.count == 0:
        raise ValueError("stochastic_dominance needs non-empty distributions")
    grid = np.union1d(a.samples, b.samples)
    return bool(np.all(a.cdf(grid) <= b.cdf(grid) + tolerance))


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a, b = _as_summary(a), _as_summary(b)
    grid = np.union1d(a.samples, b.samples)
    return float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))


def merge_all(summaries: Iterable[CdfSummary]) -> CdfSummary:
    """Merge in the given order (callers pass worker-index order)."""
    parts = [s.samples for s in summaries]
    return CdfSummary(np.concatenate(parts) if parts else np.empty(0))
