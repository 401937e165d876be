"""Saturation and utility scores.

Both are ``1 - D`` with ``D`` the largest component-wise absolute
difference between two vectors, clamped to ``[0, 1]``. Saturation compares
predicted against actual feature vectors; utility compares the cumulative
per-slot node counts of a predicted collection with an external trend.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diffusion import DiffusionCollection
from .errors import AlignmentError, DegenerateSeriesError, DimensionError, ParseError, ValidationError
from .metrics import DiffusionFeatureVector

log = logging.getLogger(__name__)

TREND_KINDS = ("search", "news")


@dataclass(frozen=True)
class TrendSeries:
    topic: str
    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in TREND_KINDS:
            raise ValidationError(f"trend kind must be one of {TREND_KINDS}, got {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValidationError("empty trend series")
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise ValidationError("trend values must be finite and non-negative")
        if not any(v > 0 for v in vals):
            raise ValidationError("trend series has no positive value")
        object.__setattr__(self, "values", vals)


def ks_statistic(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"vectors must have equal 1-d shapes, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise DimensionError("empty vectors")
    return float(np.max(np.abs(a - b)))


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _vec(x) -> np.ndarray:
    return x.as_array() if isinstance(x, DiffusionFeatureVector) else np.asarray(x, dtype=float)


def saturation(predicted, actual) -> float:
    return _clamp(1.0 - ks_statistic(_vec(predicted), _vec(actual)))


def mean_score(scores: Iterable[float]) -> float:
    """Arithmetic mean over attribute values; NaN when there is none."""
    scores = [float(s) for s in scores]
    return float(np.mean(scores)) if scores else float("nan")


def trend_cdf(values: Sequence[float], horizon: int | None = None) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    if horizon is not None:
        if horizon > vals.size:
            raise AlignmentError(f"series has {vals.size} slot(s), horizon is {horizon}")
        vals = vals[:horizon]
    total = vals.sum()
    if not total > 0:
        raise DegenerateSeriesError("series has no positive mass within the horizon")
    return np.cumsum(vals) / total


def utility(predicted: DiffusionCollection, trend: TrendSeries | Sequence[float]) -> float:
    """``1 - max |CDF(per-slot node counts) - CDF(trend)|`` over the collection's slots."""
    values = trend.values if isinstance(trend, TrendSeries) else trend
    horizon = predicted.horizon
    if len(values) < horizon:
        raise AlignmentError(f"trend covers {len(values)} slot(s) but the collection spans {horizon}")
    diffusion = trend_cdf(predicted.slot_counts(horizon), horizon)
    external = trend_cdf(values, horizon)
    return _clamp(1.0 - ks_statistic(diffusion, external))


def _parse_date(text: str) -> date:
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).date()


def read_trend_csv(path, topic: str, kind: str, origin: float, slice_duration: float, n_slots: int) -> TrendSeries:
    """Read ``date,value`` rows and sum them into the slot calendar.

    Slots with no dated row are zero (with a warning); rows outside
    ``1..n_slots`` are ignored.
    """
    path = Path(path)
    per_slot = np.zeros(n_slots)
    seen = np.zeros(n_slots, dtype=bool)
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", path=path, line=lineno)
            try:
                day = _parse_date(row[0])
                value = float(row[1])
            except ValueError as exc:
                if lineno == 1:
                    continue
                raise ParseError(str(exc), path=path, line=lineno) from exc
            if value < 0:
                raise ParseError("negative trend value", path=path, line=lineno)
            ts = datetime(day.year, day.month, day.day, tzinfo=timezone.utc).timestamp()
            m = int(np.floor((ts - origin) / slice_duration)) + 1
            if 1 <= m <= n_slots:
                per_slot[m - 1] += value
                seen[m - 1] = True
    missing = int((~seen).sum())
    if missing:
        log.warning("%s: %d slot(s) without a dated row, treated as 0", path, missing)
    return TrendSeries(topic, kind, tuple(per_slot.tolist()))


def write_trend_csv(values: Sequence[float], path, origin: float, slice_duration: float = 86400) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "value"])
        for m, v in enumerate(values, start=1):
            day = datetime.fromtimestamp(origin + (m - 1) * slice_duration, tz=timezone.utc).date()
            w.writerow([day.isoformat(), repr(float(v))])
