"""Distribution-shift diagnostics built on the 1-D Wasserstein distance.

The guiding question: is the test split farther from the training split than
either is from a featureless reference? The reference for each channel is an
evenly spaced grid over the channel's own range, i.e. "uniform noise with the
same bounds", so a small test-to-train distance relative to the uniform
distances reads as "splits share structure".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstantChannel, EmptySample
from .dataset import TimeSeriesDataset

PAIR_TRAIN_UNIFORM = "train_to_uniform"
PAIR_TEST_UNIFORM = "test_to_uniform"
PAIR_TEST_TRAIN = "test_to_train"
PAIR_LABELS = (PAIR_TRAIN_UNIFORM, PAIR_TEST_UNIFORM, PAIR_TEST_TRAIN)


def wasserstein_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Earth-mover distance between two empirical samples.

    Computed as the integral of |F_a - F_b| over the merged support, which is
    the quantile-function formulation specialized to piecewise-constant
    empirical CDFs; sample sizes need not match.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample()
    merged = np.sort(np.concatenate([a, b]))
    deltas = np.diff(merged)
    if deltas.size == 0:
        return 0.0
    cdf_a = np.searchsorted(a, merged[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def uniform_benchmark(samples: np.ndarray) -> float:
    """Distance from a sample to an equal-size even grid over its own range."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise EmptySample()
    lo, hi = float(samples.min()), float(samples.max())
    if lo == hi:
        raise ConstantChannel(f"range [{lo}, {hi}] is degenerate")
    grid = np.linspace(lo, hi, samples.size)
    return wasserstein_1d(samples, grid)


@dataclass(frozen=True)
class WassersteinResult:
    pair_label: str
    channel: str
    mean_distance: float
    ci95_halfwidth: float
    repeats: int
    distances: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "pair_label": self.pair_label,
            "channel": self.channel,
            "mean_distance": self.mean_distance,
            "ci95_halfwidth": self.ci95_halfwidth,
            "repeats": self.repeats,
            "distances": list(self.distances),
        }


def ci95_halfwidth(values: np.ndarray) -> float:
    """1.96 * sd / sqrt(n) with the sample standard deviation; 0 for n < 2."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return 0.0
    return float(1.96 * values.std(ddof=1) / np.sqrt(n))


def split_distances(
    train: Sequence[TimeSeriesDataset],
    test: Sequence[TimeSeriesDataset],
    channels: Sequence[str],
) -> dict[str, dict[str, float]]:
    """Per-channel {pair_label: distance} for one train/test split.

    Channel samples are pooled across the datasets on each side; distances
    are taken on raw (unstandardized) values so they stay in physical units.
    """
    if not train or not test:
        raise EmptySample("train or test split")
    out: dict[str, dict[str, float]] = {}
    for ch in channels:
        tr = np.concatenate([ds.column(ch) for ds in train])
        te = np.concatenate([ds.column(ch) for ds in test])
        out[ch] = {
            PAIR_TRAIN_UNIFORM: uniform_benchmark(tr),
            PAIR_TEST_UNIFORM: uniform_benchmark(te),
            PAIR_TEST_TRAIN: wasserstein_1d(te, tr),
        }
    return out


def split_shift_report(
    splits: Sequence[tuple[Sequence[TimeSeriesDataset], Sequence[TimeSeriesDataset]]],
    channels: Sequence[str],
) -> list[WassersteinResult]:
    """Aggregate split distances over resampled splits (one per repeat).

    Returns three results per channel (train/uniform, test/uniform,
    test/train) with the mean distance and a 1.96*sd/sqrt(repeats) half-width.
    """
    if not splits:
        raise EmptySample("splits")
    per_repeat = [split_distances(train, test, channels) for train, test in splits]
    repeats = len(per_repeat)
    results = []
    for ch in channels:
        for label in PAIR_LABELS:
            vals = np.asarray([rep[ch][label] for rep in per_repeat])
            results.append(
                WassersteinResult(
                    pair_label=label,
                    channel=ch,
                    mean_distance=float(vals.mean()),
                    ci95_halfwidth=ci95_halfwidth(vals),
                    repeats=repeats,
                    distances=tuple(float(v) for v in vals),
                )
            )
    return results
