"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from dedsid.dataset import ChannelSpec, TimeSeriesDataset
from dedsid.plant import pulse_train_inputs, random_stable_plant, simulate


def make_dataset(
    data,
    names=None,
    kinds=None,
    rate=100.0,
    experiment_id="t",
) -> TimeSeriesDataset:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    k = data.shape[1]
    if names is None:
        names = [f"c{i}" for i in range(k)]
    if kinds is None:
        kinds = ["observable"] * k
    channels = tuple(ChannelSpec(n, "au", kd) for n, kd in zip(names, kinds))
    return TimeSeriesDataset(
        experiment_id=experiment_id, sample_rate_hz=rate, channels=channels, data=data
    )


def linear_corpus(
    q=2,
    p=2,
    n_exp=6,
    steps=1200,
    seed=0,
    noise_sd=0.0,
    radius=0.9,
    rate=100.0,
):
    """Random stable plant driven by pulse trains with idle lead/tail.

    The idle ends matter: they let standardized refits stay exact because
    every experiment starts and finishes at rest.
    """
    spec = random_stable_plant(q, p, seed=seed, radius=radius, noise_sd=noise_sd)
    rng = np.random.default_rng(seed + 1)
    datasets = []
    for i in range(n_exp):
        inputs = pulse_train_inputs(
            spec.input_names,
            steps,
            rate,
            seed=int(rng.integers(0, 2**31 - 1)),
            experiment_id=f"e{i:02d}",
        )
        sim = simulate(spec, inputs, seed=int(rng.integers(0, 2**31 - 1)), experiment_id=f"e{i:02d}")
        datasets.append(sim.dataset)
    return spec, datasets


def parseval_gap(values: np.ndarray, magnitude: np.ndarray) -> float:
    """Relative mismatch between two-sided squared amplitudes and mean square."""
    values = np.asarray(values, dtype=float)
    centered = values - values.mean()
    mean_square = float(np.mean(centered**2))
    two_sided = magnitude.copy() ** 2
    weights = np.full(magnitude.size, 2.0)
    weights[0] = 1.0
    if values.size % 2 == 0:
        weights[-1] = 1.0
    total = float(np.sum(weights * two_sided))
    scale = max(mean_square, np.finfo(float).tiny)
    return abs(total - mean_square) / scale
