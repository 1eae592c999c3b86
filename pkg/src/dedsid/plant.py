"""Synthetic plant: a known linear system that stands in for the real machine.

Everything downstream is validated against data whose generating (A, B) is
known exactly, so correctness claims are closures: simulate with a spec, fit,
compare operators. Generators here also produce the bundled demo experiments
(serpentine toolpaths, pulsed laser, redundant decoy features) used by the
command-line pipeline.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ChannelSpec, TimeSeriesDataset
from .errors import CorruptFile, DimensionMismatch, StabilityWarning, UnknownChannel
from .gcode import parse_gcode_subset, program_to_timeseries

STABILITY_LIMIT = 0.99


@dataclass(frozen=True)
class DropoutSpec:
    """Random sentinel injection on one observable, optionally gated."""

    channel: str
    probability: float
    sentinel: float
    gate_channel: str | None = None

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "probability": self.probability,
            "sentinel": self.sentinel,
            "gate_channel": self.gate_channel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DropoutSpec":
        return cls(
            channel=d["channel"],
            probability=float(d["probability"]),
            sentinel=float(d["sentinel"]),
            gate_channel=d.get("gate_channel"),
        )


@dataclass(frozen=True)
class PlantSpec:
    A: np.ndarray
    B: np.ndarray
    input_channels: tuple[ChannelSpec, ...]
    observable_channels: tuple[ChannelSpec, ...]
    noise_sd: np.ndarray
    dropout: DropoutSpec | None = None

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        b = np.asarray(self.B, dtype=float)
        noise = np.asarray(self.noise_sd, dtype=float)
        q = len(self.observable_channels)
        p = len(self.input_channels)
        if a.shape != (q, q):
            raise DimensionMismatch(f"A must be {q}x{q}, got {a.shape}")
        if b.shape != (q, p):
            raise DimensionMismatch(f"B must be {q}x{p}, got {b.shape}")
        if noise.shape != (q,):
            raise DimensionMismatch("noise_sd must have one entry per observable")
        if np.any(noise < 0):
            raise ValueError("noise_sd must be nonnegative")
        radius = spectral_radius(a)
        if radius >= 1.0:
            # An unstable plant makes every long rollout meaningless; pull the
            # operator inside the unit circle instead of failing late.
            warnings.warn(
                f"spectral radius {radius:.4f} >= 1; rescaling A to {STABILITY_LIMIT}",
                StabilityWarning,
                stacklevel=2,
            )
            a = a * (STABILITY_LIMIT / radius)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "noise_sd", noise)
        object.__setattr__(self, "input_channels", tuple(self.input_channels))
        object.__setattr__(self, "observable_channels", tuple(self.observable_channels))

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.input_channels)

    @property
    def observable_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.observable_channels)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "input_channels": [c.to_dict() for c in self.input_channels],
            "observable_channels": [c.to_dict() for c in self.observable_channels],
            "noise_sd": self.noise_sd.tolist(),
            "dropout": self.dropout.to_dict() if self.dropout else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantSpec":
        return cls(
            A=np.asarray(d["A"], dtype=float),
            B=np.asarray(d["B"], dtype=float),
            input_channels=tuple(ChannelSpec.from_dict(c) for c in d["input_channels"]),
            observable_channels=tuple(
                ChannelSpec.from_dict(c) for c in d["observable_channels"]
            ),
            noise_sd=np.asarray(d["noise_sd"], dtype=float),
            dropout=DropoutSpec.from_dict(d["dropout"]) if d.get("dropout") else None,
        )


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(a, dtype=float)))))


def save_plant(spec: PlantSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_plant(path: str | Path) -> PlantSpec:
    try:
        with open(path) as fh:
            return PlantSpec.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CorruptFile(str(path), str(exc)) from None


@dataclass(frozen=True)
class SimulationResult:
    """Measured dataset plus the noiseless trajectory it was derived from."""

    dataset: TimeSeriesDataset
    clean_observables: np.ndarray


def simulate(
    spec: PlantSpec,
    inputs: TimeSeriesDataset,
    y0: np.ndarray | None = None,
    seed: int | None = None,
    experiment_id: str | None = None,
) -> SimulationResult:
    """Drive the plant with a sampled input dataset.

    Observable row t satisfies y[t] = A y[t-1] + B u[t-1] exactly before
    noise; row 0 is the initial state (default zero). Observation noise and
    sentinel dropout are applied after the recursion, in that order, from a
    single seeded generator.
    """
    for name in spec.input_names:
        if name not in inputs.channel_names:
            raise UnknownChannel(name)
    u = inputs.matrix_for(spec.input_names)
    m = u.shape[0]
    q = len(spec.observable_channels)
    y0 = np.zeros(q) if y0 is None else np.asarray(y0, dtype=float).ravel()
    if y0.shape != (q,):
        raise DimensionMismatch(f"y0 must have length {q}")

    clean = np.empty((m, q))
    if m:
        clean[0] = y0
        a, b = spec.A, spec.B
        for t in range(1, m):
            clean[t] = a @ clean[t - 1] + b @ u[t - 1]

    rng = np.random.default_rng(seed)
    observed = clean.copy()
    if np.any(spec.noise_sd > 0):
        observed = observed + rng.normal(0.0, spec.noise_sd, size=(m, q))
    channels = inputs.channels + spec.observable_channels
    data = np.column_stack([inputs.data, observed]) if m else np.empty((0, len(channels)))
    if spec.dropout is not None:
        d = spec.dropout
        col = [c.name for c in channels].index(d.channel)
        hit = rng.random(m) < d.probability
        if d.gate_channel is not None:
            gate_col = [c.name for c in channels].index(d.gate_channel)
            hit &= data[:, gate_col] > 0
        data[hit, col] = d.sentinel
    ds = TimeSeriesDataset(
        experiment_id=experiment_id or inputs.experiment_id,
        sample_rate_hz=inputs.sample_rate_hz,
        channels=channels,
        data=data,
    )
    return SimulationResult(dataset=ds, clean_observables=clean)


def generic_channels(prefix: str, kind: str, count: int, unit: str = "au") -> tuple[ChannelSpec, ...]:
    return tuple(ChannelSpec(f"{prefix}{i + 1}", unit, kind) for i in range(count))


def random_stable_plant(
    q: int,
    p: int,
    seed: int | None = None,
    radius: float = 0.9,
    noise_sd: float | Sequence[float] = 0.0,
    input_scale: float = 1.0,
) -> PlantSpec:
    """Seeded random plant with a prescribed spectral radius."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(q, q))
    a *= radius / spectral_radius(a)
    b = rng.normal(size=(q, p)) * input_scale
    noise = np.broadcast_to(np.asarray(noise_sd, dtype=float), (q,)).copy()
    return PlantSpec(
        A=a,
        B=b,
        input_channels=generic_channels("u", "input", p),
        observable_channels=generic_channels("y", "observable", q),
        noise_sd=noise,
    )


def gaussian_inputs(
    names: Sequence[str],
    steps: int,
    sample_rate_hz: float,
    seed: int | None = None,
    experiment_id: str = "gaussian",
) -> TimeSeriesDataset:
    """White-noise excitation, persistently exciting for any finite order."""
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(steps, len(names)))
    return TimeSeriesDataset(
        experiment_id=experiment_id,
        sample_rate_hz=sample_rate_hz,
        channels=tuple(ChannelSpec(n, "au", "input") for n in names),
        data=data,
    )


def pulse_train_inputs(
    names: Sequence[str],
    steps: int,
    sample_rate_hz: float,
    seed: int | None = None,
    grid_s: float = 0.05,
    aux_grid_s: float = 0.1,
    level_range: tuple[float, float] = (0.5, 1.5),
    aux_scale: float = 1.0,
    on_blocks: Sequence[int] = (1, 2, 3, 4, 6),
    off_blocks: Sequence[int] = (1, 2, 3),
    lead_s: float = 1.0,
    tail_s: float = 1.5,
    experiment_id: str = "pulses",
) -> TimeSeriesDataset:
    """Pulsed first channel plus block-constant auxiliary channels.

    The first name is treated as the pulsed power-like channel: runs of
    ``on_blocks``/``off_blocks`` grid units with a random level per pulse.
    Remaining channels hold a random level per ``aux_grid_s`` block. All
    channels are zero during the lead-in and tail so simulated experiments
    start and end at rest.
    """
    rng = np.random.default_rng(seed)
    block = max(1, int(round(grid_s * sample_rate_hz)))
    aux_block = max(1, int(round(aux_grid_s * sample_rate_hz)))
    lead = int(round(lead_s * sample_rate_hz))
    tail = int(round(tail_s * sample_rate_hz))
    active = max(0, steps - lead - tail)

    power = np.zeros(steps)
    pos = lead
    end_active = lead + active
    on = False
    while pos < end_active:
        count = int(rng.choice(on_blocks if on else off_blocks)) * block
        count = min(count, end_active - pos)
        if on:
            power[pos : pos + count] = rng.uniform(*level_range)
        pos += count
        on = not on

    data = np.zeros((steps, len(names)))
    data[:, 0] = power
    for j in range(1, len(names)):
        n_blocks = math.ceil(active / aux_block) if active else 0
        levels = rng.normal(0.0, aux_scale, size=n_blocks)
        col = np.repeat(levels, aux_block)[:active]
        data[lead:end_active, j] = col
    return TimeSeriesDataset(
        experiment_id=experiment_id,
        sample_rate_hz=sample_rate_hz,
        channels=tuple(ChannelSpec(n, "au", "input") for n in names),
        data=data,
    )


def unit_variance_plant(
    spec: PlantSpec, inputs: TimeSeriesDataset, y0: np.ndarray | None = None
) -> PlantSpec:
    """Similarity-transform the plant so observables have unit variance.

    Simulates noise-free on the given inputs, measures per-observable
    population std s, and returns the equivalent plant (S^-1 A S, S^-1 B)
    whose trajectory is the original scaled channel-wise by 1/s.
    """
    clean = simulate(replace(spec, noise_sd=np.zeros(len(spec.observable_channels)),
                             dropout=None), inputs, y0=y0).clean_observables
    s = clean.std(axis=0)
    if np.any(s == 0):
        raise DimensionMismatch("cannot normalize a constant observable")
    s_inv = np.diag(1.0 / s)
    return replace(
        spec,
        A=s_inv @ spec.A @ np.diag(s),
        B=s_inv @ spec.B,
        noise_sd=spec.noise_sd / s,
    )


# --- bundled demo experiment set -------------------------------------------

DEMO_INPUT_CHANNELS = (
    ChannelSpec("x_mm", "mm", "input"),
    ChannelSpec("y_mm", "mm", "input"),
    ChannelSpec("z_mm", "mm", "input"),
    ChannelSpec("power_w", "W", "input"),
    ChannelSpec("scan_rate_mm_min", "mm/min", "input"),
    ChannelSpec("heading_deg", "deg", "input"),
    ChannelSpec("distance_mm", "mm", "input"),
    ChannelSpec("program_time_s", "s", "input"),
    ChannelSpec("infill_flag", "0/1", "input"),
    ChannelSpec("contour_flag", "0/1", "input"),
    ChannelSpec("shield_gas_lpm", "L/min", "input"),
)

DEMO_OBSERVABLE_CHANNELS = (
    ChannelSpec("melt_pool_size_mm", "mm", "observable"),
    ChannelSpec("melt_pool_temp_c", "C", "observable"),
    ChannelSpec("working_distance_mm", "mm", "observable"),
)


def demo_plant(dropout_probability: float = 0.05) -> PlantSpec:
    """Hand-tuned plant over the demo channels.

    Decoy features (flags, program time, shield gas) get zero columns in B so
    collinearity screening can drop them without touching the physics. The
    magnitudes put observables in plausible ranges for raw-unit inputs.
    """
    names = [c.name for c in DEMO_INPUT_CHANNELS]
    a = np.array(
        [
            [0.90, 0.00002, 0.0],
            [0.002, 0.85, 0.0],
            [0.0, 0.0, 0.94],
        ]
    )
    b = np.zeros((3, len(names)))
    b[0, names.index("power_w")] = 0.00045
    b[0, names.index("scan_rate_mm_min")] = -0.00012
    b[1, names.index("power_w")] = 0.40
    b[1, names.index("scan_rate_mm_min")] = -0.05
    b[2, names.index("z_mm")] = 0.004
    b[2, names.index("power_w")] = 0.0003
    dropout = None
    if dropout_probability > 0:
        dropout = DropoutSpec(
            channel="working_distance_mm",
            probability=dropout_probability,
            sentinel=-1.0,
            gate_channel="power_w",
        )
    return PlantSpec(
        A=a,
        B=b,
        input_channels=DEMO_INPUT_CHANNELS,
        observable_channels=DEMO_OBSERVABLE_CHANNELS,
        noise_sd=np.array([0.01, 4.0, 0.02]),
        dropout=dropout,
    )


def serpentine_gcode(
    layers: int,
    lines: int,
    line_length_mm: float,
    pitch_mm: float,
    feed_mm_min: float,
    power_w: float,
    layer_height_mm: float = 0.5,
    layer_dwell_s: float = 0.5,
) -> str:
    """Back-and-forth fill pattern with a dwell and z hop between layers."""
    out = ["; serpentine demo part", f"G0 X0 Y0 Z0 F{feed_mm_min:g}"]
    for layer in range(layers):
        out.append(f"M3 S{power_w:g}")
        for line in range(lines):
            x = line_length_mm if line % 2 == 0 else 0.0
            out.append(f"G1 X{x:g}")
            if line < lines - 1:
                out.append(f"G1 Y{(line + 1) * pitch_mm:g}")
        out.append("M5")
        out.append(f"G4 P{layer_dwell_s:g}")
        if layer < layers - 1:
            out.append(f"G1 Z{(layer + 1) * layer_height_mm:g}")
            out.append("G1 X0 Y0")
    out.append("G4 P1.0")
    return "\n".join(out) + "\n"


def _demo_inputs(rng: np.random.Generator, sample_rate_hz: float, experiment_id: str) -> TimeSeriesDataset:
    layers = int(rng.integers(2, 4))
    lines = int(rng.integers(4, 7))
    line_len = float(rng.uniform(15.0, 25.0))
    power = float(rng.uniform(420.0, 520.0))
    text = serpentine_gcode(
        layers=layers,
        lines=lines,
        line_length_mm=line_len,
        pitch_mm=1.0,
        feed_mm_min=600.0,
        power_w=power,
    )
    base = program_to_timeseries(parse_gcode_subset(text), sample_rate_hz)
    m = base.row_count

    # Pulse-modulate the commanded power on a fixed grid so pulse lengths
    # bucket cleanly for the spectral stage.
    gate = np.zeros(m)
    block = int(round(0.05 * sample_rate_hz))
    pos = 0
    on = True
    while pos < m:
        count = int(rng.choice((1, 2, 3, 4, 5) if on else (1, 2))) * block
        if on:
            gate[pos : pos + count] = 1.0
        pos += count
        on = not on
    power_col = base.column("power_w") * gate

    y = base.column("y_mm")
    moving = base.column("scan_rate_mm_min") > 0
    # Contour on the outermost passes, infill inside; complement by design.
    y_span = y.max() - y.min() if m else 0.0
    contour = ((y <= y.min() + 1e-9) | (y >= y.max() - 1e-9)) & moving if y_span > 0 else moving
    infill = 1.0 - contour.astype(float)
    contour = contour.astype(float)
    program_time = np.arange(m) / sample_rate_hz
    shield = np.full(m, 12.0)

    data = np.column_stack(
        [
            base.column("x_mm"),
            base.column("y_mm"),
            base.column("z_mm"),
            power_col,
            base.column("scan_rate_mm_min"),
            base.column("heading_deg"),
            base.column("distance_mm"),
            program_time,
            infill,
            contour,
            shield,
        ]
    )
    return TimeSeriesDataset(
        experiment_id=experiment_id,
        sample_rate_hz=sample_rate_hz,
        channels=DEMO_INPUT_CHANNELS,
        data=data,
    )


def make_demo_experiments(
    n_experiments: int,
    seed: int,
    sample_rate_hz: float = 100.0,
    dropout_probability: float = 0.05,
) -> tuple[PlantSpec, list[TimeSeriesDataset]]:
    """Seeded demo corpus: toolpath-driven inputs through the demo plant."""
    spec = demo_plant(dropout_probability=dropout_probability)
    rng = np.random.default_rng(seed)
    datasets = []
    for i in range(n_experiments):
        exp_id = f"exp{i + 1:02d}"
        inputs = _demo_inputs(rng, sample_rate_hz, exp_id)
        sim_seed = int(rng.integers(0, 2**31 - 1))
        datasets.append(simulate(spec, inputs, seed=sim_seed, experiment_id=exp_id).dataset)
    return spec, datasets
