"""Event-by-event click streams from contextual models.

The generation contract: for every trial the settings are drawn first (from
the schedule's own seed), then the source pair (lambda1, lambda2), then one
instrument uniform per wing.  Alice's outcome is a function of
(lambda1, lambda_x, x) only and Bob's of (lambda2, lambda_y, y) only, so
replaying the hidden-variable streams under a different counterpart setting
never changes a wing's outcome sequence.  Trials are generated in fixed-size
chunks with per-chunk derived substreams; the chunk size is part of the
reproducibility contract and is recorded in the stream metadata.

Two continuous reference models are provided.  `MalusModel` is the classical
cosine-squared response: the source draws a polarization angle phi uniformly
on [0, pi) and hands lambda1 = phi to Alice and lambda2 = phi + pi/2 to Bob;
a wing at setting s with instrument uniform u registers +1 when
u < cos^2(lambda - s) and -1 otherwise.  Its raw correlation is
-cos(2(x-y))/2.  `SelectiveModel` adds wing-local non-detection: with
survival probability sp = (|cos 2(lambda-s)| * |cos(lambda-s)|^asymmetry)
** sharpness the instrument uniform is partitioned into +1 on [0, sp*c),
-1 on [sp*c, sp) and 0 (no click) on [sp, 1), where c is the cosine-squared
response.  Rejection is independent of the would-be outcome, and
sharpness = 0 reduces bit-exactly to `MalusModel`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, StreamFormatError
from .models import FiniteContextualModel
from .seeding import STREAM_ALICE, STREAM_BOB, STREAM_SETTINGS, STREAM_SOURCE, substream

DEFAULT_CHUNK_SIZE = 65536
STREAM_FORMAT = "trial-stream/1"
CSV_HEADER = ("trial", "x_rad", "y_rad", "a", "b")


# ---------------------------------------------------------------------------
# Continuous reference models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MalusModel:
    """Cosine-squared response model; every trial produces a click."""

    def survival(self, delta):
        return np.ones_like(np.asarray(delta, dtype=float))

    def plus_probability(self, delta):
        return np.cos(np.asarray(delta, dtype=float)) ** 2

    def descriptor(self) -> dict:
        return {"kind": "malus"}


@dataclass(frozen=True)
class SelectiveModel:
    """MalusModel with wing-local non-detection.

    `sharpness` >= 0 steers how strongly surviving events concentrate near
    instrument alignment; 0 disables rejection entirely.  `asymmetry` >= 0
    mixes in an alignment factor with the full polarization period, which
    breaks the half-period symmetry that would otherwise force all
    post-selected single-wing expectations to zero.
    """

    sharpness: float
    asymmetry: float = 0.0

    def __post_init__(self):
        if self.sharpness < 0:
            raise ConfigError("sharpness must be >= 0")
        if self.asymmetry < 0:
            raise ConfigError("asymmetry must be >= 0")

    def survival(self, delta):
        delta = np.asarray(delta, dtype=float)
        base = np.abs(np.cos(2.0 * delta))
        if self.asymmetry != 0.0:
            base = base * np.abs(np.cos(delta)) ** self.asymmetry
        return base ** self.sharpness

    def plus_probability(self, delta):
        return np.cos(np.asarray(delta, dtype=float)) ** 2

    def descriptor(self) -> dict:
        return {
            "kind": "selective",
            "sharpness": float(self.sharpness),
            "asymmetry": float(self.asymmetry),
        }


def wing_outcome(model, lam, setting, u) -> np.ndarray:
    """Outcome of one wing given hidden angle(s), setting(s) and uniform(s).

    The single instrument uniform encodes both the click/no-click decision and
    the sign: +1 on [0, sp*c), -1 on [sp*c, sp), 0 on [sp, 1).
    """
    lam = np.asarray(lam, dtype=float)
    delta = lam - np.asarray(setting, dtype=float)
    sp = model.survival(delta)
    c = model.plus_probability(delta)
    u = np.asarray(u, dtype=float)
    return np.where(u < sp * c, 1, np.where(u < sp, -1, 0)).astype(np.int8)


def source_angles(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Source pairing for the continuous models: lambda2 is phi rotated 90 deg."""
    return phi, phi + math.pi / 2


# ---------------------------------------------------------------------------
# Trial records and streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    x: float
    y: float
    a: int
    b: int


class TrialStream:
    """Column-oriented trial storage with record iteration."""

    def __init__(self, trial, x, y, a, b):
        self.trial = np.asarray(trial, dtype=np.int64)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.a = np.asarray(a, dtype=np.int8)
        self.b = np.asarray(b, dtype=np.int8)
        n = len(self.trial)
        if not (len(self.x) == len(self.y) == len(self.a) == len(self.b) == n):
            raise StreamFormatError("stream columns have unequal lengths")
        if n and np.any(np.diff(self.trial) <= 0):
            raise StreamFormatError("trial indices must be strictly increasing")
        for col in (self.a, self.b):
            if n and not np.all(np.isin(col, (-1, 0, 1))):
                raise StreamFormatError("outcomes must be in {-1, 0, +1}")

    def __len__(self) -> int:
        return len(self.trial)

    def __iter__(self) -> Iterator[TrialRecord]:
        for t, x, y, a, b in zip(self.trial, self.x, self.y, self.a, self.b):
            yield TrialRecord(int(t), float(x), float(y), int(a), int(b))

    @classmethod
    def from_records(cls, records) -> "TrialStream":
        rows = [(r.trial, r.x, r.y, r.a, r.b) for r in records]
        if not rows:
            return cls([], [], [], [], [])
        cols = list(zip(*rows))
        return cls(*cols)


# ---------------------------------------------------------------------------
# Settings schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SettingsSchedule:
    """How the (x, y) pair is chosen for each trial.

    `random` draws both indices uniformly from its own seed; `cycle` walks the
    x-major Cartesian product of the two setting lists.  The settings draw
    never touches the hidden-variable streams.
    """

    mode: str
    x_settings: tuple[float, ...]
    y_settings: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("random", "cycle"):
            raise ConfigError(f"schedule mode must be 'random' or 'cycle', got {self.mode!r}")
        object.__setattr__(self, "x_settings", tuple(float(v) for v in self.x_settings))
        object.__setattr__(self, "y_settings", tuple(float(v) for v in self.y_settings))
        if not self.x_settings or not self.y_settings:
            raise ConfigError("setting lists must be nonempty")
        if self.mode == "random" and self.seed is None:
            raise ConfigError("random schedule requires an explicit seed")

    def indices(self, start: int, count: int, chunk_index: int) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = len(self.x_settings), len(self.y_settings)
        if self.mode == "random":
            rng = substream(self.seed, chunk_index, STREAM_SETTINGS)
            return rng.integers(0, nx, size=count), rng.integers(0, ny, size=count)
        pair = (np.arange(start, start + count)) % (nx * ny)
        return pair // ny, pair % ny

    def descriptor(self) -> dict:
        return {
            "mode": self.mode,
            "x_settings": list(self.x_settings),
            "y_settings": list(self.y_settings),
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Trial generation
# ---------------------------------------------------------------------------


def sample_trial(model, x: float, y: float, rng: np.random.Generator) -> tuple[int, int]:
    """One trial at fixed settings; the caller owns the generator state.

    Draw order is fixed (source, then Alice's uniform, then Bob's), so each
    trial consumes the same amount of entropy regardless of settings or
    outcomes.
    """
    if isinstance(model, FiniteContextualModel):
        cum_source, cum_a, cum_b, a_out, b_out = model.sampling_tables(x, y)
        n2 = model.source_dist.shape[1]
        flat = int(np.searchsorted(cum_source, rng.random(), side="right"))
        i, j = flat // n2, flat % n2
        k = int(np.searchsorted(cum_a, rng.random(), side="right"))
        l = int(np.searchsorted(cum_b, rng.random(), side="right"))
        return int(a_out[i, k]), int(b_out[j, l])
    phi = rng.random() * math.pi
    lam1, lam2 = source_angles(np.asarray(phi))
    a = wing_outcome(model, lam1, x, rng.random())
    b = wing_outcome(model, lam2, y, rng.random())
    return int(a), int(b)


def _chunk_outcomes(model, xs, ys, xi, yi, rng_source, rng_alice, rng_bob, count):
    """Vectorized trial generation for one chunk at per-trial setting indices."""
    if isinstance(model, FiniteContextualModel):
        u_src = rng_source.random(count)
        u_a = rng_alice.random(count)
        u_b = rng_bob.random(count)
        a = np.empty(count, dtype=np.int8)
        b = np.empty(count, dtype=np.int8)
        n2 = model.source_dist.shape[1]
        # group trials by setting pair; the draws above are already per-trial
        pair_code = xi * len(ys) + yi
        for code in np.unique(pair_code):
            idx = np.nonzero(pair_code == code)[0]
            x, y = xs[code // len(ys)], ys[code % len(ys)]
            cum_source, cum_a, cum_b, a_out, b_out = model.sampling_tables(x, y)
            flat = np.searchsorted(cum_source, u_src[idx], side="right")
            i, j = flat // n2, flat % n2
            k = np.searchsorted(cum_a, u_a[idx], side="right")
            l = np.searchsorted(cum_b, u_b[idx], side="right")
            a[idx] = a_out[i, k]
            b[idx] = b_out[j, l]
        return a, b
    phi = rng_source.random(count) * math.pi
    lam1, lam2 = source_angles(phi)
    a = wing_outcome(model, lam1, xs[xi], rng_alice.random(count))
    b = wing_outcome(model, lam2, ys[yi], rng_bob.random(count))
    return a, b


def run_experiment(
    model,
    schedule: SettingsSchedule,
    n_trials: int,
    master_seed,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> TrialStream:
    """Generate `n_trials` records; bit-identical for identical arguments."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if chunk_size < 1:
        raise ConfigError("chunk_size must be >= 1")
    xs = np.asarray(schedule.x_settings)
    ys = np.asarray(schedule.y_settings)
    a_parts, b_parts, x_parts, y_parts = [], [], [], []
    start = 0
    chunk_index = 0
    while start < n_trials:
        count = min(chunk_size, n_trials - start)
        xi, yi = schedule.indices(start, count, chunk_index)
        a, b = _chunk_outcomes(
            model,
            xs,
            ys,
            xi,
            yi,
            substream(master_seed, chunk_index, STREAM_SOURCE),
            substream(master_seed, chunk_index, STREAM_ALICE),
            substream(master_seed, chunk_index, STREAM_BOB),
            count,
        )
        x_parts.append(xs[xi])
        y_parts.append(ys[yi])
        a_parts.append(a)
        b_parts.append(b)
        start += count
        chunk_index += 1
    return TrialStream(
        np.arange(n_trials),
        np.concatenate(x_parts),
        np.concatenate(y_parts),
        np.concatenate(a_parts),
        np.concatenate(b_parts),
    )


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


def discretize(
    model,
    settings_x: Sequence[float],
    settings_y: Sequence[float],
    n_source: int = 360,
    n_alice: int = 1000,
    n_bob: int = 1000,
    max_cells: int = 10**8,
) -> FiniteContextualModel:
    """Midpoint discretization of a continuous model onto finite tables.

    The source angle grid has `n_source` uniform cells over [0, pi) with the
    paired lambda2 values rotated by pi/2; each wing's instrument uniform is
    absorbed into a midpoint grid over [0, 1).  `max_cells` caps the total
    number of stored table cells (source plus all outcome tables).
    """
    if min(n_source, n_alice, n_bob) < 2:
        raise ConfigError("discretization needs at least 2 cells per variable")
    stored = (
        n_source * n_source
        + len(tuple(settings_x)) * n_source * n_alice
        + len(tuple(settings_y)) * n_source * n_bob
    )
    if stored > max_cells:
        raise ConfigError(
            f"discretization would store {stored} cells, above the cap {max_cells}"
        )
    phi = (np.arange(n_source) + 0.5) * (math.pi / n_source)
    lam1, lam2 = source_angles(phi)
    source = np.zeros((n_source, n_source))
    np.fill_diagonal(source, 1.0 / n_source)

    def tables(lam, settings, n_inst):
        u = (np.arange(n_inst) + 0.5) / n_inst
        dist = np.full(n_inst, 1.0 / n_inst)
        out = {}
        for s in settings:
            outcome = wing_outcome(model, lam[:, None], float(s), u[None, :])
            out[float(s)] = (tuple(u), dist, outcome)
        return out

    return FiniteContextualModel(
        tuple(lam1),
        tuple(lam2),
        source,
        tables(lam1, settings_x, n_alice),
        tables(lam2, settings_y, n_bob),
    )


# ---------------------------------------------------------------------------
# Stream persistence
# ---------------------------------------------------------------------------


def stream_metadata(model, schedule, n_trials, master_seed, chunk_size) -> dict:
    seed = list(master_seed) if isinstance(master_seed, (tuple, list)) else master_seed
    return {
        "format": STREAM_FORMAT,
        "columns": list(CSV_HEADER),
        "model": model.descriptor(),
        "schedule": schedule.descriptor(),
        "master_seed": seed,
        "chunk_size": int(chunk_size),
        "n_trials": int(n_trials),
        "tool_version": __version__,
    }


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_suffix(p.suffix + ".meta.json")


def write_stream_csv(stream: TrialStream, path, metadata: dict | None = None) -> None:
    """Write `trial,x_rad,y_rad,a,b` rows plus a metadata sidecar.

    Floats are written with repr (shortest round-trip form), so rewriting the
    same stream is byte-identical and reading back is lossless.
    """
    p = Path(path)
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t, x, y, a, b in zip(stream.trial, stream.x, stream.y, stream.a, stream.b):
            writer.writerow((int(t), repr(float(x)), repr(float(y)), int(a), int(b)))
    if metadata is not None:
        meta_path(p).write_text(json.dumps(metadata, indent=1, sort_keys=True))


def read_stream_csv(path) -> TrialStream:
    p = Path(path)
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise StreamFormatError(
                f"{p}: expected header {','.join(CSV_HEADER)}, got {header}"
            )
        cols = ([], [], [], [], [])
        for row in reader:
            if len(row) != 5:
                raise StreamFormatError(f"{p}: malformed row {row!r}")
            try:
                cols[0].append(int(row[0]))
                cols[1].append(float(row[1]))
                cols[2].append(float(row[2]))
                cols[3].append(int(row[3]))
                cols[4].append(int(row[4]))
            except ValueError as exc:
                raise StreamFormatError(f"{p}: malformed row {row!r}: {exc}") from exc
    return TrialStream(*cols)


def stream_digest(path) -> str:
    """SHA-256 of a stream file, for reproducibility assertions."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
