"""Coin-flipping devices, urn draws, and box ensembles.

Three desk devices flip a two-colored coin (faces 'B' and 'R'): D1 is a
deterministic face inverter, D2 alternates its output with only the first
result uncertain, and D3 is a fair Bernoulli device (an optional bias models
an external perturbation).  The urn experiment draws coins without
replacement from a box holding N blue and N red coins, where the chance of
blue at the next draw after k draws containing m blues is (N-m)/(2N-k); the
box is refilled between rounds.  The box ensembles contrast a mixed
collection (single-colored coins, the drawn coin's fixed color is reported)
with a pure one (identical two-sided coins put through D3), and the hole
protocol removes unobserved coins and compares frequencies before and after.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyUrnError, StreamFormatError
from .randtests import TestReport, two_proportion_test
from .seeding import substream

FACES = ("B", "R")
COIN_CSV_HEADER = ("trial", "outcome")


def opposite(face: str) -> str:
    if face not in FACES:
        raise ConfigError(f"face must be 'B' or 'R', got {face!r}")
    return "R" if face == "B" else "B"


# ---------------------------------------------------------------------------
# Flipping devices
# ---------------------------------------------------------------------------


def d1_step(face: str) -> str:
    """Deterministic inverter: B in gives R out and vice versa."""
    return opposite(face)


@dataclass(frozen=True)
class D2State:
    """Alternating device memory; `last` is None before the first flip."""

    last: str | None = None


def d2_step(state: D2State, face: str, rng: np.random.Generator) -> tuple[str, D2State]:
    """Alternating flipper: the first output is a fair draw, then it strictly
    alternates regardless of the inserted face."""
    opposite(face)  # validates the input face
    if state.last is None:
        out = "B" if rng.random() < 0.5 else "R"
    else:
        out = opposite(state.last)
    return out, replace(state, last=out)


def d3_step(rng: np.random.Generator, p_blue: float = 0.5) -> str:
    """Bernoulli flipper; p_blue != 0.5 models a perturbed device."""
    if not 0.0 <= p_blue <= 1.0:
        raise ConfigError(f"p_blue must be in [0, 1], got {p_blue}")
    return "B" if rng.random() < p_blue else "R"


def d1_run(first_face: str, n: int) -> np.ndarray:
    """Feed the same face n times; the output is the constant opposite."""
    return np.array([d1_step(first_face)] * n)


def d2_run(n: int, seed) -> np.ndarray:
    rng = substream(seed, 0, 0)
    state = D2State()
    out = []
    for _ in range(n):
        face, state = d2_step(state, "B", rng)
        out.append(face)
    return np.array(out)


def d3_run(n: int, seed, p_blue: float = 0.5) -> np.ndarray:
    if not 0.0 <= p_blue <= 1.0:
        raise ConfigError(f"p_blue must be in [0, 1], got {p_blue}")
    rng = substream(seed, 0, 0)
    draws = rng.random(n) < p_blue
    return np.where(draws, "B", "R")


# ---------------------------------------------------------------------------
# Urn without replacement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UrnState:
    """Progress of one round: k draws so far, m of them blue, N per color."""

    N: int
    k: int = 0
    m: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not (0 <= self.m <= min(self.k, self.N)):
            raise ConfigError(f"invalid urn state: k={self.k}, m={self.m}, N={self.N}")
        if self.k > 2 * self.N or self.k - self.m > self.N:
            raise ConfigError(f"invalid urn state: k={self.k}, m={self.m}, N={self.N}")

    @property
    def blue_remaining(self) -> int:
        return self.N - self.m

    @property
    def red_remaining(self) -> int:
        return self.N - (self.k - self.m)


def e4_draw_probability(k: int, m: int, N: int) -> float:
    """Chance of blue at draw k+1 after m blues in k draws: (N-m)/(2N-k)."""
    if N < 1 or m < 0 or m > k or m > N or k - m > N:
        raise ConfigError(f"invalid urn state: k={k}, m={m}, N={N}")
    if k >= 2 * N:
        raise EmptyUrnError(f"all {2 * N} coins already drawn")
    return (N - m) / (2 * N - k)


def e4_step(state: UrnState, rng: np.random.Generator) -> tuple[str, UrnState]:
    p_blue = e4_draw_probability(state.k, state.m, state.N)
    if rng.random() < p_blue:
        return "B", replace(state, k=state.k + 1, m=state.m + 1)
    return "R", replace(state, k=state.k + 1)


def e4_run(
    N: int, draws_per_round: int, rounds: int, seed
) -> tuple[np.ndarray, np.ndarray]:
    """Rounds of without-replacement draws; the urn refills between rounds.

    Returns the concatenated face stream and the per-round blue counts.
    """
    if draws_per_round > 2 * N:
        raise ConfigError(
            f"cannot draw {draws_per_round} coins from an urn of {2 * N}"
        )
    if draws_per_round < 1 or rounds < 1:
        raise ConfigError("draws_per_round and rounds must be >= 1")
    faces = np.empty(draws_per_round * rounds, dtype="<U1")
    blue_counts = np.empty(rounds, dtype=np.int64)
    pos = 0
    for r in range(rounds):
        rng = substream(seed, r, 0)
        m = 0
        for k in range(draws_per_round):
            if rng.random() < e4_draw_probability(k, m, N):
                faces[pos] = "B"
                m += 1
            else:
                faces[pos] = "R"
            pos += 1
        blue_counts[r] = m
    return faces, blue_counts


# ---------------------------------------------------------------------------
# Box ensembles and the hole protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxEnsemble:
    """Mixed box of single-colored coins or pure box of two-sided coins.

    Mixed-box draws report the picked coin's fixed color (the flipping device
    cannot change a single-colored coin) and return it to the box; pure-box
    draws put an identical two-sided coin through the Bernoulli device.
    """

    kind: str
    n_blue: int = 0
    n_red: int = 0
    n_coins: int = 0

    def __post_init__(self):
        if self.kind not in ("mixed", "pure"):
            raise ConfigError(f"kind must be 'mixed' or 'pure', got {self.kind!r}")
        if min(self.n_blue, self.n_red, self.n_coins) < 0:
            raise ConfigError("coin counts must be nonnegative")
        if self.kind == "mixed" and self.n_coins:
            raise ConfigError("mixed boxes use n_blue/n_red only")
        if self.kind == "pure" and (self.n_blue or self.n_red):
            raise ConfigError("pure boxes use n_coins only")

    @property
    def size(self) -> int:
        return self.n_blue + self.n_red if self.kind == "mixed" else self.n_coins


def box_trial(box: BoxEnsemble, rng: np.random.Generator) -> str:
    if box.size < 1:
        raise EmptyUrnError("box is empty")
    if box.kind == "mixed":
        return "B" if rng.random() < box.n_blue / box.size else "R"
    return d3_step(rng)


def box_run(box: BoxEnsemble, n: int, rng: np.random.Generator) -> np.ndarray:
    if box.size < 1:
        raise EmptyUrnError("box is empty")
    if box.kind == "mixed":
        draws = rng.random(n) < box.n_blue / box.size
    else:
        draws = rng.random(n) < 0.5
    return np.where(draws, "B", "R")


@dataclass(frozen=True)
class HoleProtocolResult:
    """Before/after comparison around an unobserved removal of coins."""

    box_before: BoxEnsemble
    box_after: BoxEnsemble
    removed_blue: int | None
    removed_red: int | None
    n_removed: int
    before_frequency: float
    after_frequency: float
    trials_per_phase: int
    report: TestReport


def remove_coins(box: BoxEnsemble, n_removed: int, rng: np.random.Generator):
    """Take n_removed coins out uniformly at random, without looking at them."""
    if not 0 <= n_removed < box.size:
        raise ConfigError(
            f"n_removed must be in [0, {box.size - 1}], got {n_removed}"
        )
    if box.kind == "mixed":
        removed_blue = int(rng.hypergeometric(box.n_blue, box.n_red, n_removed)) if n_removed else 0
        removed_red = n_removed - removed_blue
        after = BoxEnsemble(
            "mixed", n_blue=box.n_blue - removed_blue, n_red=box.n_red - removed_red
        )
        return after, removed_blue, removed_red
    return BoxEnsemble("pure", n_coins=box.n_coins - n_removed), None, None


def hole_protocol(
    box: BoxEnsemble, n_removed: int, seed, trials_after: int, alpha: float = 0.01
) -> HoleProtocolResult:
    """Run trials, remove unobserved coins, run the same number again.

    The two phases are compared with a pooled two-proportion z-test.  A pure
    box is unchanged by any removal; a mixed box shifts whenever the removal
    happened to change the color proportion.
    """
    if trials_after < 1:
        raise ConfigError("trials_after must be >= 1")
    rng = substream(seed, 0, 0)
    before = box_run(box, trials_after, rng)
    after_box, removed_blue, removed_red = remove_coins(box, n_removed, rng)
    after = box_run(after_box, trials_after, rng)
    k_before = int(np.sum(before == "B"))
    k_after = int(np.sum(after == "B"))
    report = two_proportion_test(
        k_before, trials_after, k_after, trials_after, alpha=alpha, name="hole-protocol"
    )
    return HoleProtocolResult(
        box_before=box,
        box_after=after_box,
        removed_blue=removed_blue,
        removed_red=removed_red,
        n_removed=n_removed,
        before_frequency=k_before / trials_after,
        after_frequency=k_after / trials_after,
        trials_per_phase=trials_after,
        report=report,
    )


# ---------------------------------------------------------------------------
# Coin stream persistence
# ---------------------------------------------------------------------------


def write_coin_csv(faces: Sequence[str], path, metadata: dict | None = None) -> None:
    p = Path(path)
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COIN_CSV_HEADER)
        for i, face in enumerate(faces):
            writer.writerow((i, face))
    if metadata is not None:
        p.with_suffix(p.suffix + ".meta.json").write_text(
            json.dumps(metadata, indent=1, sort_keys=True)
        )


def read_coin_csv(path) -> np.ndarray:
    p = Path(path)
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COIN_CSV_HEADER:
            raise StreamFormatError(
                f"{p}: expected header {','.join(COIN_CSV_HEADER)}, got {header}"
            )
        faces = []
        for row in reader:
            if len(row) != 2 or row[1] not in FACES:
                raise StreamFormatError(f"{p}: malformed row {row!r}")
            faces.append(row[1])
    return np.array(faces)
