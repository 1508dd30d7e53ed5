"""Finite contextual hidden-variable models and their exact expectations.

A model couples a two-sided source with per-setting instrument variables:
the source emits a pair (lambda1, lambda2) with joint distribution P, wing A
at setting x carries its own instrument variable lambda_x with distribution
P_x, and the registered outcome is A_x(lambda1, lambda_x) in {-1, 0, +1}
(0 means no detection).  Wing B mirrors this with lambda_y, P_y and
B_y(lambda2, lambda_y).  The parameter space is setting-pair specific: the
pair expectation sums A_x * B_y * P_x * P_y * P over
Lambda1 x Lambda2 x Lambda_x x Lambda_y, and single-wing marginals sum the
same factors with the other wing removed.  Because A never references
lambda_y and B never references lambda_x, the sums are evaluated as a
factored contraction: per-source-value instrument reductions first, then the
source contraction in fixed lambda1-outer, lambda2-inner order.  All
reductions use compensated summation (math.fsum), so results are
deterministic bit-for-bit.

Probability tables are validated against a 1e-12 normalization tolerance and
then renormalized so that their compensated float sum is exactly 1.0; this
makes the marginalization-consistency and sure-conditioning identities hold
exactly, not approximately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ModelValidationError,
    UndefinedConditionalError,
    UnknownSettingError,
)

TWO_PI = 2.0 * math.pi
PROB_TOLERANCE = 1e-12

MODEL_FORMAT = "finite-contextual-model/1"


def normalize_angle(theta: float) -> float:
    """Map an angle in radians to the canonical interval [0, 2*pi)."""
    t = math.fmod(float(theta), TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True)
class SettingPair:
    """One (Alice, Bob) pair of analyzer settings, angles in [0, 2*pi)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", normalize_angle(self.x))
        object.__setattr__(self, "y", normalize_angle(self.y))


def _exact_probabilities(table, name: str) -> np.ndarray:
    """Validate a probability table and renormalize to an exact float sum of 1.

    Rejects negative, non-finite, or out-of-tolerance input rather than
    silently fixing it; the post-renormalization residual (at most a few ulp)
    is folded into the largest cell so that math.fsum over the table returns
    exactly 1.0.
    """
    arr = np.array(table, dtype=float)
    if arr.size == 0:
        raise ModelValidationError(f"{name}: empty probability table")
    if not np.all(np.isfinite(arr)):
        raise ModelValidationError(f"{name}: non-finite probability entries")
    if np.any(arr < 0.0):
        raise ModelValidationError(f"{name}: negative probability entries")
    total = math.fsum(arr.flat)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ModelValidationError(
            f"{name}: probabilities sum to {total!r}, outside tolerance "
            f"{PROB_TOLERANCE:g} of 1"
        )
    out = arr / total
    for _ in range(32):
        residual = 1.0 - math.fsum(out.flat)
        if residual == 0.0:
            break
        idx = np.unravel_index(int(np.argmax(out)), out.shape)
        out[idx] += residual
    else:
        raise ModelValidationError(f"{name}: renormalization did not converge")
    out.setflags(write=False)
    return out


def _validated_outcomes(table, n_source: int, n_inst: int, name: str) -> np.ndarray:
    arr = np.array(table)
    if arr.shape != (n_source, n_inst):
        raise ModelValidationError(
            f"{name}: outcome table shape {arr.shape} != ({n_source}, {n_inst})"
        )
    as_int = np.asarray(np.rint(arr), dtype=np.int8)
    if not np.array_equal(as_int, arr) or not np.all(np.isin(as_int, (-1, 0, 1))):
        raise ModelValidationError(f"{name}: outcome entries must be exactly -1, 0, or +1")
    as_int.setflags(write=False)
    return as_int


@dataclass(frozen=True)
class WingTables:
    """Instrument data bound to one setting of one wing.

    `outcome[i, k]` is the registered outcome for source value i and
    instrument value k; `dist[k]` is the instrument distribution.
    """

    space: tuple
    dist: np.ndarray
    outcome: np.ndarray


class FiniteContextualModel:
    """Discrete source/instrument spaces with per-setting outcome tables.

    `alice` and `bob` map each declared setting (radians, normalized to
    [0, 2*pi)) to its `WingTables`.  The source distribution is shared by all
    setting pairs and never indexed by a setting.
    """

    def __init__(
        self,
        lambda1_space: Sequence,
        lambda2_space: Sequence,
        source_dist,
        alice: Mapping[float, tuple],
        bob: Mapping[float, tuple],
    ):
        self.lambda1_space = tuple(lambda1_space)
        self.lambda2_space = tuple(lambda2_space)
        n1, n2 = len(self.lambda1_space), len(self.lambda2_space)
        if n1 == 0 or n2 == 0:
            raise ModelValidationError("source spaces must be nonempty")
        self.source_dist = _exact_probabilities(source_dist, "source_dist")
        if self.source_dist.shape != (n1, n2):
            raise ModelValidationError(
                f"source_dist shape {self.source_dist.shape} != ({n1}, {n2})"
            )
        self._alice = self._build_wing(alice, n1, "alice")
        self._bob = self._build_wing(bob, n2, "bob")
        self._sampling_cache: dict = {}

    @staticmethod
    def _build_wing(tables, n_source: int, wing: str) -> dict[float, WingTables]:
        if not tables:
            raise ModelValidationError(f"{wing}: at least one setting is required")
        built: dict[float, WingTables] = {}
        for setting, entry in tables.items():
            s = normalize_angle(setting)
            if isinstance(entry, WingTables):
                space, dist, outcome = entry.space, entry.dist, entry.outcome
            else:
                space, dist, outcome = entry
            name = f"{wing}[{s!r}]"
            dist = _exact_probabilities(dist, name)
            if dist.ndim != 1 or len(dist) != len(tuple(space)):
                raise ModelValidationError(f"{name}: dist length != space size")
            outcome = _validated_outcomes(outcome, n_source, len(dist), name)
            built[s] = WingTables(tuple(space), dist, outcome)
        return built

    @property
    def alice_settings(self) -> tuple[float, ...]:
        return tuple(self._alice)

    @property
    def bob_settings(self) -> tuple[float, ...]:
        return tuple(self._bob)

    def alice_tables(self, x: float) -> WingTables:
        key = normalize_angle(x)
        try:
            return self._alice[key]
        except KeyError:
            raise UnknownSettingError(
                f"Alice setting {x!r} not declared (have {self.alice_settings})"
            ) from None

    def bob_tables(self, y: float) -> WingTables:
        key = normalize_angle(y)
        try:
            return self._bob[key]
        except KeyError:
            raise UnknownSettingError(
                f"Bob setting {y!r} not declared (have {self.bob_settings})"
            ) from None

    # -- sampling support (used by the simulation layer) --

    def sampling_tables(self, x: float, y: float):
        """Cumulative distributions for inverse-CDF sampling at one pair.

        Cached per setting pair; the final cumulative entry is pinned to 1.0
        so uniform draws in [0, 1) always land inside the table.
        """
        key = (normalize_angle(x), normalize_angle(y))
        if key not in self._sampling_cache:
            at, bt = self.alice_tables(x), self.bob_tables(y)
            cum_source = np.cumsum(self.source_dist.ravel())
            cum_source[-1] = 1.0
            cum_a = np.cumsum(at.dist)
            cum_a[-1] = 1.0
            cum_b = np.cumsum(bt.dist)
            cum_b[-1] = 1.0
            self._sampling_cache[key] = (cum_source, cum_a, cum_b, at.outcome, bt.outcome)
        return self._sampling_cache[key]

    def descriptor(self) -> dict:
        """Compact identifying summary for stream metadata."""
        return {
            "kind": "finite",
            "n_lambda1": len(self.lambda1_space),
            "n_lambda2": len(self.lambda2_space),
            "alice_settings": [float(s) for s in self.alice_settings],
            "bob_settings": [float(s) for s in self.bob_settings],
        }


# ---------------------------------------------------------------------------
# Exact expectations
# ---------------------------------------------------------------------------


def _response(tables: WingTables) -> np.ndarray:
    """Mean outcome per source value: fsum_k outcome[i, k] * dist[k]."""
    dist = tables.dist
    return np.array(
        [math.fsum(float(o) * float(p) for o, p in zip(row, dist)) for row in tables.outcome]
    )


def _detection(tables: WingTables) -> np.ndarray:
    """Detection probability per source value: fsum of dist over outcome != 0."""
    dist = tables.dist
    return np.array(
        [
            math.fsum(float(p) for o, p in zip(row, dist) if o != 0)
            for row in tables.outcome
        ]
    )


def _source_contract(source: np.ndarray, a_factor, b_factor) -> float:
    """fsum of source[i, j] * a_factor[i] * b_factor[j], lambda1 outer."""
    n1, n2 = source.shape
    return math.fsum(
        float(source[i, j]) * float(a_factor[i]) * float(b_factor[j])
        for i in range(n1)
        for j in range(n2)
    )


def pair_expectation(model: FiniteContextualModel, x: float, y: float) -> float:
    """Expectation of the outcome product A*B at settings (x, y).

    Non-detections enter as 0, so this is the raw (unconditioned) value.
    """
    abar = _response(model.alice_tables(x))
    bbar = _response(model.bob_tables(y))
    return _source_contract(model.source_dist, abar, bbar)


def alice_marginal(model: FiniteContextualModel, x: float) -> float:
    """Expectation of Alice's outcome at setting x; never references wing B."""
    abar = _response(model.alice_tables(x))
    source = model.source_dist
    n1, n2 = source.shape
    return math.fsum(
        float(source[i, j]) * float(abar[i]) for i in range(n1) for j in range(n2)
    )


def bob_marginal(model: FiniteContextualModel, y: float) -> float:
    """Expectation of Bob's outcome at setting y; never references wing A."""
    bbar = _response(model.bob_tables(y))
    source = model.source_dist
    n1, n2 = source.shape
    return math.fsum(
        float(source[i, j]) * float(bbar[j]) for i in range(n1) for j in range(n2)
    )


def joint_detection_probability(model: FiniteContextualModel, x: float, y: float) -> float:
    """Probability that both wings register a nonzero outcome at (x, y)."""
    sa = _detection(model.alice_tables(x))
    sb = _detection(model.bob_tables(y))
    return _source_contract(model.source_dist, sa, sb)


def coincidence_expectation(model: FiniteContextualModel, x: float, y: float) -> float:
    """Expectation of A*B conditioned on both outcomes being nonzero.

    Zero outcomes contribute nothing to the product sum, so the numerator is
    the same contraction as `pair_expectation`; only the normalization by the
    joint detection probability differs.
    """
    denom = joint_detection_probability(model, x, y)
    if denom <= 0.0:
        raise UndefinedConditionalError(
            f"no joint detections at (x={x!r}, y={y!r}); conditional undefined"
        )
    return pair_expectation(model, x, y) / denom


def postselected_marginal(model: FiniteContextualModel, x: float, y: float, wing: str) -> float:
    """Single-wing expectation conditioned on joint detection at (x, y).

    Unlike the raw marginals this may depend on both settings: conditioning
    reweights the source values by the other wing's detection profile.
    """
    if wing not in ("A", "B"):
        raise ValueError(f"wing must be 'A' or 'B', got {wing!r}")
    at, bt = model.alice_tables(x), model.bob_tables(y)
    sa, sb = _detection(at), _detection(bt)
    denom = _source_contract(model.source_dist, sa, sb)
    if denom <= 0.0:
        raise UndefinedConditionalError(
            f"no joint detections at (x={x!r}, y={y!r}); conditional undefined"
        )
    if wing == "A":
        num = _source_contract(model.source_dist, _response(at), sb)
    else:
        num = _source_contract(model.source_dist, sa, _response(bt))
    return num / denom


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------


def model_to_dict(model: FiniteContextualModel) -> dict:
    """JSON-compatible representation.

    Index convention (enforced by the loader): `source_dist[i1][i2]` follows
    (lambda1, lambda2); each wing's `outcome[i_source][i_inst]` has the source
    index first.  Setting keys are repr'd floats, which round-trip exactly.
    """

    def wing_dict(tables: dict[float, WingTables]) -> dict:
        return {
            repr(float(s)): {
                "space": list(t.space),
                "dist": t.dist.tolist(),
                "outcome": t.outcome.tolist(),
            }
            for s, t in tables.items()
        }

    return {
        "format": MODEL_FORMAT,
        "index_order": "source_dist[i1][i2]; outcome[i_source][i_inst]",
        "lambda1_space": list(model.lambda1_space),
        "lambda2_space": list(model.lambda2_space),
        "source_dist": model.source_dist.tolist(),
        "alice": wing_dict(model._alice),
        "bob": wing_dict(model._bob),
    }


def model_from_dict(data: Mapping) -> FiniteContextualModel:
    if data.get("format") != MODEL_FORMAT:
        raise ModelValidationError(
            f"unsupported model format {data.get('format')!r} (expected {MODEL_FORMAT!r})"
        )
    try:
        alice = {
            float(s): (w["space"], w["dist"], w["outcome"]) for s, w in data["alice"].items()
        }
        bob = {
            float(s): (w["space"], w["dist"], w["outcome"]) for s, w in data["bob"].items()
        }
        return FiniteContextualModel(
            data["lambda1_space"], data["lambda2_space"], data["source_dist"], alice, bob
        )
    except (KeyError, TypeError) as exc:
        raise ModelValidationError(f"malformed model document: {exc}") from exc


def save_model(model: FiniteContextualModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True))


def load_model(path) -> FiniteContextualModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelValidationError(f"{path}: not valid JSON: {exc}") from exc
    return model_from_dict(data)


# ---------------------------------------------------------------------------
# Model factories
# ---------------------------------------------------------------------------


def random_model(
    rng: np.random.Generator,
    n1: int = 3,
    n2: int = 3,
    n_inst: int = 2,
    settings_x: Sequence[float] = (0.0, math.pi / 4),
    settings_y: Sequence[float] = (math.pi / 8, 3 * math.pi / 8),
    zero_weight: float = 0.2,
) -> FiniteContextualModel:
    """Random finite model with fresh instrument tables per setting.

    `zero_weight` is the probability mass put on the non-detection outcome
    when drawing outcome-table entries.
    """
    probs = [(1 - zero_weight) / 2, zero_weight, (1 - zero_weight) / 2]

    def rand_dist(shape):
        raw = rng.random(shape) + 0.05
        return raw / math.fsum(raw.flat)

    def rand_wing(n_source):
        dist = rand_dist(n_inst)
        outcome = rng.choice((-1, 0, 1), size=(n_source, n_inst), p=probs)
        return dist, outcome

    alice = {}
    for x in settings_x:
        dist, outcome = rand_wing(n1)
        alice[x] = (tuple(range(n_inst)), dist, outcome)
    bob = {}
    for y in settings_y:
        dist, outcome = rand_wing(n2)
        bob[y] = (tuple(range(n_inst)), dist, outcome)
    return FiniteContextualModel(
        tuple(range(n1)), tuple(range(n2)), rand_dist((n1, n2)), alice, bob
    )


def shared_space_model(
    rng: np.random.Generator,
    n1: int = 3,
    n2: int = 3,
    n_inst: int = 2,
    settings_x: Sequence[float] = (0.0, math.pi / 4),
    settings_y: Sequence[float] = (math.pi / 8, 3 * math.pi / 8),
) -> FiniteContextualModel:
    """Degenerate model on a single shared probability space.

    Every setting of a wing reuses one instrument space with one distribution,
    and outcomes are strictly +-1 (no non-detections).  All four CHSH
    correlations are then random variables on the common space
    Lambda1 x Lambda2 x Lambda_x x Lambda_y, so |S| <= 2 up to sampling noise.
    """
    raw = rng.random(n_inst) + 0.05
    dist_a = raw / math.fsum(raw)
    raw = rng.random(n_inst) + 0.05
    dist_b = raw / math.fsum(raw)
    raw = rng.random((n1, n2)) + 0.05
    source = raw / math.fsum(raw.flat)

    alice = {
        x: (tuple(range(n_inst)), dist_a, rng.choice((-1, 1), size=(n1, n_inst)))
        for x in settings_x
    }
    bob = {
        y: (tuple(range(n_inst)), dist_b, rng.choice((-1, 1), size=(n2, n_inst)))
        for y in settings_y
    }
    return FiniteContextualModel(tuple(range(n1)), tuple(range(n2)), source, alice, bob)
