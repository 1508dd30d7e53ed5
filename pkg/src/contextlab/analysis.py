"""Correlation estimation, CHSH combinations, and no-signaling reports.

Estimators fold click streams into per-setting-pair counts.  The raw
expectation keeps non-detections in the product (a zero outcome contributes a
zero product), which puts the estimator on the same footing as the exact
finite-model contraction; the coincidence expectation conditions on both
wings having clicked.  The shared-space bound is established constructively:
enumerating all deterministic +-1 assignments to the four CHSH observables
shows every vertex reaches |S| = 2 and none exceeds it, and mixtures are
convex combinations of vertices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import IncompleteDesignError, InsufficientDataError
from .models import SettingPair
from .randtests import TestReport, chi_square_table
from .simulate import SelectiveModel, SettingsSchedule, TrialStream, run_experiment

OUTCOME_INDEX = {-1: 0, 0: 1, 1: 2}
OUTCOME_VALUES = (-1, 0, 1)

# standard maximizer for cosine-law correlations in the 2*theta convention
DEFAULT_CHSH_SETTINGS = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)


# ---------------------------------------------------------------------------
# Correlation estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationEstimate:
    """Counts and expectations for one setting pair.

    `counts[i, j]` indexes outcomes (-1, 0, +1) for Alice (rows) and Bob
    (columns).  The coincidence fields are None when no trial had both wings
    click.
    """

    pair: SettingPair
    counts: np.ndarray
    n_trials: int
    raw_expectation: float
    raw_se: float
    n_coincidences: int
    coincidence_expectation: float | None
    coincidence_se: float | None

    def expectation(self, mode: str) -> tuple[float, float]:
        if mode == "raw":
            return self.raw_expectation, self.raw_se
        if mode == "coincidence":
            if self.coincidence_expectation is None:
                raise IncompleteDesignError(
                    f"coincidence expectation undefined at {self.pair}"
                )
            return self.coincidence_expectation, self.coincidence_se
        raise ValueError(f"mode must be 'raw' or 'coincidence', got {mode!r}")


def _mean_and_se(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def estimate_correlations(stream: TrialStream) -> dict[SettingPair, CorrelationEstimate]:
    """One estimate per distinct setting pair, in first-appearance order."""
    if len(stream) == 0:
        raise InsufficientDataError("empty stream")
    estimates: dict[SettingPair, CorrelationEstimate] = {}
    keys = np.stack([stream.x, stream.y], axis=1)
    unique, first_index, inverse = np.unique(
        keys, axis=0, return_index=True, return_inverse=True
    )
    order = np.argsort(first_index)
    for u in order:
        x, y = float(unique[u, 0]), float(unique[u, 1])
        mask = inverse == u
        a = stream.a[mask].astype(float)
        b = stream.b[mask].astype(float)
        counts = np.zeros((3, 3), dtype=np.int64)
        for av in OUTCOME_VALUES:
            for bv in OUTCOME_VALUES:
                counts[OUTCOME_INDEX[av], OUTCOME_INDEX[bv]] = int(
                    np.sum((a == av) & (b == bv))
                )
        products = a * b
        raw, raw_se = _mean_and_se(products)
        coinc_mask = (a != 0) & (b != 0)
        n_coinc = int(coinc_mask.sum())
        if n_coinc > 0:
            c_mean, c_se = _mean_and_se(products[coinc_mask])
        else:
            c_mean, c_se = None, None
        pair = SettingPair(x, y)
        estimates[pair] = CorrelationEstimate(
            pair=pair,
            counts=counts,
            n_trials=int(mask.sum()),
            raw_expectation=raw,
            raw_se=raw_se,
            n_coincidences=n_coinc,
            coincidence_expectation=c_mean,
            coincidence_se=c_se,
        )
    return estimates


# ---------------------------------------------------------------------------
# CHSH
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChshResult:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b') with its quadrature-sum SE."""

    settings: tuple[float, float, float, float]
    mode: str
    s_value: float
    se: float
    terms: tuple[float, float, float, float]

    def __post_init__(self):
        if abs(self.s_value) > 4.0 + 1e-9:
            raise ValueError(f"|S| = {abs(self.s_value)} exceeds the algebraic maximum 4")


def chsh(
    estimates: Mapping[SettingPair, CorrelationEstimate],
    a: float,
    a_prime: float,
    b: float,
    b_prime: float,
    mode: str = "raw",
) -> ChshResult:
    pairs = (
        SettingPair(a, b),
        SettingPair(a, b_prime),
        SettingPair(a_prime, b),
        SettingPair(a_prime, b_prime),
    )
    values, variances = [], []
    for pair in pairs:
        if pair not in estimates:
            raise IncompleteDesignError(f"setting pair {pair} missing from the stream")
        e, se = estimates[pair].expectation(mode)
        values.append(e)
        variances.append(se**2)
    s = values[0] - values[1] + values[2] + values[3]
    return ChshResult(
        settings=(a, a_prime, b, b_prime),
        mode=mode,
        s_value=float(s),
        se=float(math.sqrt(sum(variances))),
        terms=tuple(values),
    )


# ---------------------------------------------------------------------------
# Shared-space bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LhvBoundResult:
    """Exhaustive enumeration of the 16 deterministic CHSH strategies."""

    max_abs_s: float
    vertices: tuple  # rows (A(a), A(a'), B(b), B(b'), S)
    argmax: tuple  # the assignments reaching max |S|
    note: str = (
        "mixtures of deterministic strategies are convex combinations of the "
        "16 vertices, so no shared-space model exceeds the vertex maximum"
    )


def lhv_bound_enumeration() -> LhvBoundResult:
    """Max |S| over all deterministic +-1 assignments to the four observables."""
    rows = []
    best: list[tuple] = []
    max_abs = 0.0
    for aa, ap, bb, bp in itertools.product((-1, 1), repeat=4):
        s = aa * bb - aa * bp + ap * bb + ap * bp
        rows.append((aa, ap, bb, bp, s))
        if abs(s) > max_abs:
            max_abs = abs(s)
            best = [(aa, ap, bb, bp, s)]
        elif abs(s) == max_abs:
            best.append((aa, ap, bb, bp, s))
    return LhvBoundResult(max_abs_s=float(max_abs), vertices=tuple(rows), argmax=tuple(best))


# ---------------------------------------------------------------------------
# No-signaling reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoSignalingReport:
    """Chi-square comparisons of single-wing outcome distributions.

    For each wing and each of its settings, the raw tests compare the full
    (-1, 0, +1) outcome counts across the counterpart's settings; the
    post-selected tests repeat the comparison restricted to trials where both
    wings clicked.  Raw dependence would signal; post-selected dependence is
    an artifact of conditioning and does not.
    """

    raw_tests: tuple[TestReport, ...]
    postselected_tests: tuple[TestReport, ...]

    def any_raw_rejection(self) -> bool:
        return any(t.reject for t in self.raw_tests)

    def any_postselected_rejection(self) -> bool:
        return any(t.reject for t in self.postselected_tests)

    def all_tests(self) -> tuple[TestReport, ...]:
        return self.raw_tests + self.postselected_tests


def _singles_tests(
    stream: TrialStream,
    wing: str,
    alpha: float,
    postselected: bool,
) -> list[TestReport]:
    own = stream.x if wing == "A" else stream.y
    other = stream.y if wing == "A" else stream.x
    outcomes = stream.a if wing == "A" else stream.b
    keep = np.ones(len(stream), dtype=bool)
    if postselected:
        keep = (stream.a != 0) & (stream.b != 0)
    reports = []
    for s in sorted(set(own.tolist())):
        mask_s = (own == s) & keep
        counterparts = sorted(set(other[mask_s].tolist()))
        if len(counterparts) < 2:
            continue
        table = np.zeros((len(counterparts), 3), dtype=np.int64)
        for row, c in enumerate(counterparts):
            sel = outcomes[mask_s & (other == c)]
            for v in OUTCOME_VALUES:
                table[row, OUTCOME_INDEX[v]] = int(np.sum(sel == v))
        stat, dof, p = chi_square_table(table)
        label = "postselected-singles" if postselected else "raw-singles"
        reports.append(
            TestReport(
                name=f"{label}:{wing}|setting={s:g}",
                statistic=stat,
                null_ref=f"chi2(df={dof})",
                p_value=p,
                alpha=alpha,
                n=int(table.sum()),
                details={"counterpart_settings": counterparts, "counts": table.tolist()},
            )
        )
    return reports


def no_signaling_report(
    stream: TrialStream,
    alpha_raw: float = 0.01,
    alpha_postselected: float = 0.001,
) -> NoSignalingReport:
    raw = _singles_tests(stream, "A", alpha_raw, False) + _singles_tests(
        stream, "B", alpha_raw, False
    )
    if not raw:
        raise InsufficientDataError(
            "no-signaling comparison needs at least two counterpart settings "
            "for some setting of some wing"
        )
    post = _singles_tests(stream, "A", alpha_postselected, True) + _singles_tests(
        stream, "B", alpha_postselected, True
    )
    return NoSignalingReport(raw_tests=tuple(raw), postselected_tests=tuple(post))


# ---------------------------------------------------------------------------
# Quadrature curves for the continuous models
# ---------------------------------------------------------------------------


def _midpoint_phi(n_points: int) -> np.ndarray:
    return (np.arange(n_points) + 0.5) * (math.pi / n_points)


def model_curves(model, x: float, y: float, n_points: int = 200_001) -> dict:
    """Deterministic midpoint-rule values for one continuous-model pair.

    Returns raw/coincidence expectations, the joint detection rate and both
    post-selected marginals.
    """
    phi = _midpoint_phi(n_points)
    da = phi - x
    db = phi + math.pi / 2 - y
    sa = model.survival(da)
    sb = model.survival(db)
    ca = np.cos(2.0 * da)
    cb = np.cos(2.0 * db)
    w = sa * sb
    total = float(np.sum(w))
    rate = total / n_points
    if total <= 0.0:
        raise InsufficientDataError("joint detection rate vanishes")
    return {
        "raw_expectation": float(np.sum(w * ca * cb)) / n_points,
        "coincidence_expectation": float(np.sum(w * ca * cb)) / total,
        "detection_rate": rate,
        "postselected_marginal_a": float(np.sum(w * ca)) / total,
        "postselected_marginal_b": float(np.sum(w * cb)) / total,
    }


def quadrature_chsh(
    model,
    settings: Sequence[float] = DEFAULT_CHSH_SETTINGS,
    mode: str = "coincidence",
    n_points: int = 200_001,
) -> float:
    a, ap, b, bp = settings
    key = "coincidence_expectation" if mode == "coincidence" else "raw_expectation"
    e = {
        (xx, yy): model_curves(model, xx, yy, n_points)[key]
        for xx, yy in ((a, b), (a, bp), (ap, b), (ap, bp))
    }
    return e[(a, b)] - e[(a, bp)] + e[(ap, b)] + e[(ap, bp)]


# ---------------------------------------------------------------------------
# Calibration sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    sharpness: float
    s_quadrature: float
    s_monte_carlo: float
    discrepancy: float
    min_coincidence_rate: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best: SweepRow
    settings: tuple[float, float, float, float]
    asymmetry: float
    trials_per_point: int
    master_seed: int

    def series(self) -> tuple[tuple[str, ...], list[tuple]]:
        header = ("sharpness", "abs_s_quadrature", "abs_s_monte_carlo", "discrepancy")
        rows = [
            (r.sharpness, abs(r.s_quadrature), abs(r.s_monte_carlo), r.discrepancy)
            for r in self.rows
        ]
        return header, rows


DEFAULT_SWEEP_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def calibration_sweep(
    d_grid: Sequence[float] = DEFAULT_SWEEP_GRID,
    settings: Sequence[float] = DEFAULT_CHSH_SETTINGS,
    trials_per_point: int = 10**6,
    master_seed: int = 0,
    asymmetry: float = 0.0,
    n_points: int = 200_001,
) -> SweepResult:
    """Coincidence-mode CHSH across the rejection-sharpness grid.

    For each grid value the CHSH combination is evaluated twice: by the
    midpoint-rule oracle and from Monte Carlo streams of `trials_per_point`
    trials per setting pair.  The returned best row maximizes the oracle |S|
    (deterministic in the grid; ties keep the first).
    """
    if not d_grid:
        raise InsufficientDataError("sharpness grid must be nonempty")
    a, ap, b, bp = settings
    pair_list = ((a, b), (a, bp), (ap, b), (ap, bp))
    signs = (1.0, -1.0, 1.0, 1.0)
    rows = []
    for di, d in enumerate(d_grid):
        model = SelectiveModel(float(d), asymmetry)
        s_quad = quadrature_chsh(model, settings, "coincidence", n_points)
        s_mc = 0.0
        min_rate = 1.0
        for pi, (xx, yy) in enumerate(pair_list):
            schedule = SettingsSchedule("cycle", (xx,), (yy,))
            stream = run_experiment(
                model, schedule, trials_per_point, master_seed=(master_seed, di, pi)
            )
            est = next(iter(estimate_correlations(stream).values()))
            e, _ = est.expectation("coincidence")
            s_mc += signs[pi] * e
            min_rate = min(min_rate, est.n_coincidences / est.n_trials)
        rows.append(
            SweepRow(
                sharpness=float(d),
                s_quadrature=s_quad,
                s_monte_carlo=s_mc,
                discrepancy=abs(s_quad - s_mc),
                min_coincidence_rate=min_rate,
            )
        )
    best = max(rows, key=lambda r: abs(r.s_quadrature))
    return SweepResult(
        rows=tuple(rows),
        best=best,
        settings=tuple(settings),
        asymmetry=asymmetry,
        trials_per_point=trials_per_point,
        master_seed=master_seed,
    )
