"""The CHSH statistic for the sign-product estimator.

For two setting pairs (a1, a2) and (b1, b2) the statistic combines the
four correlations as

    S = E(a1,b1) - E(a1,b2) - E(a2,b2) - E(a2,b1).

In reuse mode all four are computed from the same trials, which is
legitimate for a classical non-destructive experiment. Writing
x_i = sign(+s_k . a_i) and y_j = sign(-s_k . b_j), trial k contributes

    x_1*(y_1 - y_2) - x_2*(y_2 + y_1)

to n*S. Because the four signs are each +-1, one of y_1 - y_2 and
y_1 + y_2 is 0 and the other is +-2, so every per-trial term is +-2
and S, their average, can never leave [-2, +2]. That identity holds
per realization, for any spin distribution, which is exactly why this
classical experiment cannot approach the singlet curve's 2*sqrt(2).

Fresh mode instead evaluates each correlation on an independent
database, modeling a destructive protocol; the bound then holds in
expectation and S may exceed 2 only by sampling noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import parallel
from ._version import __version__
from .correlation import CorrelationEstimate, estimate_correlation, station_products
from .experiment import ConfigurationError, TrialDatabase, generate_database
from .geometry import UnitVector, direction_at_angle, sample_uniform_directions
from .rng import CounterStream
from .stats import hoeffding_bound

_MIN_PARALLEL_TRIALS = 4096


@dataclass(frozen=True)
class SettingQuad:
    """The four reference directions (a1, a2) for station A, (b1, b2) for B."""

    a1: UnitVector
    a2: UnitVector
    b1: UnitVector
    b2: UnitVector

    @classmethod
    def from_plane_angles(cls, t_a1: float, t_a2: float, t_b1: float, t_b2: float) -> "SettingQuad":
        """Quad in the x-z plane, each direction at the given angle from +z."""
        return cls(
            a1=direction_at_angle(t_a1),
            a2=direction_at_angle(t_a2),
            b1=direction_at_angle(t_b1),
            b2=direction_at_angle(t_b2),
        )

    def sort_key(self) -> tuple:
        """Total order over quads; breaks ties when reducing search results."""
        return (
            self.a1.x, self.a1.y, self.a1.z,
            self.a2.x, self.a2.y, self.a2.z,
            self.b1.x, self.b1.y, self.b1.z,
            self.b2.x, self.b2.y, self.b2.z,
        )


# Settings at which the uniform-spin linear law saturates S = 2 while the
# singlet curve would reach 2*sqrt(2): a1=0, a2=90, b1=135, b2=45 degrees.
CANONICAL_QUAD = SettingQuad.from_plane_angles(0.0, math.pi / 2, 3 * math.pi / 4, math.pi / 4)


@dataclass(frozen=True)
class ChshResult:
    """The four correlations, the assembled statistic, and diagnostics."""

    e11: CorrelationEstimate
    e12: CorrelationEstimate
    e21: CorrelationEstimate
    e22: CorrelationEstimate
    statistic: float
    mode: str  # 'reuse' | 'fresh'
    n: int
    per_trial_min: int | None = None  # reuse mode only
    per_trial_max: int | None = None

    @property
    def combined_se(self) -> float:
        """Quadrature sum of the four standard errors (exact for fresh mode)."""
        return math.sqrt(
            self.e11.standard_error**2
            + self.e12.standard_error**2
            + self.e21.standard_error**2
            + self.e22.standard_error**2
        )


# ---------------------------------------------------------------------------
# per-trial terms and the statistic


def _quad_tallies(spins: np.ndarray, quad: SettingQuad):
    x1, y1, ta1, tb1 = station_products(spins, quad.a1, quad.b1)
    x2, y2, ta2, tb2 = station_products(spins, quad.a2, quad.b2)
    terms = x1 * (y1 - y2).astype(np.int64) - x2 * (y2 + y1).astype(np.int64)
    return (
        int(np.count_nonzero(x1 == y1)),
        int(np.count_nonzero(x1 == y2)),
        int(np.count_nonzero(x2 == y1)),
        int(np.count_nonzero(x2 == y2)),
        int(np.count_nonzero(ta1 | tb1)),
        int(np.count_nonzero(ta1 | tb2)),
        int(np.count_nonzero(ta2 | tb1)),
        int(np.count_nonzero(ta2 | tb2)),
        int(terms.min()),
        int(terms.max()),
    )


def _quad_range_task(args):
    lo, hi, quad = args
    return _quad_tallies(parallel.worker_db().spins[lo:hi], quad)


def _terms_range_task(args):
    lo, hi, quad = args
    spins = parallel.worker_db().spins[lo:hi]
    x1, y1, _, _ = station_products(spins, quad.a1, quad.b1)
    x2, y2, _, _ = station_products(spins, quad.a2, quad.b2)
    return x1 * (y1 - y2).astype(np.int64) - x2 * (y2 + y1).astype(np.int64)


def per_trial_terms(db: TrialDatabase, quad: SettingQuad, workers: int = 1) -> np.ndarray:
    """The n integer terms x1*(y1 - y2) - x2*(y2 + y1), each +-2.

    Their mean is exactly the reuse-mode statistic: the sum is an
    integer and the statistic performs the same single division by n.
    """
    if workers > 1 and db.n >= _MIN_PARALLEL_TRIALS:
        ranges = parallel.chunk_ranges(db.n, workers)
        with parallel.db_pool(db, workers) as pool:
            blocks = list(pool.map(_terms_range_task, [(lo, hi, quad) for lo, hi in ranges]))
        return np.concatenate(blocks)
    x1, y1, _, _ = station_products(db.spins, quad.a1, quad.b1)
    x2, y2, _, _ = station_products(db.spins, quad.a2, quad.b2)
    return x1 * (y1 - y2).astype(np.int64) - x2 * (y2 + y1).astype(np.int64)


def _reuse_result(db: TrialDatabase, quad: SettingQuad, workers: int) -> ChshResult:
    if workers > 1 and db.n >= _MIN_PARALLEL_TRIALS:
        ranges = parallel.chunk_ranges(db.n, workers)
        with parallel.db_pool(db, workers) as pool:
            partials = list(pool.map(_quad_range_task, [(lo, hi, quad) for lo, hi in ranges]))
        merged = [sum(p[i] for p in partials) for i in range(8)]
        t_min = min(p[8] for p in partials)
        t_max = max(p[9] for p in partials)
    else:
        tallies = _quad_tallies(db.spins, quad)
        merged, t_min, t_max = list(tallies[:8]), tallies[8], tallies[9]

    n = db.n
    pos11, pos12, pos21, pos22, tie11, tie12, tie21, tie22 = merged
    # numerator = T11 - T12 - T22 - T21 with T_ij = 2*pos_ij - n; a single
    # division keeps S exactly equal to the per-trial term mean.
    numerator = 2 * (pos11 - pos12 - pos22 - pos21) + 2 * n
    return ChshResult(
        e11=CorrelationEstimate.from_tallies(n, pos11, tie11),
        e12=CorrelationEstimate.from_tallies(n, pos12, tie12),
        e21=CorrelationEstimate.from_tallies(n, pos21, tie21),
        e22=CorrelationEstimate.from_tallies(n, pos22, tie22),
        statistic=numerator / n,
        mode="reuse",
        n=n,
        per_trial_min=t_min,
        per_trial_max=t_max,
    )


def chsh_statistic(
    db: TrialDatabase,
    quad: SettingQuad,
    mode: str = "reuse",
    stream: CounterStream | None = None,
    workers: int = 1,
) -> ChshResult:
    """Evaluate S for a setting quad, in reuse or fresh mode.

    Reuse mode computes all four correlations on the same database, so
    the per-trial +-2 identity applies and |S| <= 2 holds exactly.
    Fresh mode consumes three seeds from ``stream`` to generate three
    more databases of the same size and distribution, one per remaining
    correlation, and carries no per-trial diagnostics.
    """
    if mode == "reuse":
        return _reuse_result(db, quad, workers)
    if mode != "fresh":
        raise ConfigurationError(f"mode must be 'reuse' or 'fresh', got {mode!r}")
    if stream is None:
        raise ConfigurationError("fresh mode requires a random stream")

    db12 = generate_database(stream.raw(), db.distribution, db.n, workers=workers)
    db21 = generate_database(stream.raw(), db.distribution, db.n, workers=workers)
    db22 = generate_database(stream.raw(), db.distribution, db.n, workers=workers)
    e11 = estimate_correlation(db, quad.a1, quad.b1, workers=workers)
    e12 = estimate_correlation(db12, quad.a1, quad.b2, workers=workers)
    e21 = estimate_correlation(db21, quad.a2, quad.b1, workers=workers)
    e22 = estimate_correlation(db22, quad.a2, quad.b2, workers=workers)
    numerator = (
        (e11.count_pos - e11.count_neg)
        - (e12.count_pos - e12.count_neg)
        - (e22.count_pos - e22.count_neg)
        - (e21.count_pos - e21.count_neg)
    )
    return ChshResult(
        e11=e11, e12=e12, e21=e21, e22=e22,
        statistic=numerator / db.n,
        mode="fresh",
        n=db.n,
    )


# ---------------------------------------------------------------------------
# deterministic strategies


class StrategyEnumeration(NamedTuple):
    max: int
    min: int
    table: tuple[tuple[int, int, int, int, int], ...]


def enumerate_deterministic_strategies() -> StrategyEnumeration:
    """Exhaust all 16 sign assignments of (x1, x2, y1, y2).

    The combination x1*y1 - x1*y2 - x2*y2 - x2*y1 evaluates to +-2 for
    every assignment, which is the entire content of the classical
    bound: no deterministic strategy reaches past 2.
    """
    rows = tuple(
        (x1, x2, y1, y2, x1 * y1 - x1 * y2 - x2 * y2 - x2 * y1)
        for x1, x2, y1, y2 in itertools.product((-1, 1), repeat=4)
    )
    terms = [r[4] for r in rows]
    return StrategyEnumeration(max=max(terms), min=min(terms), table=rows)


def standard_combination(e11: float, e12: float, e21: float, e22: float) -> float:
    """The textbook CHSH form E11 + E12 + E21 - E22, for cross-checks.

    Feeding it the relabeled quad (a2, a1, b2, b1) yields exactly minus
    the combination used in this package, so the two conventions agree
    on the bound and saturate together.
    """
    return e11 + e12 + e21 - e22


# ---------------------------------------------------------------------------
# adversarial settings search


def _eval_candidates(db, quads, mode, base_key, offset, workers):
    """Statistics for a list of candidate quads; fresh candidates derive
    their private stream from (base_key, global candidate index)."""
    tasks = [(q, mode, base_key, offset + i) for i, q in enumerate(quads)]
    if workers > 1 and len(tasks) > 1:
        chunks = parallel.chunk_ranges(len(tasks), 4 * workers)
        with parallel.db_pool(db, workers) as pool:
            results = list(pool.map(_eval_chunk_task, [tasks[lo:hi] for lo, hi in chunks]))
        return [s for chunk in results for s in chunk]
    return _eval_chunk(db, tasks)


def _eval_chunk(db, tasks):
    out = []
    for quad, mode, base_key, index in tasks:
        if mode == "fresh":
            stream = CounterStream(base_key).derive(index)
            res = chsh_statistic(db, quad, "fresh", stream)
        else:
            res = chsh_statistic(db, quad, "reuse")
        out.append(res.statistic)
    return out


def _eval_chunk_task(tasks):
    return _eval_chunk(parallel.worker_db(), tasks)


def _lattice_quads(count_budget: int) -> list[SettingQuad]:
    g = int(count_budget**0.25)
    if g < 2:
        return []
    angles = [2.0 * math.pi * k / g for k in range(g)]
    return [
        SettingQuad.from_plane_angles(t1, t2, t3, t4)
        for t1, t2, t3, t4 in itertools.product(angles, repeat=4)
    ]


def _perturbed_quad(quad: SettingQuad, stream: CounterStream, radius: float) -> SettingQuad:
    dirs = []
    g = sample_uniform_directions(stream, 4)
    for base, step in zip((quad.a1, quad.a2, quad.b1, quad.b2), g):
        dirs.append(
            UnitVector.normalize(
                base.x + radius * step[0],
                base.y + radius * step[1],
                base.z + radius * step[2],
            )
        )
    return SettingQuad(*dirs)


def search_max_chsh(
    db: TrialDatabase,
    mode: str,
    budget: int,
    stream: CounterStream,
    initial: SettingQuad | None = None,
    workers: int = 1,
) -> tuple[ChshResult, SettingQuad]:
    """Derivative-free search for the settings maximizing the statistic.

    The objective is piecewise constant in the settings (moving a
    setting only matters when some trial's sign flips), so the search
    combines a coarse in-plane lattice, uniform random quads over the
    sphere, and random local refinement around the incumbent. Budget
    counts evaluated quads; the first candidate is ``initial``
    (canonical saturating quad by default), so budget 1 just evaluates
    that quad. The best candidate is reduced with an associative max
    keyed on (statistic, quad ordering), making the outcome independent
    of evaluation order and worker count.
    """
    if budget < 1:
        raise ConfigurationError(f"search budget must be >= 1, got {budget}")
    if mode not in ("reuse", "fresh"):
        raise ConfigurationError(f"mode must be 'reuse' or 'fresh', got {mode!r}")

    base_key = stream.key  # fresh-mode candidates derive substreams from here
    candidates = [initial if initial is not None else CANONICAL_QUAD]
    remaining = budget - 1

    lattice = _lattice_quads(remaining // 3) if remaining >= 16 else []
    candidates.extend(lattice)
    remaining -= len(lattice)

    n_random = remaining // 2
    if n_random:
        rows = sample_uniform_directions(stream, 4 * n_random).reshape(n_random, 4, 3)
        for r in rows:
            candidates.append(
                SettingQuad(
                    UnitVector.from_array(r[0]),
                    UnitVector.from_array(r[1]),
                    UnitVector.from_array(r[2]),
                    UnitVector.from_array(r[3]),
                )
            )
        remaining -= n_random

    stats = _eval_candidates(db, candidates, mode, base_key, 0, workers)
    scored = list(zip(stats, candidates))
    best_stat, best_quad = max(scored, key=lambda sq: (sq[0], sq[1].sort_key()))
    best_index = max(range(len(scored)), key=lambda i: (scored[i][0], scored[i][1].sort_key()))

    # local refinement: perturb the incumbent with shrinking radius
    offset = len(candidates)
    round_no = 0
    while remaining > 0:
        size = min(32, remaining)
        radius = 0.4 * (0.8**round_no)
        batch = [_perturbed_quad(best_quad, stream, radius) for _ in range(size)]
        batch_stats = _eval_candidates(db, batch, mode, base_key, offset, workers)
        for i, (s, q) in enumerate(zip(batch_stats, batch)):
            if (s, q.sort_key()) > (best_stat, best_quad.sort_key()):
                best_stat, best_quad, best_index = s, q, offset + i
        offset += size
        remaining -= size
        round_no += 1

    if mode == "fresh":
        best_result = chsh_statistic(
            db, best_quad, "fresh", CounterStream(base_key).derive(best_index), workers=workers
        )
    else:
        best_result = chsh_statistic(db, best_quad, "reuse", workers=workers)
    return best_result, best_quad


# ---------------------------------------------------------------------------
# structured summaries (JSON-shaped)


def _vector_fields(v: UnitVector) -> dict:
    return {"x": v.x, "y": v.y, "z": v.z}


def _estimate_fields(e: CorrelationEstimate) -> dict:
    return {
        "value": e.value,
        "se": e.standard_error,
        "ties": e.tie_count,
        "count_pos": e.count_pos,
        "count_neg": e.count_neg,
    }


def result_summary(
    result: ChshResult,
    quad: SettingQuad,
    seed: int,
    distribution_tag: str,
    budget: int | None = None,
) -> dict:
    """JSON-shaped summary of a CHSH evaluation or settings search."""
    doc = {
        "tool": "bellsim",
        "version": __version__,
        "seed": seed,
        "dist": distribution_tag,
        "mode": result.mode,
        "n": result.n,
        "quad": {
            "a1": _vector_fields(quad.a1),
            "a2": _vector_fields(quad.a2),
            "b1": _vector_fields(quad.b1),
            "b2": _vector_fields(quad.b2),
        },
        "e11": _estimate_fields(result.e11),
        "e12": _estimate_fields(result.e12),
        "e21": _estimate_fields(result.e21),
        "e22": _estimate_fields(result.e22),
        "statistic": result.statistic,
    }
    if result.mode == "reuse":
        doc["per_trial_min"] = result.per_trial_min
        doc["per_trial_max"] = result.per_trial_max
    else:
        doc["combined_se"] = result.combined_se
    if budget is not None:
        doc["budget"] = budget
        excess = max(0.0, result.statistic - 2.0)
        doc["excess_over_2"] = excess
        if excess > 0.0:
            # four independent +-1 means stack like one mean with n/4 samples
            doc["excess_hoeffding_bound"] = hoeffding_bound(max(1, result.n // 4), excess).bound
        else:
            doc["excess_hoeffding_bound"] = None
    return doc
