"""System-level aggregation, Borda-count combination, bootstrap ranking
error, correlation coefficients with significance, and ECDFs.

Randomness: every stochastic routine takes an explicit integer seed and
draws from numpy's PCG64 generator; bootstrap sample i uses the substream
seeded by (seed, i), so runs are bit-reproducible and samples could be
evaluated in parallel.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as _sstats

from .humaneval import PairwiseAnnotation, annotator_ranking, tally_pairwise

logger = logging.getLogger(__name__)

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

# exact permutation p-values for Spearman up to this n; t-approximation above
EXACT_SPEARMAN_N = 8


@dataclass
class SystemRanking:
    ordering: dict[str, int]  # system -> competition rank
    source: str
    scores: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CorrelationResult:
    kind: str  # "pearson" | "spearman"
    value: float
    p_value: float | None
    n: int


@dataclass(frozen=True)
class BootstrapSummary:
    n_samples: int
    mean_rho: float
    sd_rho: float
    seed: int
    n_undefined: int = 0


@dataclass
class ScoreSummary:
    means: dict[str, float]
    excluded: dict[str, int]  # per-system count of undefined instances in the subset


ScoreRow = tuple[str, str, float | None]  # (system_id, review_id, value)


def system_scores(rows: Iterable[ScoreRow], subset: set[tuple[str, str]] | None = None) -> ScoreSummary:
    """Per-system mean of instance-level values, restricted to `subset` when
    given. Undefined (None) values are excluded and counted; a system with no
    defined values is dropped with a warning."""
    values: dict[str, list[float]] = {}
    excluded: dict[str, int] = {}
    for system_id, review_id, value in rows:
        if subset is not None and (system_id, review_id) not in subset:
            continue
        if value is None:
            excluded[system_id] = excluded.get(system_id, 0) + 1
            continue
        values.setdefault(system_id, []).append(float(value))
    means = {}
    for system_id in sorted(set(values) | set(excluded)):
        vals = values.get(system_id)
        if not vals:
            logger.warning("system %s has no defined values; excluded from means", system_id)
            continue
        means[system_id] = sum(vals) / len(vals)
    return ScoreSummary(means=means, excluded=excluded)


def competition_ranks(scores: Mapping[str, float], *, higher_better: bool = True) -> dict[str, int]:
    """Competition ranking (1, 2, 2, 4); exact score ties share a rank."""
    if not scores:
        raise ValueError("empty score map")
    sign = -1.0 if higher_better else 1.0
    ordered = sorted(scores.items(), key=lambda kv: (sign * kv[1], kv[0]))
    ranks: dict[str, int] = {}
    for i, (system, score) in enumerate(ordered):
        if i > 0 and score == ordered[i - 1][1]:
            ranks[system] = ranks[ordered[i - 1][0]]
        else:
            ranks[system] = i + 1
    return ranks


def rank_systems(scores: Mapping[str, float], polarity: str = HIGHER_BETTER, source: str = "") -> SystemRanking:
    if polarity not in (HIGHER_BETTER, LOWER_BETTER):
        raise ValueError(f"unknown polarity {polarity!r}")
    ordering = competition_ranks(scores, higher_better=polarity == HIGHER_BETTER)
    return SystemRanking(ordering=ordering, source=source, scores=dict(scores))


def borda_points(ranking: Mapping[str, int]) -> dict[str, int]:
    """Each system earns one point per system ranked strictly below it."""
    return {
        s: sum(1 for other_rank in ranking.values() if other_rank > r)
        for s, r in ranking.items()
    }


def borda_combine(rankings: Sequence[SystemRanking]) -> SystemRanking:
    """Sum per-voter Borda points and rank the totals (competition ties)."""
    if not rankings:
        raise ValueError("no rankings to combine")
    system_set = set(rankings[0].ordering)
    for r in rankings[1:]:
        if set(r.ordering) != system_set:
            raise ValueError("rankings cover different system sets")
    totals: dict[str, float] = {s: 0 for s in system_set}
    for r in rankings:
        for s, pts in borda_points(r.ordering).items():
            totals[s] += pts
    ordering = competition_ranks(totals, higher_better=True)
    return SystemRanking(ordering=ordering, source="pairwise_combined", scores=totals)


def _drop_undefined(x: Sequence[float | None], y: Sequence[float | None]) -> tuple[list[float], list[float]]:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    pairs = [(a, b) for a, b in zip(x, y) if a is not None and b is not None
             and not (isinstance(a, float) and math.isnan(a))
             and not (isinstance(b, float) and math.isnan(b))]
    return [float(a) for a, _ in pairs], [float(b) for _, b in pairs]


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float | None:
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sx * sy)
    return min(max(r, -1.0), 1.0)


def _t_approx_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = abs(r) * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * _sstats.t.sf(t, n - 2))


def pearson(x: Sequence[float | None], y: Sequence[float | None]) -> CorrelationResult | None:
    """Sample Pearson r with a two-sided t-approximated p-value (n-2 df).

    Pairs with an undefined member are dropped first; zero variance on
    either side makes the result undefined (None).
    """
    xs, ys = _drop_undefined(x, y)
    n = len(xs)
    if n < 3:
        raise ValueError(f"need >= 3 defined pairs, got {n}")
    r = _pearson_r(np.asarray(xs), np.asarray(ys))
    if r is None:
        return None
    return CorrelationResult(kind="pearson", value=r, p_value=_t_approx_p(r, n), n=n)


def fractional_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their rank block."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_spearman_p(rx: np.ndarray, ry: np.ndarray, observed: float) -> float:
    n = len(rx)
    perms = np.array(list(itertools.permutations(range(n))))
    permuted = ry[perms]  # (n!, n)
    dx = rx - rx.mean()
    dys = permuted - permuted.mean(axis=1, keepdims=True)
    num = dys @ dx
    den = math.sqrt(float(dx @ dx)) * np.sqrt((dys * dys).sum(axis=1))
    rhos = num / den
    hits = int(np.sum(np.abs(rhos) >= abs(observed) - 1e-12))
    return hits / len(perms)


def spearman(x: Sequence[float | None], y: Sequence[float | None]) -> CorrelationResult | None:
    """Spearman rho: Pearson r over fractional ranks. The p-value is an exact
    permutation test for n <= 8 and the t-approximation otherwise."""
    xs, ys = _drop_undefined(x, y)
    n = len(xs)
    if n < 3:
        raise ValueError(f"need >= 3 defined pairs, got {n}")
    rx = np.asarray(fractional_ranks(xs))
    ry = np.asarray(fractional_ranks(ys))
    rho = _pearson_r(rx, ry)
    if rho is None:
        return None
    if n <= EXACT_SPEARMAN_N:
        p = _exact_spearman_p(rx, ry, rho)
    else:
        p = _t_approx_p(rho, n)
    return CorrelationResult(kind="spearman", value=rho, p_value=p, n=n)


def correlation_matrix(
    columns: Mapping[str, Sequence[float | None]], kind: str = "pearson"
) -> dict[str, dict[str, CorrelationResult | None]]:
    """Symmetric matrix over named, key-aligned columns with pairwise-complete
    deletion; cells with < 3 defined pairs are undefined (None)."""
    fn = {"pearson": pearson, "spearman": spearman}[kind]
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError(f"columns not aligned: lengths {sorted(lengths)}")
    out: dict[str, dict[str, CorrelationResult | None]] = {a: {} for a in names}
    for i, a in enumerate(names):
        out[a][a] = CorrelationResult(kind=kind, value=1.0, p_value=None, n=len(columns[a]))
        for b in names[i + 1 :]:
            xs, ys = _drop_undefined(columns[a], columns[b])
            cell = fn(xs, ys) if len(xs) >= 3 else None
            out[a][b] = cell
            out[b][a] = cell
    return out


def ecdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted unique values paired with the fraction of observations <= each."""
    if not values:
        raise ValueError("empty value list")
    n = len(values)
    ordered = sorted(values)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(ordered):
        if i + 1 < n and ordered[i + 1] == v:
            continue
        out.append((v, (i + 1) / n))
    return out


def _rank_rho(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson r over fractional ranks, without the n >= 3 significance
    precondition (bootstrap compares rank vectors that may have only two
    systems). None when either rank vector is constant."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two aligned vectors of length >= 2")
    return _pearson_r(np.asarray(fractional_ranks(list(x))), np.asarray(fractional_ranks(list(y))))


def _combined_ranking(
    per_annotator: Mapping[str, Sequence[PairwiseAnnotation]], systems: Sequence[str]
) -> SystemRanking:
    rankings = []
    for annotator in sorted(per_annotator):
        points = tally_pairwise(per_annotator[annotator], systems=systems)
        rankings.append(SystemRanking(ordering=annotator_ranking(points), source=annotator,
                                      scores={k: float(v) for k, v in points.items()}))
    return borda_combine(rankings)


def bootstrap_ranking(
    per_annotator: Mapping[str, Sequence[PairwiseAnnotation]],
    n_samples: int,
    seed: int,
) -> BootstrapSummary:
    """Bootstrap estimate of combined-ranking stability.

    Each sample resamples every annotator's preference list with replacement
    (at its original length), recombines via Borda count, and takes the
    Spearman rho of the resampled combined ranking against the initial one.
    Samples whose rho is undefined (a constant rank vector) are excluded and
    counted in n_undefined.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not per_annotator:
        raise ValueError("no annotators")
    systems = sorted(
        {a.system_a for anns in per_annotator.values() for a in anns}
        | {a.system_b for anns in per_annotator.values() for a in anns}
    )
    initial = _combined_ranking(per_annotator, systems)
    initial_vector = [float(initial.ordering[s]) for s in systems]
    annotators = sorted(per_annotator)
    rhos: list[float] = []
    n_undefined = 0
    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        resampled: dict[str, list[PairwiseAnnotation]] = {}
        for annotator in annotators:
            anns = per_annotator[annotator]
            if not anns:
                resampled[annotator] = []
                continue
            idx = rng.integers(0, len(anns), size=len(anns))
            resampled[annotator] = [anns[j] for j in idx]
        combined = _combined_ranking(resampled, systems)
        vector = [float(combined.ordering[s]) for s in systems]
        rho = _rank_rho(initial_vector, vector)
        if rho is None:
            n_undefined += 1
            continue
        rhos.append(rho)
    if not rhos:
        raise ValueError("all bootstrap samples produced undefined correlations")
    arr = np.asarray(rhos)
    return BootstrapSummary(
        n_samples=n_samples,
        mean_rho=float(arr.mean()),
        sd_rho=float(arr.std(ddof=0)),
        seed=seed,
        n_undefined=n_undefined,
    )
