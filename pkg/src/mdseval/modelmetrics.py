"""Metrics computed from sidecar model outputs: evidence-direction divergence,
PIO span overlap, embedding cosine similarity, and token-level greedy-match
F-score. All neural inference happens upstream; these are pure numeric ops."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import EvidenceDistribution, PioSpan, TextEmbedding, TokenEmbeddingMatrix

UNIFORM_TRIPLE = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

PairKey = tuple[str, str]  # (intervention, outcome), normalized


def normalize_pair_key(intervention: str, outcome: str) -> PairKey:
    """Case-fold and whitespace-collapse an intervention/outcome pair."""
    return (" ".join(intervention.split()).casefold(), " ".join(outcome.split()).casefold())


def _check_distribution(p: Sequence[float]) -> tuple[float, float, float]:
    if len(p) != 3:
        raise ValueError(f"expected a probability triple, got {len(p)} components")
    t = tuple(float(x) for x in p)
    if any(x < 0.0 or x > 1.0 for x in t):
        raise ValueError(f"distribution components outside [0,1]: {t}")
    if abs(sum(t) - 1.0) > 1e-6:
        raise ValueError(f"distribution sums to {sum(t)}, not 1")
    return t


def jensen_shannon(p: Sequence[float], q: Sequence[float]) -> float:
    """Jensen-Shannon divergence with base-2 logs; bounded to [0, 1].

    0*log(0) is taken as 0.
    """
    p = _check_distribution(p)
    q = _check_distribution(q)
    total = 0.0
    for pi, qi in zip(p, q):
        mi = 0.5 * (pi + qi)
        if pi > 0.0:
            total += 0.5 * pi * math.log2(pi / mi)
        if qi > 0.0:
            total += 0.5 * qi * math.log2(qi / mi)
    # clamp float dust at the boundaries
    return min(max(total, 0.0), 1.0)


@dataclass
class DeltaEIScore:
    per_pair: dict[PairKey, float]
    total: float


def delta_ei(
    target_pairs: Sequence["EvidenceDistribution"],
    generated_pairs: Sequence["EvidenceDistribution"],
) -> DeltaEIScore:
    """Summed JSD between evidence-direction distributions over the union of
    intervention/outcome pairs.

    Pairs present on only one side are compared against the uniform triple
    rather than skipped, so a summary cannot improve its score by omitting
    outcomes. Duplicate keys within one side signal an upstream aggregation
    bug and are rejected.
    """

    def index(pairs: Sequence["EvidenceDistribution"], side: str) -> dict[PairKey, tuple[float, ...]]:
        out: dict[PairKey, tuple[float, ...]] = {}
        for p in pairs:
            key = normalize_pair_key(p.intervention, p.outcome)
            if key in out:
                raise ValueError(f"duplicate I/O pair on {side} side: {key}")
            out[key] = tuple(p.dist)
        return out

    t = index(target_pairs, "target")
    g = index(generated_pairs, "generated")
    per_pair: dict[PairKey, float] = {}
    for key in sorted(set(t) | set(g)):
        per_pair[key] = jensen_shannon(t.get(key, UNIFORM_TRIPLE), g.get(key, UNIFORM_TRIPLE))
    return DeltaEIScore(per_pair=per_pair, total=float(sum(per_pair.values())))


@dataclass
class PioOverlapScore:
    matched: int
    target_total: int
    score: float


def _is_contiguous_subseq(short: Sequence[str], long: Sequence[str]) -> bool:
    n, m = len(short), len(long)
    if n > m:
        return False
    return any(tuple(long[i : i + n]) == tuple(short) for i in range(m - n + 1))


def spans_match(a: "PioSpan", b: "PioSpan") -> bool:
    """Same label and one token sequence contiguously contained in the other."""
    if a.label != b.label:
        return False
    return _is_contiguous_subseq(a.text, b.text) or _is_contiguous_subseq(b.text, a.text)


def pio_overlap(
    target_spans: Sequence["PioSpan"], generated_spans: Sequence["PioSpan"]
) -> PioOverlapScore | None:
    """Fraction of target PIO spans matched by a generated span.

    Returns None when the target has no spans: the instance is undefined and
    must be excluded from aggregation rather than scored 0.
    """
    if not target_spans:
        return None
    matched = sum(1 for t in target_spans if any(spans_match(t, g) for g in generated_spans))
    return PioOverlapScore(matched=matched, target_total=len(target_spans), score=matched / len(target_spans))


def cosine_metric(target_emb: "TextEmbedding", generated_emb: "TextEmbedding") -> float:
    """Cosine similarity of two summary embeddings under one encoder, in [-1, 1]."""
    if target_emb.encoder_id != generated_emb.encoder_id:
        raise ValueError(
            f"encoder mismatch: {target_emb.encoder_id!r} vs {generated_emb.encoder_id!r}"
        )
    a = np.asarray(target_emb.vector, dtype=float)
    b = np.asarray(generated_emb.vector, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimensionality mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm embedding vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def bertscore_f(candidate: "TokenEmbeddingMatrix", reference: "TokenEmbeddingMatrix") -> float:
    """Greedy-matching token-similarity F-score (no IDF weighting, no
    baseline rescaling; encoder comparability is the caller's concern)."""
    if candidate.encoder_id != reference.encoder_id:
        raise ValueError(
            f"encoder mismatch: {candidate.encoder_id!r} vs {reference.encoder_id!r}"
        )
    c = np.asarray(candidate.vectors, dtype=float)
    r = np.asarray(reference.vectors, dtype=float)
    if c.size == 0 or r.size == 0:
        raise ValueError("empty token embedding matrix")
    if c.shape[1] != r.shape[1]:
        raise ValueError(f"dimensionality mismatch: {c.shape[1]} vs {r.shape[1]}")
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    r = r / np.linalg.norm(r, axis=1, keepdims=True)
    sim = c @ r.T  # candidate tokens x reference tokens
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
