"""Tokenization, n-gram machinery, the ROUGE family, self-repetition
profiling, and the summary-vs-input copying/synthesis analysis.

All functions here are pure and operate on immutable token sequences, so
they are safe to run data-parallel across reviews and systems.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import re

from . import _porter

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Corpus, EvidenceStatement

_TOKEN_RE = re.compile(r"[a-z0-9]+")

TextKey = tuple[str, str]  # (origin, review_id); origin is a system_id or "target"
TARGET_ORIGIN = "target"


@dataclass(frozen=True)
class TokenSequence:
    """Lowercased tokens plus the text identity they came from."""

    tokens: tuple[str, ...]
    source_key: TextKey | None = None

    def __post_init__(self):
        if any(not t for t in self.tokens):
            raise ValueError("token sequence contains empty tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def ngrams(self, n: int) -> list[tuple[str, ...]]:
        toks = self.tokens
        return [toks[i : i + n] for i in range(len(toks) - n + 1)]

    def ngram_set(self, n: int) -> set[tuple[str, ...]]:
        return set(self.ngrams(n))


def tokenize(text: str, *, stemming: bool = False, source_key: TextKey | None = None) -> TokenSequence:
    """Lowercase and split on non-alphanumeric runs; optional Porter stemming."""
    tokens = _TOKEN_RE.findall(text.lower())
    if stemming:
        tokens = [_porter.stem(t) for t in tokens]
    return TokenSequence(tokens=tuple(tokens), source_key=source_key)


def _tokens(seq: TokenSequence | Sequence[str]) -> tuple[str, ...]:
    if isinstance(seq, TokenSequence):
        return seq.tokens
    return tuple(seq)


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f: float
    variant: str  # "R1", "R2", ..., "RL"


def _f_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(candidate: TokenSequence | Sequence[str], reference: TokenSequence | Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap F-score.

    precision is the clipped matching count over the candidate's n-gram
    count, recall likewise over the reference. Either side having zero
    n-grams yields 0/0/0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand, ref = _tokens(candidate), _tokens(reference)
    c_ngrams = [cand[i : i + n] for i in range(len(cand) - n + 1)]
    r_ngrams = [ref[i : i + n] for i in range(len(ref) - n + 1)]
    if not c_ngrams or not r_ngrams:
        return RougeScore(0.0, 0.0, 0.0, f"R{n}")
    matches = sum((Counter(c_ngrams) & Counter(r_ngrams)).values())
    p = matches / len(c_ngrams)
    r = matches / len(r_ngrams)
    return RougeScore(p, r, _f_score(p, r), f"R{n}")


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row DP
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: TokenSequence | Sequence[str], reference: TokenSequence | Sequence[str]) -> RougeScore:
    """Summary-level longest-common-subsequence F-score (no sentence splitting)."""
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0, "RL")
    lcs = _lcs_length(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    return RougeScore(p, r, _f_score(p, r), "RL")


def avg_rouge_f(r1: RougeScore | float, r2: RougeScore | float, rl: RougeScore | float) -> float:
    """Arithmetic mean of the ROUGE-1/2/L F-scores for one candidate/reference pair."""
    vals = [s.f if isinstance(s, RougeScore) else float(s) for s in (r1, r2, rl)]
    return sum(vals) / 3.0


@dataclass
class NGramProfile:
    """Self-repeating n-grams: for each, the number of distinct summaries containing it."""

    n: int
    counts: dict[tuple[str, ...], int]
    corpus_size: int

    def percent(self, ngram: tuple[str, ...]) -> float:
        return self.counts[ngram] / self.corpus_size

    def most_frequent(self) -> tuple[tuple[str, ...], int] | None:
        if not self.counts:
            return None
        # ties broken lexicographically for deterministic reruns
        return min(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))


def _ngram_sets(summaries: Iterable[TokenSequence | Sequence[str]], n: int) -> list[set[tuple[str, ...]]]:
    return [set(tuple(t[i : i + n]) for i in range(len(t) - n + 1)) for t in (_tokens(s) for s in summaries)]


def self_repetition_rate(summaries: Sequence[TokenSequence | Sequence[str]], n: int) -> float:
    """Fraction of summaries containing at least one n-gram that also occurs
    in at least one other summary of the list."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not summaries:
        raise ValueError("summary list is empty")
    sets = _ngram_sets(summaries, n)
    seen_in: Counter[tuple[str, ...]] = Counter()
    for s in sets:
        seen_in.update(s)
    hits = sum(1 for s in sets if any(seen_in[g] >= 2 for g in s))
    return hits / len(sets)


def ngram_coverage(summaries: Sequence[TokenSequence | Sequence[str]], n: int) -> NGramProfile:
    """Profile of n-grams occurring in >= 2 distinct summaries."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not summaries:
        raise ValueError("summary list is empty")
    sets = _ngram_sets(summaries, n)
    seen_in: Counter[tuple[str, ...]] = Counter()
    for s in sets:
        seen_in.update(s)
    counts = {g: c for g, c in seen_in.items() if c >= 2}
    return NGramProfile(n=n, counts=counts, corpus_size=len(sets))


def train_overlap(profile: NGramProfile, train_targets: Sequence[TokenSequence | Sequence[str]]) -> float | None:
    """Fraction of the profile's self-repeating n-grams found in >= 1 train target.

    Returns None for an empty profile (undefined, not zero).
    """
    if not profile.counts:
        return None
    train_ngrams: set[tuple[str, ...]] = set()
    for s in _ngram_sets(train_targets, profile.n):
        train_ngrams |= s
    found = sum(1 for g in profile.counts if g in train_ngrams)
    return found / len(profile.counts)


def amplification(
    ngram: Sequence[str],
    generated: Sequence[TokenSequence | Sequence[str]],
    train_targets: Sequence[TokenSequence | Sequence[str]],
) -> float:
    """Occurrence rate of `ngram` in generated summaries relative to its rate
    in train targets. Errors when the train rate is zero."""
    g = tuple(ngram)
    n = len(g)
    gen_sets = _ngram_sets(generated, n)
    train_sets = _ngram_sets(train_targets, n)
    if not gen_sets or not train_sets:
        raise ValueError("generated and train target lists must be non-empty")
    train_rate = sum(1 for s in train_sets if g in s) / len(train_sets)
    if train_rate == 0:
        raise ValueError(f"n-gram {' '.join(g)!r} does not occur in any train target")
    gen_rate = sum(1 for s in gen_sets if g in s) / len(gen_sets)
    return gen_rate / train_rate


@dataclass
class CopyingRow:
    review_id: str
    closest_doc_id: str | None = None
    statement_direction: int | None = None
    summary_direction: int | None = None
    synthesis: int | None = None
    input_match: int | None = None
    skipped: bool = False
    reason: str | None = None


@dataclass
class CopyingReport:
    """Per-system synthesis and input-match rates (means of 0/1 indicators)."""

    system_id: str
    synthesis_rate: float | None
    input_match_rate: float | None
    rows: list[CopyingRow] = field(default_factory=list)


def copying_report(
    system_id: str,
    corpus: "Corpus",
    statements: Mapping[str, Sequence["EvidenceStatement"]],
    summary_directions: Mapping[TextKey, int],
    *,
    stemming: bool = False,
) -> CopyingReport:
    """Synthesis and input-match analysis for one system (or for the targets).

    Per review, the closest evidence statement is the input statement with
    the highest ROUGE-1 F against the summary (ties to the lowest doc_id).
    Synthesis asks whether its direction matches the summary's direction;
    input match asks whether the summary is strictly closer to any input
    statement than to the target. With ``system_id == "target"`` the summary
    under test is the target itself and only synthesis is computed.

    Reviews missing a statement or a summary direction are skipped and
    reported in the detail rows.
    """
    is_target = system_id == TARGET_ORIGIN
    rows: list[CopyingRow] = []
    synth: list[int] = []
    match: list[int] = []
    for review_id in sorted(corpus.reviews):
        review = corpus.reviews[review_id]
        if is_target:
            summary_text = review.target
        else:
            gen = corpus.summaries.get((system_id, review_id))
            if gen is None:
                continue
            summary_text = gen.summary
        row = CopyingRow(review_id=review_id)
        review_statements = statements.get(review_id) or []
        if not review_statements:
            row.skipped, row.reason = True, "no input statements"
            rows.append(row)
            continue
        direction = summary_directions.get((system_id, review_id))
        if direction is None:
            row.skipped, row.reason = True, "no summary direction"
            rows.append(row)
            continue
        summary_toks = tokenize(summary_text, stemming=stemming)
        scored = [
            (rouge_n(tokenize(st.statement, stemming=stemming), summary_toks, 1).f, st)
            for st in review_statements
        ]
        best_f = max(f for f, _ in scored)
        # tie-break: smallest doc_id among statements at the max score
        best = min((st for f, st in scored if f == best_f), key=lambda st: st.doc_id)
        row.closest_doc_id = best.doc_id
        row.statement_direction = best.direction
        row.summary_direction = direction
        row.synthesis = int(best.direction == direction)
        synth.append(row.synthesis)
        if not is_target:
            target_f = rouge_n(summary_toks, tokenize(review.target, stemming=stemming), 1).f
            best_input_f = max(
                rouge_n(summary_toks, tokenize(st.statement, stemming=stemming), 1).f
                for st in review_statements
            )
            row.input_match = int(best_input_f > target_f)
            match.append(row.input_match)
        rows.append(row)
    synthesis_rate = sum(synth) / len(synth) if synth else None
    input_match_rate = None if is_target else (sum(match) / len(match) if match else None)
    return CopyingReport(
        system_id=system_id,
        synthesis_rate=synthesis_rate,
        input_match_rate=input_match_rate,
        rows=rows,
    )
