"""Data model, ingestion, validation, and persistence.

All corpus files are line-delimited JSON (one object per line, UTF-8):

  reviews:    {"review_id", "target", "inputs": [{"doc_id", "abstract"}]}
  generated:  {"system_id", "review_id", "summary"}
  pio:        {"origin", "review_id", "spans": [{"label": "P|I|O", "text"}]}
  evidence:   {"origin", "review_id", "pairs": [{"intervention", "outcome",
               "dist": [p_neg, p_none, p_pos]}]}
  statements: {"review_id", "doc_id", "statement", "direction": "-1|0|+1"}
  directions: {"origin", "review_id", "direction": "-1|0|+1"}
  embeddings: {"origin", "review_id", "encoder_id", "vector": [...]} or the
              token-level {"origin", "review_id", "encoder_id",
              "tokens": [...], "vectors": [[...]]}
  metric records: {"system_id", "review_id", "metric", "value"}

Text identity is the pair (origin, review_id) where origin is a system_id
or the literal "target". The corpus and sidecar bundles are immutable once
loaded; the annotation log is append-only with a single-writer contract.
"""

from __future__ import annotations

import enum
import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .humaneval import (
    FacetAnnotation,
    PairwiseAnnotation,
    ValidationError,
    annotation_from_json_dict,
)
from .lexical import TARGET_ORIGIN, TextKey, tokenize

DIST_SUM_TOLERANCE = 1e-3

PIO_LABELS = {"P": "Population", "I": "Intervention", "O": "Outcome"}
DIRECTIONS = {"-1": -1, "0": 0, "+1": 1}


class CorpusError(ValueError):
    """Raised on malformed or inconsistent corpus / sidecar files."""


class Metric(str, enum.Enum):
    ROUGE1_F = "rouge1_f"
    ROUGE2_F = "rouge2_f"
    ROUGEL_F = "rougel_f"
    AVG_ROUGE_F = "avg_rouge_f"
    BERTSCORE_F = "bertscore_f"
    DELTA_EI = "delta_ei"
    NLI = "nli"
    STS = "sts"
    CLAIMVER = "claimver"
    PIO_OVERLAP = "pio_overlap"


# every metric is higher-better except the divergence
LOWER_BETTER_METRICS = {Metric.DELTA_EI}


@dataclass(frozen=True)
class InputDocument:
    doc_id: str
    abstract: str


@dataclass(frozen=True)
class ReviewInstance:
    review_id: str
    target: str
    inputs: tuple[InputDocument, ...]


@dataclass(frozen=True)
class GeneratedSummary:
    system_id: str
    review_id: str
    summary: str


@dataclass(frozen=True)
class PioSpan:
    label: str  # "Population" | "Intervention" | "Outcome"
    text: tuple[str, ...]  # normalized token sequence


@dataclass(frozen=True)
class EvidenceDistribution:
    intervention: str
    outcome: str
    dist: tuple[float, float, float]  # (negative, none, positive)


@dataclass(frozen=True)
class EvidenceStatement:
    doc_id: str
    statement: str
    direction: int  # -1 | 0 | +1


@dataclass(frozen=True)
class TextEmbedding:
    text_key: TextKey
    encoder_id: str
    vector: tuple[float, ...]


@dataclass(frozen=True)
class TokenEmbeddingMatrix:
    text_key: TextKey
    encoder_id: str
    tokens: tuple[str, ...]
    vectors: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class MetricRecord:
    system_id: str
    review_id: str
    metric_id: Metric
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise CorpusError(
                f"non-finite value for {self.metric_id.value} on "
                f"({self.system_id}, {self.review_id})"
            )


@dataclass
class Corpus:
    reviews: dict[str, ReviewInstance]
    summaries: dict[tuple[str, str], GeneratedSummary]

    @property
    def systems(self) -> list[str]:
        return sorted({s for s, _ in self.summaries})

    def text_for(self, key: TextKey) -> str | None:
        origin, review_id = key
        if origin == TARGET_ORIGIN:
            review = self.reviews.get(review_id)
            return review.target if review else None
        summary = self.summaries.get((origin, review_id))
        return summary.summary if summary else None

    def has_key(self, key: TextKey) -> bool:
        return self.text_for(key) is not None


@dataclass
class SidecarBundle:
    """Externally produced model outputs keyed by text identity.

    A key absent from a map is a represented "no sidecar data" state,
    distinct from a present-but-empty list; downstream metrics skip absent
    keys instead of scoring them 0.
    """

    pio_spans: dict[TextKey, list[PioSpan]] = field(default_factory=dict)
    evidence: dict[TextKey, list[EvidenceDistribution]] = field(default_factory=dict)
    statements: dict[str, list[EvidenceStatement]] = field(default_factory=dict)
    summary_directions: dict[TextKey, int] = field(default_factory=dict)
    embeddings: dict[tuple[str, str, str], TextEmbedding] = field(default_factory=dict)
    token_embeddings: dict[tuple[str, str, str], TokenEmbeddingMatrix] = field(default_factory=dict)

    def embedding(self, encoder_id: str, key: TextKey) -> TextEmbedding | None:
        return self.embeddings.get((encoder_id, key[0], key[1]))

    def token_embedding(self, encoder_id: str, key: TextKey) -> TokenEmbeddingMatrix | None:
        return self.token_embeddings.get((encoder_id, key[0], key[1]))


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _require(obj: dict, key: str, where: str) -> object:
    if key not in obj:
        raise CorpusError(f"{where}: missing field {key!r}")
    return obj[key]


def load_corpus(reviews_path: str | Path, generated_path: str | Path) -> Corpus:
    """Load and cross-validate the review corpus and generated summaries."""
    reviews: dict[str, ReviewInstance] = {}
    for lineno, obj in _iter_jsonl(reviews_path):
        where = f"{reviews_path}:{lineno}"
        review_id = str(_require(obj, "review_id", where))
        target = str(_require(obj, "target", where))
        raw_inputs = _require(obj, "inputs", where)
        if review_id in reviews:
            raise CorpusError(f"{where}: duplicate review_id {review_id!r}")
        if not target:
            raise CorpusError(f"{where}: empty target for review {review_id!r}")
        if not isinstance(raw_inputs, list) or not raw_inputs:
            raise CorpusError(f"{where}: review {review_id!r} has no inputs")
        docs = []
        seen_docs = set()
        for d in raw_inputs:
            doc_id = str(_require(d, "doc_id", where))
            abstract = str(_require(d, "abstract", where))
            if doc_id in seen_docs:
                raise CorpusError(f"{where}: duplicate doc_id {doc_id!r} in review {review_id!r}")
            if not abstract:
                raise CorpusError(f"{where}: empty abstract for doc {doc_id!r}")
            seen_docs.add(doc_id)
            docs.append(InputDocument(doc_id=doc_id, abstract=abstract))
        reviews[review_id] = ReviewInstance(review_id=review_id, target=target, inputs=tuple(docs))

    summaries: dict[tuple[str, str], GeneratedSummary] = {}
    for lineno, obj in _iter_jsonl(generated_path):
        where = f"{generated_path}:{lineno}"
        system_id = str(_require(obj, "system_id", where))
        review_id = str(_require(obj, "review_id", where))
        summary = str(_require(obj, "summary", where))
        if system_id == TARGET_ORIGIN:
            raise CorpusError(f"{where}: system_id {TARGET_ORIGIN!r} is reserved")
        key = (system_id, review_id)
        if key in summaries:
            raise CorpusError(f"{where}: duplicate (system_id, review_id) {key!r}")
        if review_id not in reviews:
            raise CorpusError(f"{where}: summary references unknown review {review_id!r}")
        summaries[key] = GeneratedSummary(system_id=system_id, review_id=review_id, summary=summary)
    return Corpus(reviews=reviews, summaries=summaries)


def save_corpus(corpus: Corpus, reviews_path: str | Path, generated_path: str | Path) -> None:
    """Field-for-field inverse of load_corpus."""
    with open(reviews_path, "w", encoding="utf-8") as fh:
        for review_id in corpus.reviews:
            r = corpus.reviews[review_id]
            fh.write(json.dumps({
                "review_id": r.review_id,
                "target": r.target,
                "inputs": [{"doc_id": d.doc_id, "abstract": d.abstract} for d in r.inputs],
            }, ensure_ascii=False) + "\n")
    with open(generated_path, "w", encoding="utf-8") as fh:
        for key in corpus.summaries:
            s = corpus.summaries[key]
            fh.write(json.dumps({
                "system_id": s.system_id,
                "review_id": s.review_id,
                "summary": s.summary,
            }, ensure_ascii=False) + "\n")


def _text_key(obj: dict, corpus: Corpus, where: str) -> TextKey:
    origin = str(_require(obj, "origin", where))
    review_id = str(_require(obj, "review_id", where))
    key = (origin, review_id)
    if not corpus.has_key(key):
        raise CorpusError(f"{where}: key {key!r} does not resolve to a corpus text")
    return key


def _parse_direction(raw: object, where: str) -> int:
    if str(raw) not in DIRECTIONS:
        raise CorpusError(f"{where}: direction {raw!r} not one of -1|0|+1")
    return DIRECTIONS[str(raw)]


def _parse_distribution(raw: object, where: str) -> tuple[float, float, float]:
    if not isinstance(raw, list) or len(raw) != 3:
        raise CorpusError(f"{where}: dist must be a triple")
    try:
        p = [float(x) for x in raw]
    except (TypeError, ValueError):
        raise CorpusError(f"{where}: non-numeric dist {raw!r}") from None
    if any(x < 0.0 or x > 1.0 + DIST_SUM_TOLERANCE for x in p):
        raise CorpusError(f"{where}: dist components outside [0,1]: {p}")
    total = sum(p)
    if abs(total - 1.0) > DIST_SUM_TOLERANCE:
        raise CorpusError(f"{where}: dist sums to {total}, outside 1 +/- {DIST_SUM_TOLERANCE}")
    if total != 1.0:
        p = [x / total for x in p]
    return (p[0], p[1], p[2])


def load_sidecars(
    corpus: Corpus,
    *,
    pio_path: str | Path | None = None,
    evidence_path: str | Path | None = None,
    statements_path: str | Path | None = None,
    directions_path: str | Path | None = None,
    embedding_paths: Sequence[str | Path] = (),
    token_embedding_paths: Sequence[str | Path] = (),
) -> SidecarBundle:
    """Load whichever sidecar files are given; every key must resolve against
    the corpus. Distributions off by <= 1e-3 are renormalized, larger
    deviations rejected. Embedding dimensionality must be uniform per
    encoder."""
    bundle = SidecarBundle()

    if pio_path is not None:
        for lineno, obj in _iter_jsonl(pio_path):
            where = f"{pio_path}:{lineno}"
            key = _text_key(obj, corpus, where)
            if key in bundle.pio_spans:
                raise CorpusError(f"{where}: duplicate pio entry for {key!r}")
            spans = []
            for raw in _require(obj, "spans", where):
                label = str(_require(raw, "label", where))
                if label not in PIO_LABELS:
                    raise CorpusError(f"{where}: span label {label!r} not one of P|I|O")
                text = tokenize(str(_require(raw, "text", where))).tokens
                if not text:
                    raise CorpusError(f"{where}: empty span text")
                spans.append(PioSpan(label=PIO_LABELS[label], text=text))
            bundle.pio_spans[key] = spans

    if evidence_path is not None:
        for lineno, obj in _iter_jsonl(evidence_path):
            where = f"{evidence_path}:{lineno}"
            key = _text_key(obj, corpus, where)
            if key in bundle.evidence:
                raise CorpusError(f"{where}: duplicate evidence entry for {key!r}")
            pairs = []
            for raw in _require(obj, "pairs", where):
                pairs.append(EvidenceDistribution(
                    intervention=str(_require(raw, "intervention", where)),
                    outcome=str(_require(raw, "outcome", where)),
                    dist=_parse_distribution(_require(raw, "dist", where), where),
                ))
            bundle.evidence[key] = pairs

    if statements_path is not None:
        for lineno, obj in _iter_jsonl(statements_path):
            where = f"{statements_path}:{lineno}"
            review_id = str(_require(obj, "review_id", where))
            doc_id = str(_require(obj, "doc_id", where))
            review = corpus.reviews.get(review_id)
            if review is None:
                raise CorpusError(f"{where}: unknown review {review_id!r}")
            if doc_id not in {d.doc_id for d in review.inputs}:
                raise CorpusError(f"{where}: doc {doc_id!r} not an input of review {review_id!r}")
            statement = str(_require(obj, "statement", where))
            if not statement:
                raise CorpusError(f"{where}: empty statement")
            if any(s.doc_id == doc_id for s in bundle.statements.get(review_id, [])):
                raise CorpusError(f"{where}: duplicate statement for ({review_id!r}, {doc_id!r})")
            bundle.statements.setdefault(review_id, []).append(EvidenceStatement(
                doc_id=doc_id,
                statement=statement,
                direction=_parse_direction(_require(obj, "direction", where), where),
            ))

    if directions_path is not None:
        for lineno, obj in _iter_jsonl(directions_path):
            where = f"{directions_path}:{lineno}"
            key = _text_key(obj, corpus, where)
            if key in bundle.summary_directions:
                raise CorpusError(f"{where}: duplicate direction for {key!r}")
            bundle.summary_directions[key] = _parse_direction(_require(obj, "direction", where), where)

    encoder_dims: dict[str, int] = {}

    def check_dim(encoder_id: str, dim: int, where: str) -> None:
        known = encoder_dims.setdefault(encoder_id, dim)
        if known != dim:
            raise CorpusError(
                f"{where}: encoder {encoder_id!r} dimensionality {dim} != {known}"
            )

    for path in embedding_paths:
        for lineno, obj in _iter_jsonl(path):
            where = f"{path}:{lineno}"
            key = _text_key(obj, corpus, where)
            encoder_id = str(_require(obj, "encoder_id", where))
            vector = tuple(float(x) for x in _require(obj, "vector", where))
            if not vector or not any(vector):
                raise CorpusError(f"{where}: embedding vector is empty or zero")
            check_dim(encoder_id, len(vector), where)
            store_key = (encoder_id, key[0], key[1])
            if store_key in bundle.embeddings:
                raise CorpusError(f"{where}: duplicate embedding for {store_key!r}")
            bundle.embeddings[store_key] = TextEmbedding(text_key=key, encoder_id=encoder_id, vector=vector)

    for path in token_embedding_paths:
        for lineno, obj in _iter_jsonl(path):
            where = f"{path}:{lineno}"
            key = _text_key(obj, corpus, where)
            encoder_id = str(_require(obj, "encoder_id", where))
            tokens = tuple(str(t) for t in _require(obj, "tokens", where))
            vectors = tuple(tuple(float(x) for x in row) for row in _require(obj, "vectors", where))
            if not tokens or len(tokens) != len(vectors):
                raise CorpusError(f"{where}: need equal non-zero token and vector counts")
            dims = {len(row) for row in vectors}
            if len(dims) != 1:
                raise CorpusError(f"{where}: ragged token vectors {sorted(dims)}")
            if any(not any(row) for row in vectors):
                raise CorpusError(f"{where}: zero token vector")
            check_dim(encoder_id, dims.pop(), where)
            store_key = (encoder_id, key[0], key[1])
            if store_key in bundle.token_embeddings:
                raise CorpusError(f"{where}: duplicate token embeddings for {store_key!r}")
            bundle.token_embeddings[store_key] = TokenEmbeddingMatrix(
                text_key=key, encoder_id=encoder_id, tokens=tokens, vectors=vectors
            )

    return bundle


def load_metric_records(path: str | Path, corpus: Corpus) -> list[MetricRecord]:
    """Ingest precomputed instance-level metric values."""
    records: list[MetricRecord] = []
    seen: set[tuple[str, str, Metric]] = set()
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        system_id = str(_require(obj, "system_id", where))
        review_id = str(_require(obj, "review_id", where))
        raw_metric = str(_require(obj, "metric", where))
        try:
            metric = Metric(raw_metric)
        except ValueError:
            raise CorpusError(f"{where}: unknown metric {raw_metric!r}") from None
        if (system_id, review_id) not in corpus.summaries:
            raise CorpusError(f"{where}: ({system_id!r}, {review_id!r}) not in corpus")
        dedup = (system_id, review_id, metric)
        if dedup in seen:
            raise CorpusError(f"{where}: duplicate record for {dedup!r}")
        seen.add(dedup)
        try:
            value = float(_require(obj, "value", where))
        except (TypeError, ValueError):
            raise CorpusError(f"{where}: non-numeric value") from None
        if not math.isfinite(value):
            raise CorpusError(f"{where}: non-finite value")
        records.append(MetricRecord(system_id=system_id, review_id=review_id,
                                    metric_id=metric, value=value))
    return records


@dataclass(frozen=True)
class Ack:
    annotation_id: str
    seq: int
    duplicate: bool = False


@dataclass(frozen=True)
class LogEntry:
    seq: int
    record: FacetAnnotation | PairwiseAnnotation
    task_id: str | None = None


class AnnotationLog:
    """Append-only, durable annotation store backed by a JSONL file.

    Single-writer (appends are serialized by a lock), many concurrent
    readers. Re-appending an annotation_id already in the log is a no-op
    that returns the original acknowledgment; the same id with different
    content is rejected.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: list[LogEntry] = []
        self._by_id: dict[str, tuple[Ack, dict]] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        for lineno, obj in _iter_jsonl(self.path):
            seq = obj.get("seq")
            if seq != len(self._entries) + 1:
                raise CorpusError(f"{self.path}:{lineno}: non-monotone seq {seq!r}")
            task_id = obj.get("task_id")
            payload = {k: v for k, v in obj.items() if k not in ("seq", "task_id")}
            record = annotation_from_json_dict(payload)
            entry = LogEntry(seq=seq, record=record, task_id=task_id)
            self._entries.append(entry)
            self._by_id[record.annotation_id] = (Ack(record.annotation_id, seq, duplicate=True), payload)

    def append(self, record: FacetAnnotation | PairwiseAnnotation, task_id: str | None = None) -> Ack:
        payload = record.to_json_dict()
        with self._lock:
            existing = self._by_id.get(record.annotation_id)
            if existing is not None:
                ack, old_payload = existing
                if old_payload != payload:
                    raise ValidationError(
                        f"annotation_id {record.annotation_id!r} re-used with different content"
                    )
                return Ack(ack.annotation_id, ack.seq, duplicate=True)
            seq = len(self._entries) + 1
            line = dict(payload)
            line["seq"] = seq
            if task_id is not None:
                line["task_id"] = task_id
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            entry = LogEntry(seq=seq, record=record, task_id=task_id)
            self._entries.append(entry)
            ack = Ack(record.annotation_id, seq)
            self._by_id[record.annotation_id] = (Ack(ack.annotation_id, ack.seq, duplicate=True), payload)
            return ack

    def existing_ack(self, record: FacetAnnotation | PairwiseAnnotation) -> Ack | None:
        """Acknowledgment for a record already in the log, without writing.

        Returns None when the annotation_id is unknown; raises when the id
        exists with different content.
        """
        payload = record.to_json_dict()
        with self._lock:
            existing = self._by_id.get(record.annotation_id)
        if existing is None:
            return None
        ack, old_payload = existing
        if old_payload != payload:
            raise ValidationError(
                f"annotation_id {record.annotation_id!r} re-used with different content"
            )
        return ack

    @property
    def entries(self) -> list[LogEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def export_text(self) -> str:
        if not self.path.exists():
            return ""
        return self.path.read_text(encoding="utf-8")


def append_annotation(
    store: AnnotationLog,
    record: FacetAnnotation | PairwiseAnnotation,
    task_id: str | None = None,
) -> Ack:
    """Durably append one validated annotation; idempotent on annotation_id."""
    return store.append(record, task_id=task_id)


def load_annotations(path: str | Path) -> list[FacetAnnotation | PairwiseAnnotation]:
    """Read an annotation log / export file back into typed records."""
    records = []
    for lineno, obj in _iter_jsonl(path):
        payload = {k: v for k, v in obj.items() if k not in ("seq", "task_id")}
        try:
            records.append(annotation_from_json_dict(payload))
        except ValidationError as e:
            raise CorpusError(f"{path}:{lineno}: {e}") from None
    return records
