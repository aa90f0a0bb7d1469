"""Facet annotation schema (8 questions), normalization to the four
agreement scores, inter-annotator agreement, and pairwise preference
tallying.

The verbatim question wording and answer options live here as the single
source of truth: the annotation service serves these strings and the web
client renders them without keeping its own copies.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

NA = "NA"
OTHER = "Other"

FLUENCY_CODES = ("0", "1", "2")
PIO_CODES = ("0", "1", "2", NA, OTHER)
EFFECT_CODES = ("+1", "0", "-1", NA, OTHER)
STRENGTH_CODES = ("3", "2", "1", "0", NA, OTHER)

# field name -> (question id, valid answer codes)
FACET_FIELDS: dict[str, tuple[str, tuple[str, ...]]] = {
    "fluency": ("q1", FLUENCY_CODES),
    "population": ("q2", PIO_CODES),
    "intervention": ("q3", PIO_CODES),
    "outcome": ("q4", PIO_CODES),
    "effect_target": ("q5", EFFECT_CODES),
    "effect_generated": ("q6", EFFECT_CODES),
    "strength_target": ("q7", STRENGTH_CODES),
    "strength_generated": ("q8", STRENGTH_CODES),
}

FACET_QUESTIONS: list[dict] = [
    {
        "id": "q1",
        "field": "fluency",
        "text": "Is the generated summary fluent?",
        "options": [
            {"code": "2", "label": "Yes--there are no errors that impact comprehension of the summary"},
            {"code": "1", "label": "Somewhat, there are some minor grammatical or lexical errors, but I can mostly understand"},
            {"code": "0", "label": "No, there are major grammatical or lexical errors that impact comprehension"},
        ],
    },
    {
        "id": "q2",
        "field": "population",
        "text": "Is the *population* discussed in the generated summary the same as the population discussed in the target summary?",
        "options": [
            {"code": "2", "label": "Yes"},
            {"code": "1", "label": "Partially"},
            {"code": "0", "label": "No"},
            {"code": NA, "label": "No population in generated summary"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q3",
        "field": "intervention",
        "text": "Is the *intervention* discussed in the generated summary the same as the intervention discussed in the target summary?",
        "options": [
            {"code": "2", "label": "Yes"},
            {"code": "1", "label": "Partially"},
            {"code": "0", "label": "No"},
            {"code": NA, "label": "No intervention in generated summary"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q4",
        "field": "outcome",
        "text": "Is the *outcome* discussed in the generated summary the same as the outcome discussed in the target summary?",
        "options": [
            {"code": "2", "label": "Yes"},
            {"code": "1", "label": "Partially"},
            {"code": "0", "label": "No"},
            {"code": NA, "label": "No outcome in generated summary"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q5",
        "field": "effect_target",
        "text": "What is the effect direction in the *target* summary for the main intervention and outcome considered?",
        "options": [
            {"code": "+1", "label": "Positive effect"},
            {"code": "0", "label": "No effect"},
            {"code": "-1", "label": "Negative effect"},
            {"code": NA, "label": "no effect direction is specified in the target summary"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q6",
        "field": "effect_generated",
        "text": "What is the effect direction in the *generated* summary for the main intervention and outcome considered?",
        "options": [
            {"code": "+1", "label": "Positive effect"},
            {"code": "0", "label": "No effect"},
            {"code": "-1", "label": "Negative effect"},
            {"code": NA, "label": "no effect direction is specified in the generated summary"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q7",
        "field": "strength_target",
        "text": "What is the strength of the claim made in the *target* summary?",
        "options": [
            {"code": "3", "label": "Strong claim"},
            {"code": "2", "label": "Moderate claim"},
            {"code": "1", "label": "Weak claim"},
            {"code": "0", "label": "Not enough evidence (there is insufficient evidence to draw a conclusion)"},
            {"code": NA, "label": "No claim (there is no claim in the summary)"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
    {
        "id": "q8",
        "field": "strength_generated",
        "text": "What is the strength of the claim made in the *generated* summary?",
        "options": [
            {"code": "3", "label": "Strong claim"},
            {"code": "2", "label": "Moderate claim"},
            {"code": "1", "label": "Weak claim"},
            {"code": "0", "label": "Not enough evidence (there is insufficient evidence to draw a conclusion)"},
            {"code": NA, "label": "No claim (there is no claim in the summary)"},
            {"code": OTHER, "label": "Comment"},
        ],
    },
]

PAIRWISE_QUESTION = {
    "text": "Which of A or B more accurately reflects the content of the target summary?",
    "options": ["A", "B", "Neither"],
}

PAIRWISE_PREFERENCES = ("A", "B", "Neither")


class ValidationError(ValueError):
    """An annotation record violates its schema."""


@dataclass(frozen=True)
class FacetAnnotation:
    annotation_id: str
    annotator_id: str
    review_id: str
    system_id: str
    fluency: str
    population: str
    intervention: str
    outcome: str
    effect_target: str
    effect_generated: str
    strength_target: str
    strength_generated: str
    comment: str | None = None

    def __post_init__(self):
        for name in ("annotation_id", "annotator_id", "review_id", "system_id"):
            if not getattr(self, name):
                raise ValidationError(f"facet annotation missing {name}")
        for name, (_, codes) in FACET_FIELDS.items():
            value = getattr(self, name)
            if value not in codes:
                raise ValidationError(
                    f"facet answer {name}={value!r} not in {list(codes)}"
                )
        if self.has_other and not (self.comment or "").strip():
            raise ValidationError("answer 'Other' requires a non-empty comment")

    @property
    def has_other(self) -> bool:
        return any(getattr(self, name) == OTHER for name in FACET_FIELDS)

    def to_json_dict(self) -> dict:
        d = {"kind": "facet"}
        for name in ("annotation_id", "annotator_id", "review_id", "system_id"):
            d[name] = getattr(self, name)
        for name in FACET_FIELDS:
            d[name] = getattr(self, name)
        if self.comment is not None:
            d["comment"] = self.comment
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "FacetAnnotation":
        try:
            return cls(
                annotation_id=d["annotation_id"],
                annotator_id=d["annotator_id"],
                review_id=d["review_id"],
                system_id=d["system_id"],
                fluency=str(d["fluency"]),
                population=str(d["population"]),
                intervention=str(d["intervention"]),
                outcome=str(d["outcome"]),
                effect_target=str(d["effect_target"]),
                effect_generated=str(d["effect_generated"]),
                strength_target=str(d["strength_target"]),
                strength_generated=str(d["strength_generated"]),
                comment=d.get("comment"),
            )
        except KeyError as e:
            raise ValidationError(f"facet annotation missing field {e.args[0]!r}") from None


@dataclass(frozen=True)
class PairwiseAnnotation:
    annotation_id: str
    annotator_id: str
    review_id: str
    system_a: str
    system_b: str
    preference: str  # "A" | "B" | "Neither"
    justification: str | None = None

    def __post_init__(self):
        for name in ("annotation_id", "annotator_id", "review_id", "system_a", "system_b"):
            if not getattr(self, name):
                raise ValidationError(f"pairwise annotation missing {name}")
        if self.system_a == self.system_b:
            raise ValidationError(f"pairwise annotation compares {self.system_a!r} to itself")
        if self.preference not in PAIRWISE_PREFERENCES:
            raise ValidationError(
                f"preference {self.preference!r} not in {list(PAIRWISE_PREFERENCES)}"
            )

    def to_json_dict(self) -> dict:
        d = {
            "kind": "pairwise",
            "annotation_id": self.annotation_id,
            "annotator_id": self.annotator_id,
            "review_id": self.review_id,
            "system_a": self.system_a,
            "system_b": self.system_b,
            "preference": self.preference,
        }
        if self.justification is not None:
            d["justification"] = self.justification
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "PairwiseAnnotation":
        try:
            return cls(
                annotation_id=d["annotation_id"],
                annotator_id=d["annotator_id"],
                review_id=d["review_id"],
                system_a=d["system_a"],
                system_b=d["system_b"],
                preference=d["preference"],
                justification=d.get("justification"),
            )
        except KeyError as e:
            raise ValidationError(f"pairwise annotation missing field {e.args[0]!r}") from None


def annotation_from_json_dict(d: Mapping) -> FacetAnnotation | PairwiseAnnotation:
    kind = d.get("kind")
    if kind == "facet":
        return FacetAnnotation.from_json_dict(d)
    if kind == "pairwise":
        return PairwiseAnnotation.from_json_dict(d)
    raise ValidationError(f"unknown annotation kind {kind!r}")


@dataclass(frozen=True)
class FacetScores:
    """The four agreement scores; None marks an undefined (excluded) score."""

    fluency: float
    pio: float | None
    direction: float | None
    strength: float | None


_ORDINAL_3 = {"0": 0.0, "1": 0.5, "2": 1.0}


def normalize_facets(a: FacetAnnotation) -> FacetScores:
    """Map one facet annotation to the four [0, 1] agreement scores.

    P/I/O answers of NA earn no agreement credit (0); an Other answer makes
    the affected score undefined. Direction is binary agreement between the
    two effect answers and undefined when either is NA; Strength is
    1 - |difference|/3 over the 4-point claim scale, undefined when either
    side has no claim.
    """
    fluency = _ORDINAL_3[a.fluency]

    pio: float | None
    pio_parts = []
    for name in ("population", "intervention", "outcome"):
        v = getattr(a, name)
        if v == OTHER:
            pio_parts = None
            break
        pio_parts.append(0.0 if v == NA else _ORDINAL_3[v])
    pio = None if pio_parts is None else sum(pio_parts) / 3.0

    direction: float | None
    et, eg = a.effect_target, a.effect_generated
    if et in (NA, OTHER) or eg in (NA, OTHER):
        direction = None
    else:
        direction = 1.0 if et == eg else 0.0

    strength: float | None
    st, sg = a.strength_target, a.strength_generated
    if st in (NA, OTHER) or sg in (NA, OTHER):
        strength = None
    else:
        strength = 1.0 - abs(int(st) - int(sg)) / 3.0

    return FacetScores(fluency=fluency, pio=pio, direction=direction, strength=strength)


@dataclass(frozen=True)
class AgreementResult:
    question_id: str
    kappa: float | None  # None when chance agreement is 1 (degenerate marginals)
    proportion: float
    n_items: int


def cohen_kappa(
    labels_a: Sequence[str], labels_b: Sequence[str], question_id: str = ""
) -> AgreementResult:
    """Cohen's kappa with chance agreement from the marginal label frequencies."""
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label lists differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("empty label lists")
    p_o = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / n
    freq_a = Counter(labels_a)
    freq_b = Counter(labels_b)
    p_e = sum(freq_a[lbl] * freq_b.get(lbl, 0) for lbl in freq_a) / (n * n)
    if p_e == 1.0:
        return AgreementResult(question_id=question_id, kappa=None, proportion=p_o, n_items=n)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementResult(question_id=question_id, kappa=kappa, proportion=p_o, n_items=n)


def paired_facet_labels(
    annotations: Sequence[FacetAnnotation],
) -> dict[str, tuple[list[str], list[str]]]:
    """Align dual-annotated (system, review) items into per-question label
    pairs, ordered by annotator id. Items without exactly two annotators are
    ignored."""
    by_item: dict[tuple[str, str], dict[str, FacetAnnotation]] = {}
    for a in annotations:
        by_item.setdefault((a.system_id, a.review_id), {})[a.annotator_id] = a
    pairs: dict[str, tuple[list[str], list[str]]] = {name: ([], []) for name in FACET_FIELDS}
    for item in sorted(by_item):
        annotators = by_item[item]
        if len(annotators) != 2:
            continue
        first, second = sorted(annotators)
        for name in FACET_FIELDS:
            pairs[name][0].append(getattr(annotators[first], name))
            pairs[name][1].append(getattr(annotators[second], name))
    return pairs


def facet_agreement(annotations: Sequence[FacetAnnotation]) -> list[AgreementResult]:
    """Per-question kappa and agreement proportion over dual-annotated items.

    NA and Other count as label classes of their own.
    """
    pairs = paired_facet_labels(annotations)
    results = []
    for name, (qid, _) in FACET_FIELDS.items():
        a, b = pairs[name]
        if not a:
            continue
        r = cohen_kappa(a, b, question_id=qid)
        results.append(r)
    return results


def tally_pairwise(
    annotations: Sequence[PairwiseAnnotation],
    systems: Sequence[str] | None = None,
) -> dict[str, int]:
    """Point totals for one annotator: 1 point to the preferred side, none on
    Neither. Systems that never appear (or appear only in Neither judgments)
    finish with 0."""
    annotator_ids = {a.annotator_id for a in annotations}
    if len(annotator_ids) > 1:
        raise ValueError(f"annotations span multiple annotators: {sorted(annotator_ids)}")
    points: dict[str, int] = {s: 0 for s in (systems or [])}
    for a in annotations:
        points.setdefault(a.system_a, 0)
        points.setdefault(a.system_b, 0)
        if a.preference == "A":
            points[a.system_a] += 1
        elif a.preference == "B":
            points[a.system_b] += 1
    return points


def annotator_ranking(points: Mapping[str, float]) -> dict[str, int]:
    """Competition ranking (1, 2, 2, 4) by descending points."""
    if not points:
        raise ValueError("empty point map")
    ordered = sorted(points.items(), key=lambda kv: (-kv[1], kv[0]))
    ranks: dict[str, int] = {}
    for i, (system, score) in enumerate(ordered):
        if i > 0 and score == ordered[i - 1][1]:
            ranks[system] = ranks[ordered[i - 1][0]]
        else:
            ranks[system] = i + 1
    return ranks
