"""Annotation-campaign construction: review/system sampling for facet
annotation and pair sampling for pairwise preference annotation.

Plans are pure functions of (corpus, parameters, seed); sampling uses
numpy's PCG64 generator over sorted id lists, so the same seed always
yields the same plan on any platform. A/B side assignment for pairwise
tasks is decided here, in the plan, so position-bias audits are possible
offline.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, CorpusError


@dataclass(frozen=True)
class FacetTask:
    task_id: str
    annotator: str
    system_id: str
    review_id: str


@dataclass(frozen=True)
class PairwiseTask:
    task_id: str
    annotator: str
    review_id: str
    system_a: str  # shown as "A"
    system_b: str  # shown as "B"


@dataclass
class CampaignPlan:
    seed: int
    overlapping_reviews: list[str]
    per_system_random: dict[str, list[str]]
    facet_tasks: list[FacetTask] = field(default_factory=list)
    pairwise_tasks: list[PairwiseTask] = field(default_factory=list)

    @property
    def tasks(self) -> list[FacetTask | PairwiseTask]:
        return list(self.facet_tasks) + list(self.pairwise_tasks)


def _draw(rng: np.random.Generator, items: Sequence[str], k: int, what: str) -> list[str]:
    if k > len(items):
        raise CorpusError(f"cannot draw {k} {what} from {len(items)} available")
    if k == 0:
        return []
    idx = rng.choice(len(items), size=k, replace=False)
    return [items[i] for i in idx]


def plan_facet_campaign(
    corpus: Corpus,
    systems: Sequence[str],
    n_overlap: int,
    n_random: int,
    annotators: Sequence[str],
    dual_annotation: tuple[int, int] = (0, 0),
    seed: int = 0,
) -> CampaignPlan:
    """Sample the facet-annotation assignment.

    n_overlap reviews are drawn once and assigned for every system; each
    system then draws n_random further reviews from the remainder
    (independently per system, so random sets may collide across systems
    but never with the overlapping set). Tasks get primary annotators
    round-robin; dual_annotation = (reviews from the overlapping set to
    double-annotate across all systems, individual random-set tasks to
    double-annotate) adds second-annotator passes.
    """
    if not systems:
        raise CorpusError("no systems given")
    if not annotators:
        raise CorpusError("no annotators given")
    if len(set(systems)) != len(systems):
        raise CorpusError("duplicate system ids")
    for s in systems:
        if not any(sys_id == s for sys_id, _ in corpus.summaries):
            raise CorpusError(f"system {s!r} has no summaries in the corpus")
    all_reviews = sorted(corpus.reviews)
    if n_overlap + n_random > len(all_reviews):
        raise CorpusError(
            f"need {n_overlap + n_random} reviews, corpus has {len(all_reviews)}"
        )
    rng = np.random.default_rng(seed)
    overlap = _draw(rng, all_reviews, n_overlap, "overlap reviews")
    remainder = [r for r in all_reviews if r not in set(overlap)]
    per_system_random: dict[str, list[str]] = {}
    for system in systems:
        per_system_random[system] = _draw(rng, remainder, n_random, f"random reviews for {system}")

    tasks: list[FacetTask] = []
    counter = 0

    def add(annotator: str, system: str, review: str) -> None:
        nonlocal counter
        tasks.append(FacetTask(
            task_id=f"f{counter:05d}", annotator=annotator, system_id=system, review_id=review,
        ))
        counter += 1

    assignment_idx = 0

    def next_annotator() -> str:
        nonlocal assignment_idx
        a = annotators[assignment_idx % len(annotators)]
        assignment_idx += 1
        return a

    primary: dict[tuple[str, str], str] = {}
    for review in overlap:
        for system in systems:
            a = next_annotator()
            primary[(system, review)] = a
            add(a, system, review)
    random_pairs: list[tuple[str, str]] = []
    for system in systems:
        for review in per_system_random[system]:
            a = next_annotator()
            primary[(system, review)] = a
            random_pairs.append((system, review))
            add(a, system, review)

    n_overlap_dual, n_random_dual = dual_annotation
    if (n_overlap_dual or n_random_dual) and len(annotators) < 2:
        raise CorpusError("dual annotation needs >= 2 annotators")
    dual_reviews = _draw(rng, overlap, n_overlap_dual, "dual-annotation overlap reviews")
    dual_pairs = [(s, r) for r in dual_reviews for s in systems]
    if n_random_dual:
        if n_random_dual > len(random_pairs):
            raise CorpusError(f"cannot double-annotate {n_random_dual} of {len(random_pairs)} random tasks")
        idx = rng.choice(len(random_pairs), size=n_random_dual, replace=False)
        dual_pairs += [random_pairs[i] for i in idx]
    for system, review in dual_pairs:
        first = primary[(system, review)]
        second = annotators[(annotators.index(first) + 1) % len(annotators)]
        add(second, system, review)

    return CampaignPlan(
        seed=seed,
        overlapping_reviews=overlap,
        per_system_random=per_system_random,
        facet_tasks=tasks,
    )


def plan_pairwise_campaign(
    corpus: Corpus,
    systems: Sequence[str],
    plan: CampaignPlan,
    n_per_annotator: int | Mapping[str, int],
    annotators: Sequence[str],
    overlap_fraction: float = 0.5,
    seed: int = 0,
) -> CampaignPlan:
    """Extend a facet plan with pairwise comparison tasks.

    Each annotator receives their quota of distinct (review, pair) triples:
    ceil(overlap_fraction * quota) drawn from the overlapping reviews, the
    rest from other reviews. Different annotators may see the same pair; one
    annotator never sees the same unordered pair twice. Which system lands
    on side A is decided by the seeded generator.
    """
    if not plan.overlapping_reviews:
        raise CorpusError("facet plan has an empty overlapping set")
    if not 0.0 <= overlap_fraction <= 1.0:
        raise CorpusError(f"overlap_fraction {overlap_fraction} outside [0,1]")
    quotas = (
        {a: int(n_per_annotator) for a in annotators}
        if isinstance(n_per_annotator, int)
        else {a: int(n_per_annotator[a]) for a in annotators}
    )

    def eligible(reviews: Sequence[str]) -> list[tuple[str, str, str]]:
        triples = []
        for review in sorted(reviews):
            present = sorted(s for s in systems if (s, review) in corpus.summaries)
            for i, a in enumerate(present):
                for b in present[i + 1 :]:
                    triples.append((review, a, b))
        return triples

    overlap_set = set(plan.overlapping_reviews)
    overlap_pool = eligible(sorted(overlap_set))
    other_pool = eligible([r for r in sorted(corpus.reviews) if r not in overlap_set])

    rng = np.random.default_rng(seed)
    tasks: list[PairwiseTask] = []
    counter = 0
    for annotator in annotators:
        quota = quotas[annotator]
        n_overlap = math.ceil(overlap_fraction * quota)
        n_other = quota - n_overlap
        if n_overlap > len(overlap_pool) or n_other > len(other_pool):
            raise CorpusError(
                f"not enough distinct pairs for {annotator!r}: need {n_overlap}+{n_other}, "
                f"have {len(overlap_pool)}+{len(other_pool)}"
            )
        chosen = [overlap_pool[i] for i in rng.choice(len(overlap_pool), size=n_overlap, replace=False)]
        if n_other:
            chosen += [other_pool[i] for i in rng.choice(len(other_pool), size=n_other, replace=False)]
        for review, first, second in chosen:
            if rng.integers(0, 2) == 1:
                first, second = second, first
            tasks.append(PairwiseTask(
                task_id=f"p{counter:05d}", annotator=annotator, review_id=review,
                system_a=first, system_b=second,
            ))
            counter += 1

    return dataclasses.replace(plan, pairwise_tasks=tasks)


def save_plan(plan: CampaignPlan, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "kind": "meta",
            "seed": plan.seed,
            "overlapping_reviews": plan.overlapping_reviews,
            "per_system_random": plan.per_system_random,
        }, ensure_ascii=False) + "\n")
        for t in plan.facet_tasks:
            fh.write(json.dumps({
                "kind": "facet_task", "task_id": t.task_id, "annotator": t.annotator,
                "system_id": t.system_id, "review_id": t.review_id,
            }, ensure_ascii=False) + "\n")
        for t in plan.pairwise_tasks:
            fh.write(json.dumps({
                "kind": "pairwise_task", "task_id": t.task_id, "annotator": t.annotator,
                "review_id": t.review_id, "system_a": t.system_a, "system_b": t.system_b,
            }, ensure_ascii=False) + "\n")


def load_plan(path: str | Path) -> CampaignPlan:
    plan: CampaignPlan | None = None
    facet_tasks: list[FacetTask] = []
    pairwise_tasks: list[PairwiseTask] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "meta":
                plan = CampaignPlan(
                    seed=obj["seed"],
                    overlapping_reviews=list(obj["overlapping_reviews"]),
                    per_system_random={k: list(v) for k, v in obj["per_system_random"].items()},
                )
            elif kind == "facet_task":
                facet_tasks.append(FacetTask(
                    task_id=obj["task_id"], annotator=obj["annotator"],
                    system_id=obj["system_id"], review_id=obj["review_id"],
                ))
            elif kind == "pairwise_task":
                pairwise_tasks.append(PairwiseTask(
                    task_id=obj["task_id"], annotator=obj["annotator"],
                    review_id=obj["review_id"], system_a=obj["system_a"], system_b=obj["system_b"],
                ))
            else:
                raise CorpusError(f"{path}:{lineno}: unknown plan line kind {kind!r}")
    if plan is None:
        raise CorpusError(f"{path}: missing plan meta line")
    plan.facet_tasks = facet_tasks
    plan.pairwise_tasks = pairwise_tasks
    return plan
