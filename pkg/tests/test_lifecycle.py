"""Whole-protocol walk: plan a campaign, serve it, push every task's
answers through the HTTP API, then feed the exported log into the
agreement, ranking, and bootstrap analyses."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import write_jsonl
from mdseval import ranking, reports
from mdseval.campaign import plan_facet_campaign, plan_pairwise_campaign
from mdseval.corpus import AnnotationLog, load_annotations, load_corpus
from mdseval.humaneval import FacetAnnotation, PairwiseAnnotation
from mdseval.service import AnnotationService, build_app


@pytest.fixture(scope="module")
def big_corpus(tmp_path_factory):
    base = tmp_path_factory.mktemp("lifecycle")
    systems = ["m1", "m2", "m3"]
    reviews = [
        {"review_id": f"r{i:02d}",
         "target": f"target text {i} with several findings reported.",
         "inputs": [{"doc_id": f"r{i:02d}-d0", "abstract": f"abstract {i}."}]}
        for i in range(12)
    ]
    generated = [
        {"system_id": s, "review_id": r["review_id"],
         "summary": f"{s} rendition of review {r['review_id']}."}
        for s in systems for r in reviews
    ]
    write_jsonl(base / "reviews.jsonl", reviews)
    write_jsonl(base / "generated.jsonl", generated)
    return load_corpus(base / "reviews.jsonl", base / "generated.jsonl"), systems


def test_campaign_to_analysis_round_trip(big_corpus, tmp_path):
    corpus, systems = big_corpus
    plan = plan_facet_campaign(corpus, systems, n_overlap=3, n_random=2,
                               annotators=["ann1", "ann2"], dual_annotation=(1, 0), seed=42)
    plan = plan_pairwise_campaign(corpus, systems, plan, n_per_annotator=6,
                                  annotators=["ann1", "ann2"], overlap_fraction=0.5, seed=42)

    log_path = tmp_path / "annotations.jsonl"
    service = AnnotationService(corpus, plan, AnnotationLog(log_path))
    client = TestClient(build_app(service))

    rng = np.random.default_rng(7)
    effects = ("+1", "0", "-1")
    submitted = 0
    for annotator in ("ann1", "ann2"):
        while True:
            task = client.get(f"/tasks/next?annotator={annotator}").json()["task"]
            if task is None:
                break
            if task["kind"] == "facet":
                body = {
                    "annotation_id": f"{annotator}-{task['task_id']}",
                    "annotator_id": annotator,
                    "task_id": task["task_id"],
                    "fluency": str(int(rng.integers(0, 3))),
                    "population": str(int(rng.integers(0, 3))),
                    "intervention": str(int(rng.integers(0, 3))),
                    "outcome": str(int(rng.integers(0, 3))),
                    "effect_target": effects[int(rng.integers(3))],
                    "effect_generated": effects[int(rng.integers(3))],
                    "strength_target": str(int(rng.integers(0, 4))),
                    "strength_generated": str(int(rng.integers(0, 4))),
                }
            else:
                body = {
                    "annotation_id": f"{annotator}-{task['task_id']}",
                    "annotator_id": annotator,
                    "task_id": task["task_id"],
                    "preference": ("A", "B", "Neither")[int(rng.integers(3))],
                }
            assert client.post("/annotations", json=body).status_code == 200
            submitted += 1

    progress = client.get("/progress").json()
    assert progress["done"] == progress["total"] == submitted == len(plan.tasks)

    export_lines = [json.loads(l) for l in client.get("/export").text.splitlines() if l.strip()]
    assert len(export_lines) == submitted
    assert [l["seq"] for l in export_lines] == list(range(1, submitted + 1))

    # exported log feeds the analyses directly
    records = load_annotations(log_path)
    facets = [a for a in records if isinstance(a, FacetAnnotation)]
    pairwise = [a for a in records if isinstance(a, PairwiseAnnotation)]
    assert len(facets) + len(pairwise) == submitted

    agreement = reports.agreement_table(facets)
    dual_items = 1 * len(systems)  # one dual-annotated overlap review x all systems
    assert agreement and all(row[5] == dual_items for row in agreement)

    rankings = reports.all_rankings([], facets, pairwise)
    assert set(rankings["pw_combined"].ordering) == set(systems)
    for facet in reports.FACET_NAMES:
        assert set(rankings[facet].ordering) <= set(systems)

    per_annotator = {}
    for a in pairwise:
        per_annotator.setdefault(a.annotator_id, []).append(a)
    summary = ranking.bootstrap_ranking(per_annotator, n_samples=100, seed=1)
    assert summary.n_samples == 100
    assert -1.0 <= summary.mean_rho <= 1.0
