import json
import subprocess
import sys
from pathlib import Path

import pytest

from mdseval.corpus import load_corpus
from mdseval.humaneval import FacetAnnotation, PairwiseAnnotation

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def demo(tmp_path_factory):
    """Synthetic end-to-end dataset generated by the demo script."""
    out = tmp_path_factory.mktemp("demo")
    subprocess.run(
        [sys.executable, str(REPO_ROOT / "scripts" / "make_demo_data.py"),
         "--out", str(out), "--reviews", "12", "--seed", "3"],
        check=True, capture_output=True,
    )
    return out

REVIEWS = [
    {
        "review_id": "r1",
        "target": "Metformin reduces blood pressure in women with gestational diabetes.",
        "inputs": [
            {"doc_id": "d1", "abstract": "Metformin lowered blood pressure in our trial of pregnant women."},
            {"doc_id": "d2", "abstract": "No effect of metformin on blood pressure was observed."},
        ],
    },
    {
        "review_id": "r2",
        "target": "There is insufficient evidence to support the use of acupuncture for migraine.",
        "inputs": [
            {"doc_id": "d3", "abstract": "Acupuncture reduced migraine frequency compared to sham treatment."},
            {"doc_id": "d4", "abstract": "Acupuncture showed no benefit over placebo for migraine prevention."},
        ],
    },
    {
        "review_id": "r3",
        "target": "Vitamin D supplementation shows a positive effect on bone density.",
        "inputs": [
            {"doc_id": "d5", "abstract": "Vitamin D improved bone density in older adults."},
        ],
    },
]

GENERATED = [
    {"system_id": "sysA", "review_id": "r1", "summary": "Metformin lowers blood pressure in pregnant women."},
    {"system_id": "sysA", "review_id": "r2", "summary": "There is insufficient evidence to support the use of acupuncture."},
    {"system_id": "sysA", "review_id": "r3", "summary": "Vitamin D has a positive effect on bone density."},
    {"system_id": "sysB", "review_id": "r1", "summary": "No effect of metformin was observed on blood pressure."},
    {"system_id": "sysB", "review_id": "r2", "summary": "Acupuncture is an effective treatment for migraine."},
    {"system_id": "sysB", "review_id": "r3", "summary": "Vitamin D supplementation improves bone density."},
]


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj) + "\n")
    return path


@pytest.fixture
def corpus_files(tmp_path):
    reviews = write_jsonl(tmp_path / "reviews.jsonl", REVIEWS)
    generated = write_jsonl(tmp_path / "generated.jsonl", GENERATED)
    return reviews, generated


@pytest.fixture
def corpus(corpus_files):
    return load_corpus(*corpus_files)


FACET_DEFAULTS = dict(
    fluency="2",
    population="2",
    intervention="2",
    outcome="2",
    effect_target="+1",
    effect_generated="+1",
    strength_target="3",
    strength_generated="3",
)


def make_facet(annotation_id="a1", annotator_id="ann1", review_id="r1", system_id="sysA", **overrides):
    fields = dict(FACET_DEFAULTS)
    comment = overrides.pop("comment", None)
    fields.update(overrides)
    return FacetAnnotation(
        annotation_id=annotation_id,
        annotator_id=annotator_id,
        review_id=review_id,
        system_id=system_id,
        comment=comment,
        **fields,
    )


def make_pairwise(annotation_id="p1", annotator_id="ann1", review_id="r1",
                  system_a="sysA", system_b="sysB", preference="A", justification=None):
    return PairwiseAnnotation(
        annotation_id=annotation_id,
        annotator_id=annotator_id,
        review_id=review_id,
        system_a=system_a,
        system_b=system_b,
        preference=preference,
        justification=justification,
    )
