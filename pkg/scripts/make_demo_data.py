#!/usr/bin/env python3
"""Generate a self-contained synthetic dataset (corpus, sidecars, campaign
plan, simulated annotations, run config) so the full pipeline can be
exercised end to end without any external data.

Usage: python scripts/make_demo_data.py --out demo_data [--reviews 24] [--seed 13]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from mdseval.campaign import plan_facet_campaign, plan_pairwise_campaign, save_plan
from mdseval.corpus import AnnotationLog, load_corpus
from mdseval.humaneval import FACET_FIELDS, FacetAnnotation, PairwiseAnnotation

WORDS = (
    "patients treatment placebo trial outcome evidence intervention therapy dose "
    "blood pressure glucose insulin metformin aspirin exercise diet surgery pain "
    "mortality risk reduction improvement symptoms chronic acute randomised controlled"
).split()

BOILERPLATE = {
    0: "there is insufficient evidence to support the use",
    1: "further research is needed to assess the effect",
    2: "there is insufficient evidence to support the use",
    3: "more high quality trials are required to determine",
    4: "the included studies were of low methodological quality",
    5: "there is insufficient evidence to draw any conclusion",
}

EFFECTS = ("-1", "0", "+1")
STRENGTHS = ("3", "2", "1", "0")


def sentence(rng, n):
    return " ".join(rng.choice(WORDS, size=n))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--reviews", type=int, default=24)
    parser.add_argument("--systems", type=int, default=4)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    systems = [f"sys{i}" for i in range(args.systems)]
    review_ids = [f"r{i:03d}" for i in range(args.reviews)]

    reviews = []
    for rid in review_ids:
        inputs = [
            {"doc_id": f"{rid}-d{j}", "abstract": sentence(rng, 14) + "."}
            for j in range(int(rng.integers(2, 5)))
        ]
        reviews.append({"review_id": rid, "target": sentence(rng, 12) + ".", "inputs": inputs})
    write_jsonl(out / "reviews.jsonl", reviews)

    generated = []
    for s_idx, system in enumerate(systems):
        boiler = BOILERPLATE[s_idx % len(BOILERPLATE)]
        for review in reviews:
            toks = review["target"].rstrip(".").split()
            keep = max(3, len(toks) - int(rng.integers(0, 5)))
            body = " ".join(toks[:keep])
            if rng.random() < 0.7:  # inject self-repeating boilerplate
                body = f"{boiler} {body}"
            generated.append({"system_id": system, "review_id": review["review_id"],
                              "summary": body + "."})
    write_jsonl(out / "generated.jsonl", generated)

    corpus = load_corpus(out / "reviews.jsonl", out / "generated.jsonl")
    origins = [("target", rid) for rid in review_ids] + \
        [(s, rid) for s in systems for rid in review_ids]

    pio_labels = ("P", "I", "O")
    pio_rows = []
    for origin, rid in origins:
        text = corpus.text_for((origin, rid)).rstrip(".").split()
        spans = []
        for k in range(int(rng.integers(1, 4))):
            start = int(rng.integers(0, max(1, len(text) - 2)))
            length = int(rng.integers(1, 3))
            spans.append({"label": pio_labels[k % 3], "text": " ".join(text[start : start + length])})
        pio_rows.append({"origin": origin, "review_id": rid, "spans": spans})
    write_jsonl(out / "pio.jsonl", pio_rows)

    io_pairs = [("metformin", "blood pressure"), ("aspirin", "pain"), ("exercise", "mortality")]
    ev_rows = []
    for origin, rid in origins:
        pairs = []
        for i, o in io_pairs[: int(rng.integers(1, 4))]:
            dist = rng.dirichlet((1.0, 1.0, 1.0))
            pairs.append({"intervention": i, "outcome": o, "dist": [round(float(x), 6) for x in dist]})
        ev_rows.append({"origin": origin, "review_id": rid, "pairs": pairs})
    write_jsonl(out / "evidence.jsonl", ev_rows)

    st_rows = []
    for review in reviews:
        for doc in review["inputs"]:
            st_rows.append({
                "review_id": review["review_id"], "doc_id": doc["doc_id"],
                "statement": " ".join(doc["abstract"].rstrip(".").split()[:8]) + ".",
                "direction": EFFECTS[int(rng.integers(3))],
            })
    write_jsonl(out / "statements.jsonl", st_rows)

    write_jsonl(out / "directions.jsonl", [
        {"origin": origin, "review_id": rid, "direction": EFFECTS[int(rng.integers(3))]}
        for origin, rid in origins
    ])

    emb_rows = []
    for encoder in ("nli", "sts", "claimver"):
        for origin, rid in origins:
            vec = rng.normal(size=8)
            emb_rows.append({"origin": origin, "review_id": rid, "encoder_id": encoder,
                             "vector": [round(float(x), 6) for x in vec]})
    write_jsonl(out / "embeddings.jsonl", emb_rows)

    tok_rows = []
    for origin, rid in origins:
        tokens = corpus.text_for((origin, rid)).rstrip(".").split()[:6]
        vectors = [[round(float(x), 6) for x in rng.normal(size=8)] for _ in tokens]
        tok_rows.append({"origin": origin, "review_id": rid, "encoder_id": "bertscore",
                         "tokens": tokens, "vectors": vectors})
    write_jsonl(out / "token_embeddings.jsonl", tok_rows)

    write_jsonl(out / "train_targets.jsonl", [
        {"review_id": f"t{i:03d}",
         "target": (BOILERPLATE[i % len(BOILERPLATE)] + " " + sentence(rng, 8)
                    if i % 3 == 0 else sentence(rng, 12)) + "."}
        for i in range(30)
    ])

    facet_annotators = ["ann1", "ann2"]
    pairwise_annotators = ["ann1", "ann2", "ann3"]
    n_overlap = max(2, args.reviews // 4)
    n_random = max(1, args.reviews // 6)
    plan = plan_facet_campaign(corpus, systems, n_overlap=n_overlap, n_random=n_random,
                               annotators=facet_annotators,
                               dual_annotation=(max(1, n_overlap // 3), 2), seed=args.seed)
    plan = plan_pairwise_campaign(corpus, systems, plan,
                                  n_per_annotator=max(4, args.reviews // 2),
                                  annotators=pairwise_annotators,
                                  overlap_fraction=0.5, seed=args.seed)
    save_plan(plan, out / "plan.jsonl")

    # simulate annotators working through the plan
    log = AnnotationLog(out / "annotations.jsonl")
    for t in plan.facet_tasks:
        answers = {
            "fluency": str(int(rng.integers(0, 3))),
            "population": str(int(rng.integers(0, 3))),
            "intervention": str(int(rng.integers(0, 3))),
            "outcome": "NA" if rng.random() < 0.1 else str(int(rng.integers(0, 3))),
            "effect_target": EFFECTS[int(rng.integers(3))],
            "effect_generated": EFFECTS[int(rng.integers(3))],
            "strength_target": STRENGTHS[int(rng.integers(4))],
            "strength_generated": "NA" if rng.random() < 0.1 else STRENGTHS[int(rng.integers(4))],
        }
        log.append(FacetAnnotation(
            annotation_id=f"demo-{t.task_id}", annotator_id=t.annotator,
            review_id=t.review_id, system_id=t.system_id, **answers,
        ), task_id=t.task_id)
    for t in plan.pairwise_tasks:
        log.append(PairwiseAnnotation(
            annotation_id=f"demo-{t.task_id}", annotator_id=t.annotator,
            review_id=t.review_id, system_a=t.system_a, system_b=t.system_b,
            preference=("A", "B", "Neither")[int(rng.integers(3))],
        ), task_id=t.task_id)

    config = {
        "reviews": str(out / "reviews.jsonl"),
        "generated": str(out / "generated.jsonl"),
        "sidecars": {
            "pio": str(out / "pio.jsonl"),
            "evidence": str(out / "evidence.jsonl"),
            "statements": str(out / "statements.jsonl"),
            "directions": str(out / "directions.jsonl"),
            "embeddings": [str(out / "embeddings.jsonl")],
            "token_embeddings": [str(out / "token_embeddings.jsonl")],
        },
        "train_targets": str(out / "train_targets.jsonl"),
        "annotations": str(out / "annotations.jsonl"),
        "selfrep_ns": [4, 5, 6, 7],
        "seed": args.seed,
        "bootstrap_samples": 200,
        "out_dir": str(out / "out"),
        "serve": {"host": "127.0.0.1", "port": 8808,
                  "plan": str(out / "plan.jsonl"),
                  "log": str(out / "service_annotations.jsonl")},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"demo dataset written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
