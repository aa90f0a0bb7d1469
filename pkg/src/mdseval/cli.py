"""Batch entry points.

Subcommands: score, selfrep, copying, agreement, rank, correlate,
bootstrap, plan, serve, report. Each takes --config <path> (JSON; see
README for the schema) plus an optional --seed override, writes CSV / JSON
outputs under the configured output directory, and exits 0 on success or
nonzero with a structured JSON diagnostic on stderr. Reruns with the same
config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import campaign as campaign_mod
from . import ranking as ranking_mod
from . import reports, service as service_mod
from .corpus import (
    AnnotationLog,
    Corpus,
    CorpusError,
    Metric,
    MetricRecord,
    SidecarBundle,
    load_annotations,
    load_corpus,
    load_metric_records,
    load_sidecars,
)
from .humaneval import FacetAnnotation, PairwiseAnnotation, ValidationError
from .lexical import TokenSequence, tokenize


@dataclass
class RunConfig:
    reviews: str | None = None
    generated: str | None = None
    sidecars: dict = field(default_factory=dict)
    train_targets: str | None = None
    annotations: str | None = None
    metric_records: str | None = None
    metrics: list[str] = field(default_factory=lambda: [m.value for m in Metric])
    encoders: dict = field(default_factory=dict)
    stemming: bool = False
    selfrep_ns: list[int] = field(default_factory=lambda: [4, 5, 6, 7, 8, 9, 10])
    seed: int = 0
    out_dir: str = "out"
    bootstrap_samples: int = 10000
    correlation_kind: str = "pearson"
    plan: dict = field(default_factory=dict)
    serve: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise CorpusError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _need(cfg: RunConfig, name: str) -> str:
    value = getattr(cfg, name)
    if not value:
        raise CliError("missing_input", f"config field {name!r} is required for this command")
    return value


def _load_corpus(cfg: RunConfig) -> Corpus:
    return load_corpus(_need(cfg, "reviews"), _need(cfg, "generated"))


def _load_sidecars(cfg: RunConfig, corpus: Corpus) -> SidecarBundle:
    sc = cfg.sidecars
    return load_sidecars(
        corpus,
        pio_path=sc.get("pio"),
        evidence_path=sc.get("evidence"),
        statements_path=sc.get("statements"),
        directions_path=sc.get("directions"),
        embedding_paths=sc.get("embeddings", []),
        token_embedding_paths=sc.get("token_embeddings", []),
    )


def _enabled_metrics(cfg: RunConfig) -> list[Metric]:
    return [Metric(m) for m in cfg.metrics]


def _encoders(cfg: RunConfig) -> dict[Metric, str]:
    return {Metric(k): v for k, v in cfg.encoders.items()}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_records(cfg: RunConfig, corpus: Corpus) -> list[MetricRecord]:
    if cfg.metric_records:
        return load_metric_records(cfg.metric_records, corpus)
    metrics_dir = Path(cfg.out_dir) / "metrics"
    if metrics_dir.is_dir():
        return reports.load_metric_csvs(metrics_dir)
    raise CliError("missing_input",
                   "no metric records: set 'metric_records' or run the score command first")


def _load_annotation_records(cfg: RunConfig) -> tuple[list[FacetAnnotation], list[PairwiseAnnotation]]:
    records = load_annotations(_need(cfg, "annotations"))
    facets = [r for r in records if isinstance(r, FacetAnnotation)]
    pairwise = [r for r in records if isinstance(r, PairwiseAnnotation)]
    return facets, pairwise


def _load_train_targets(cfg: RunConfig) -> list[TokenSequence] | None:
    if not cfg.train_targets:
        return None
    out = []
    with open(cfg.train_targets, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "target" not in obj:
                raise CorpusError(f"{cfg.train_targets}:{lineno}: missing 'target'")
            out.append(tokenize(obj["target"], stemming=cfg.stemming))
    return out


def cmd_score(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    sidecars = _load_sidecars(cfg, corpus)
    records, undefined = reports.compute_metric_records(
        corpus, sidecars, _enabled_metrics(cfg), stemming=cfg.stemming, encoders=_encoders(cfg),
    )
    reports.write_metric_csvs(_out_dir(cfg) / "metrics", records, undefined)


def cmd_selfrep(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    reports.write_selfrep_csvs(
        _out_dir(cfg), corpus, cfg.selfrep_ns,
        train_targets=_load_train_targets(cfg), stemming=cfg.stemming,
    )


def cmd_copying(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    sidecars = _load_sidecars(cfg, corpus)
    if not sidecars.statements:
        raise CliError("missing_input", "copying analysis needs the statements sidecar")
    table = reports.copying_table(corpus, sidecars, stemming=cfg.stemming)
    reports.write_copying_csvs(_out_dir(cfg), table)


def cmd_agreement(cfg: RunConfig) -> None:
    facets, _ = _load_annotation_records(cfg)
    out = _out_dir(cfg)
    reports.write_csv(out / "agreement.csv",
                      ["question", "facet", "classes", "kappa", "agreement", "n_items"],
                      reports.agreement_table(facets))
    reports.write_facet_export_csv(out / "facet_export.csv", facets)


def cmd_rank(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    records = _load_records(cfg, corpus)
    facets, pairwise = ([], [])
    if cfg.annotations:
        facets, pairwise = _load_annotation_records(cfg)
    else:
        print("warning: no annotations configured; human columns omitted", file=sys.stderr)
    rankings = reports.all_rankings(records, facets, pairwise)
    out = _out_dir(cfg)
    reports.write_rankings_csv(out / "rankings.csv", rankings)
    reports.write_correlation_matrix_csv(
        out / "rank_spearman.csv", reports.ranking_correlation_matrix(rankings))
    if pairwise:
        per_annotator = reports.per_annotator_rankings(pairwise)
        named = dict(per_annotator)
        named["pw_combined"] = rankings["pw_combined"]
        for facet in reports.FACET_NAMES:
            if facet in rankings:
                named[facet] = rankings[facet]
        reports.write_correlation_matrix_csv(
            out / "pw_facet_spearman.csv", reports.ranking_correlation_matrix(named))


def cmd_correlate(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    records = _load_records(cfg, corpus)
    out = _out_dir(cfg)
    kind = cfg.correlation_kind
    reports.write_correlation_matrix_csv(
        out / f"metric_corr_{kind}.csv", reports.metric_correlation_matrix(records, kind=kind))
    facets: list[FacetAnnotation] = []
    if cfg.annotations:
        facets, _ = _load_annotation_records(cfg)
        reports.write_facet_metric_csv(
            out / "facet_metric_corr.csv",
            reports.facet_metric_correlations(records, facets, kind=kind))
    reports.write_ecdf_csv(out / "ecdf.csv", records, facets)


def cmd_bootstrap(cfg: RunConfig) -> None:
    _, pairwise = _load_annotation_records(cfg)
    if not pairwise:
        raise CliError("missing_input", "bootstrap needs pairwise annotations")
    per_annotator: dict[str, list[PairwiseAnnotation]] = {}
    for a in pairwise:
        per_annotator.setdefault(a.annotator_id, []).append(a)
    summary = ranking_mod.bootstrap_ranking(per_annotator, cfg.bootstrap_samples, cfg.seed)
    out = _out_dir(cfg) / "bootstrap.json"
    out.write_text(json.dumps({
        "n_samples": summary.n_samples,
        "mean_rho": summary.mean_rho,
        "sd_rho": summary.sd_rho,
        "seed": summary.seed,
        "n_undefined": summary.n_undefined,
    }, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_plan(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    p = cfg.plan
    if not p:
        raise CliError("missing_input", "config field 'plan' is required")
    systems = p.get("systems") or corpus.systems
    plan = campaign_mod.plan_facet_campaign(
        corpus, systems,
        n_overlap=p.get("n_overlap", 0),
        n_random=p.get("n_random", 0),
        annotators=p["facet_annotators"],
        dual_annotation=(p.get("dual_overlap", 0), p.get("dual_random", 0)),
        seed=cfg.seed,
    )
    if p.get("pairwise_annotators"):
        plan = campaign_mod.plan_pairwise_campaign(
            corpus, systems, plan,
            n_per_annotator=p.get("n_per_annotator", 0),
            annotators=p["pairwise_annotators"],
            overlap_fraction=p.get("overlap_fraction", 0.5),
            seed=cfg.seed,
        )
    out_path = p.get("out") or str(_out_dir(cfg) / "plan.jsonl")
    campaign_mod.save_plan(plan, out_path)


def cmd_serve(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    sv = cfg.serve
    plan_path = sv.get("plan")
    if not plan_path or not Path(plan_path).exists():
        raise CliError("missing_input", f"campaign plan not found: {plan_path!r}")
    plan = campaign_mod.load_plan(plan_path)
    log = AnnotationLog(sv.get("log", str(Path(cfg.out_dir) / "annotations.jsonl")))
    svc = service_mod.AnnotationService(corpus, plan, log)
    service_mod.serve(svc, host=sv.get("host", "127.0.0.1"), port=int(sv.get("port", 8080)))


def cmd_report(cfg: RunConfig) -> None:
    """Run every analysis the configured inputs allow."""
    corpus = _load_corpus(cfg)
    sidecars = _load_sidecars(cfg, corpus)
    out = _out_dir(cfg)
    records, undefined = reports.compute_metric_records(
        corpus, sidecars, _enabled_metrics(cfg), stemming=cfg.stemming, encoders=_encoders(cfg),
    )
    if cfg.metric_records:
        # ingested instance-level values take precedence over computed ones
        ingested = load_metric_records(cfg.metric_records, corpus)
        covered = {(r.system_id, r.review_id, r.metric_id) for r in ingested}
        records = [r for r in records
                   if (r.system_id, r.review_id, r.metric_id) not in covered] + ingested
    reports.write_metric_csvs(out / "metrics", records, undefined)
    reports.write_selfrep_csvs(out, corpus, cfg.selfrep_ns,
                               train_targets=_load_train_targets(cfg), stemming=cfg.stemming)
    if sidecars.statements:
        reports.write_copying_csvs(out, reports.copying_table(corpus, sidecars, stemming=cfg.stemming))
    facets: list[FacetAnnotation] = []
    pairwise: list[PairwiseAnnotation] = []
    if cfg.annotations:
        facets, pairwise = _load_annotation_records(cfg)
    else:
        print("warning: no annotations configured; human columns omitted", file=sys.stderr)
    if facets:
        reports.write_csv(out / "agreement.csv",
                          ["question", "facet", "classes", "kappa", "agreement", "n_items"],
                          reports.agreement_table(facets))
        reports.write_facet_export_csv(out / "facet_export.csv", facets)
    rankings = reports.all_rankings(records, facets, pairwise)
    reports.write_rankings_csv(out / "rankings.csv", rankings)
    reports.write_correlation_matrix_csv(
        out / "rank_spearman.csv", reports.ranking_correlation_matrix(rankings))
    kind = cfg.correlation_kind
    reports.write_correlation_matrix_csv(
        out / f"metric_corr_{kind}.csv", reports.metric_correlation_matrix(records, kind=kind))
    if facets:
        reports.write_facet_metric_csv(
            out / "facet_metric_corr.csv",
            reports.facet_metric_correlations(records, facets, kind=kind))
    reports.write_ecdf_csv(out / "ecdf.csv", records, facets)
    if pairwise:
        cmd_bootstrap(cfg)


COMMANDS = {
    "score": cmd_score,
    "selfrep": cmd_selfrep,
    "copying": cmd_copying,
    "agreement": cmd_agreement,
    "rank": cmd_rank,
    "correlate": cmd_correlate,
    "bootstrap": cmd_bootstrap,
    "plan": cmd_plan,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mdseval",
                                     description="evaluation toolkit for literature-review MDS")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip() or None)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        COMMANDS[args.command](cfg)
    except (CorpusError, ValidationError, CliError, FileNotFoundError, json.JSONDecodeError) as e:
        code = getattr(e, "code", e.__class__.__name__)
        print(json.dumps({"error": {"code": str(code), "message": str(e)}}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
