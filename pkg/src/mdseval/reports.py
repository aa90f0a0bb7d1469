"""Batch metric computation and emission of the analysis tables / figure
data series (rankings, agreement, copying, correlation matrices,
self-repetition profiles, ECDFs).

Everything here is deterministic: rows are emitted in sorted key order and
floats are written with repr (shortest round-trip), so reruns over the same
inputs are byte-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import lexical, modelmetrics, ranking
from .corpus import (
    Corpus,
    LOWER_BETTER_METRICS,
    Metric,
    MetricRecord,
    SidecarBundle,
)
from .humaneval import (
    FACET_FIELDS,
    FacetAnnotation,
    PairwiseAnnotation,
    annotator_ranking,
    cohen_kappa,
    normalize_facets,
    paired_facet_labels,
    tally_pairwise,
)
from .lexical import TARGET_ORIGIN, TextKey, tokenize
from .ranking import SystemRanking

FACET_NAMES = ("fluency", "pio", "direction", "strength")

# Table-1 column order
METRIC_ORDER = [
    Metric.ROUGE1_F, Metric.ROUGE2_F, Metric.ROUGEL_F, Metric.AVG_ROUGE_F,
    Metric.BERTSCORE_F, Metric.DELTA_EI, Metric.CLAIMVER, Metric.NLI,
    Metric.STS, Metric.PIO_OVERLAP,
]

DEFAULT_ENCODERS = {
    Metric.NLI: "nli",
    Metric.STS: "sts",
    Metric.CLAIMVER: "claimver",
    Metric.BERTSCORE_F: "bertscore",
}


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


@dataclass(frozen=True)
class UndefinedInstance:
    metric_id: Metric
    system_id: str
    review_id: str
    reason: str


def compute_metric_records(
    corpus: Corpus,
    sidecars: SidecarBundle,
    enabled: Sequence[Metric],
    *,
    stemming: bool = False,
    encoders: Mapping[Metric, str] | None = None,
) -> tuple[list[MetricRecord], list[UndefinedInstance]]:
    """One record per (system, review, metric); instances a metric cannot be
    computed for (missing sidecar data, or an undefined score) are reported
    separately, never silently scored 0."""
    encoders = {**DEFAULT_ENCODERS, **(encoders or {})}
    records: list[MetricRecord] = []
    undefined: list[UndefinedInstance] = []
    token_cache: dict[TextKey, lexical.TokenSequence] = {}

    def toks(key: TextKey) -> lexical.TokenSequence:
        if key not in token_cache:
            token_cache[key] = tokenize(corpus.text_for(key), stemming=stemming, source_key=key)
        return token_cache[key]

    rouge_family = [m for m in (Metric.ROUGE1_F, Metric.ROUGE2_F, Metric.ROUGEL_F, Metric.AVG_ROUGE_F)
                    if m in enabled]

    def emit(metric: Metric, system_id: str, review_id: str, value: float | None, reason: str = "") -> None:
        if value is None:
            undefined.append(UndefinedInstance(metric, system_id, review_id, reason))
        else:
            records.append(MetricRecord(system_id=system_id, review_id=review_id,
                                        metric_id=metric, value=float(value)))

    for system_id, review_id in sorted(corpus.summaries):
        gen_key = (system_id, review_id)
        tgt_key = (TARGET_ORIGIN, review_id)

        if rouge_family:
            cand, ref = toks(gen_key), toks(tgt_key)
            r1 = lexical.rouge_n(cand, ref, 1)
            r2 = lexical.rouge_n(cand, ref, 2)
            rl = lexical.rouge_l(cand, ref)
            by_metric = {
                Metric.ROUGE1_F: r1.f, Metric.ROUGE2_F: r2.f, Metric.ROUGEL_F: rl.f,
                Metric.AVG_ROUGE_F: lexical.avg_rouge_f(r1, r2, rl),
            }
            for m in rouge_family:
                emit(m, system_id, review_id, by_metric[m])

        if Metric.DELTA_EI in enabled:
            tgt = sidecars.evidence.get(tgt_key)
            gen = sidecars.evidence.get(gen_key)
            if tgt is None or gen is None:
                missing = tgt_key if tgt is None else gen_key
                emit(Metric.DELTA_EI, system_id, review_id, None,
                     f"no evidence sidecar for {missing}")
            else:
                emit(Metric.DELTA_EI, system_id, review_id, modelmetrics.delta_ei(tgt, gen).total)

        if Metric.PIO_OVERLAP in enabled:
            tgt = sidecars.pio_spans.get(tgt_key)
            gen = sidecars.pio_spans.get(gen_key)
            if tgt is None or gen is None:
                missing = tgt_key if tgt is None else gen_key
                emit(Metric.PIO_OVERLAP, system_id, review_id, None,
                     f"no pio sidecar for {missing}")
            else:
                score = modelmetrics.pio_overlap(tgt, gen)
                emit(Metric.PIO_OVERLAP, system_id, review_id,
                     None if score is None else score.score,
                     "target has no PIO spans" if score is None else "")

        for metric in (Metric.NLI, Metric.STS, Metric.CLAIMVER):
            if metric not in enabled:
                continue
            encoder = encoders[metric]
            tgt = sidecars.embedding(encoder, tgt_key)
            gen = sidecars.embedding(encoder, gen_key)
            if tgt is None or gen is None:
                missing = tgt_key if tgt is None else gen_key
                emit(metric, system_id, review_id, None,
                     f"no {encoder!r} embedding for {missing}")
            else:
                emit(metric, system_id, review_id, modelmetrics.cosine_metric(tgt, gen))

        if Metric.BERTSCORE_F in enabled:
            encoder = encoders[Metric.BERTSCORE_F]
            tgt = sidecars.token_embedding(encoder, tgt_key)
            gen = sidecars.token_embedding(encoder, gen_key)
            if tgt is None or gen is None:
                missing = tgt_key if tgt is None else gen_key
                emit(Metric.BERTSCORE_F, system_id, review_id, None,
                     f"no {encoder!r} token embeddings for {missing}")
            else:
                emit(Metric.BERTSCORE_F, system_id, review_id, modelmetrics.bertscore_f(gen, tgt))

    return records, undefined


def write_metric_csvs(out_dir: str | Path, records: Sequence[MetricRecord],
                      undefined: Sequence[UndefinedInstance]) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    by_metric: dict[Metric, list[MetricRecord]] = {}
    for r in records:
        by_metric.setdefault(r.metric_id, []).append(r)
    for metric in sorted(by_metric, key=lambda m: m.value):
        path = out_dir / f"{metric.value}.csv"
        rows = sorted(by_metric[metric], key=lambda r: (r.system_id, r.review_id))
        write_csv(path, ["system_id", "review_id", "value"],
                  [(r.system_id, r.review_id, r.value) for r in rows])
        written.append(path)
    if undefined:
        path = out_dir / "undefined.csv"
        rows = sorted(undefined, key=lambda u: (u.metric_id.value, u.system_id, u.review_id))
        write_csv(path, ["metric", "system_id", "review_id", "reason"],
                  [(u.metric_id.value, u.system_id, u.review_id, u.reason) for u in rows])
        written.append(path)
    return written


def load_metric_csvs(metrics_dir: str | Path) -> list[MetricRecord]:
    records = []
    for path in sorted(Path(metrics_dir).glob("*.csv")):
        if path.name == "undefined.csv":
            continue
        try:
            metric = Metric(path.stem)
        except ValueError:
            continue
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(MetricRecord(system_id=row["system_id"], review_id=row["review_id"],
                                            metric_id=metric, value=float(row["value"])))
    return records


def facet_instance_scores(
    annotations: Sequence[FacetAnnotation],
) -> dict[str, dict[tuple[str, str], float | None]]:
    """Per-facet instance scores: annotator scores averaged per (system,
    review); None when no annotator produced a defined score."""
    per_instance: dict[tuple[str, str], list] = {}
    for a in annotations:
        per_instance.setdefault((a.system_id, a.review_id), []).append(normalize_facets(a))
    out: dict[str, dict[tuple[str, str], float | None]] = {name: {} for name in FACET_NAMES}
    for key in sorted(per_instance):
        scores = per_instance[key]
        for name in FACET_NAMES:
            defined = [getattr(s, name) for s in scores if getattr(s, name) is not None]
            out[name][key] = sum(defined) / len(defined) if defined else None
    return out


def annotated_subset(annotations: Sequence[FacetAnnotation]) -> set[tuple[str, str]]:
    return {(a.system_id, a.review_id) for a in annotations}


def records_as_rows(records: Sequence[MetricRecord], metric: Metric) -> list[ranking.ScoreRow]:
    return [(r.system_id, r.review_id, r.value) for r in records if r.metric_id == metric]


def metric_rankings(
    records: Sequence[MetricRecord],
    subset: set[tuple[str, str]] | None = None,
) -> dict[str, SystemRanking]:
    """System rankings per metric (restricted to the annotated subset when
    given); polarity flips for the divergence metric."""
    out: dict[str, SystemRanking] = {}
    present = {r.metric_id for r in records}
    for metric in [m for m in METRIC_ORDER if m in present]:
        summary = ranking.system_scores(records_as_rows(records, metric), subset)
        if not summary.means:
            continue
        polarity = ranking.LOWER_BETTER if metric in LOWER_BETTER_METRICS else ranking.HIGHER_BETTER
        out[metric.value] = ranking.rank_systems(summary.means, polarity, source=metric.value)
    return out


def facet_rankings(annotations: Sequence[FacetAnnotation]) -> dict[str, SystemRanking]:
    out: dict[str, SystemRanking] = {}
    instance_scores = facet_instance_scores(annotations)
    for name in FACET_NAMES:
        rows = [(s, r, v) for (s, r), v in sorted(instance_scores[name].items())]
        summary = ranking.system_scores(rows)
        if not summary.means:
            continue
        out[name] = ranking.rank_systems(summary.means, ranking.HIGHER_BETTER, source=name)
    return out


def pairwise_combined_ranking(annotations: Sequence[PairwiseAnnotation]) -> SystemRanking:
    per_annotator: dict[str, list[PairwiseAnnotation]] = {}
    for a in annotations:
        per_annotator.setdefault(a.annotator_id, []).append(a)
    systems = sorted({a.system_a for a in annotations} | {a.system_b for a in annotations})
    voter_rankings = []
    for annotator in sorted(per_annotator):
        points = tally_pairwise(per_annotator[annotator], systems=systems)
        voter_rankings.append(SystemRanking(
            ordering=annotator_ranking(points), source=annotator,
            scores={k: float(v) for k, v in points.items()},
        ))
    return ranking.borda_combine(voter_rankings)


def per_annotator_rankings(annotations: Sequence[PairwiseAnnotation]) -> dict[str, SystemRanking]:
    per_annotator: dict[str, list[PairwiseAnnotation]] = {}
    for a in annotations:
        per_annotator.setdefault(a.annotator_id, []).append(a)
    systems = sorted({a.system_a for a in annotations} | {a.system_b for a in annotations})
    out = {}
    for annotator in sorted(per_annotator):
        points = tally_pairwise(per_annotator[annotator], systems=systems)
        out[annotator] = SystemRanking(
            ordering=annotator_ranking(points), source=annotator,
            scores={k: float(v) for k, v in points.items()},
        )
    return out


def all_rankings(
    records: Sequence[MetricRecord],
    facet_annotations: Sequence[FacetAnnotation],
    pairwise_annotations: Sequence[PairwiseAnnotation],
) -> dict[str, SystemRanking]:
    """The full ranking table: metrics over the annotated subset, the four
    human facets, and the Borda-combined pairwise ranking."""
    subset = annotated_subset(facet_annotations) if facet_annotations else None
    out = metric_rankings(records, subset)
    out.update(facet_rankings(facet_annotations))
    if pairwise_annotations:
        out["pw_combined"] = pairwise_combined_ranking(pairwise_annotations)
    return out


def write_rankings_csv(path: str | Path, rankings: Mapping[str, SystemRanking]) -> None:
    sources = list(rankings)
    systems = sorted({s for r in rankings.values() for s in r.ordering})
    rows = []
    for system in systems:
        rows.append([system] + [rankings[src].ordering.get(system) for src in sources])
    write_csv(path, ["system"] + sources, rows)


def ranking_correlation_matrix(rankings: Mapping[str, SystemRanking]) -> dict:
    """Spearman correlations between the rank vectors of every ranking source."""
    systems = sorted({s for r in rankings.values() for s in r.ordering})
    columns = {
        name: [float(r.ordering[s]) if s in r.ordering else None for s in systems]
        for name, r in rankings.items()
    }
    return ranking.correlation_matrix(columns, kind="spearman")


def metric_value_columns(records: Sequence[MetricRecord]) -> dict[str, list[float | None]]:
    """Instance-aligned metric value columns over all (system, review) keys."""
    keys = sorted({(r.system_id, r.review_id) for r in records})
    index = {k: i for i, k in enumerate(keys)}
    present = {r.metric_id for r in records}
    columns: dict[str, list[float | None]] = {}
    for metric in [m for m in METRIC_ORDER if m in present]:
        col: list[float | None] = [None] * len(keys)
        for r in records:
            if r.metric_id == metric:
                col[index[(r.system_id, r.review_id)]] = r.value
        columns[metric.value] = col
    return columns


def metric_correlation_matrix(records: Sequence[MetricRecord], kind: str = "pearson") -> dict:
    return ranking.correlation_matrix(metric_value_columns(records), kind=kind)


def write_correlation_matrix_csv(path: str | Path, matrix: Mapping[str, Mapping]) -> None:
    names = list(matrix)
    rows = []
    for a in names:
        for b in names:
            cell = matrix[a].get(b)
            if cell is None:
                rows.append([a, b, None, None, None])
            else:
                rows.append([a, b, cell.value, cell.p_value, cell.n])
    write_csv(path, ["row", "col", "value", "p_value", "n"], rows)


def facet_metric_correlations(
    records: Sequence[MetricRecord],
    annotations: Sequence[FacetAnnotation],
    kind: str = "pearson",
) -> dict[str, dict[str, ranking.CorrelationResult | None]]:
    """Instance-level correlation of each metric against each of the four
    facet agreement scores (pairwise-complete over annotated instances)."""
    instance_scores = facet_instance_scores(annotations)
    keys = sorted(annotated_subset(annotations))
    fn = {"pearson": ranking.pearson, "spearman": ranking.spearman}[kind]
    by_metric: dict[Metric, dict[tuple[str, str], float]] = {}
    for r in records:
        by_metric.setdefault(r.metric_id, {})[(r.system_id, r.review_id)] = r.value
    out: dict[str, dict[str, ranking.CorrelationResult | None]] = {}
    present = [m for m in METRIC_ORDER if m in by_metric]
    for metric in present:
        row: dict[str, ranking.CorrelationResult | None] = {}
        values = by_metric[metric]
        for facet in FACET_NAMES:
            x = [values.get(k) for k in keys]
            y = [instance_scores[facet].get(k) for k in keys]
            xs, ys = [], []
            for a, b in zip(x, y):
                if a is not None and b is not None:
                    xs.append(a)
                    ys.append(b)
            row[facet] = fn(xs, ys) if len(xs) >= 3 else None
        out[metric.value] = row
    return out


def write_facet_metric_csv(path: str | Path, table: Mapping[str, Mapping]) -> None:
    rows = []
    for metric, row in table.items():
        for facet in FACET_NAMES:
            cell = row.get(facet)
            if cell is None:
                rows.append([metric, facet, None, None, None])
            else:
                rows.append([metric, facet, cell.value, cell.p_value, cell.n])
    write_csv(path, ["metric", "facet", "value", "p_value", "n"], rows)


def agreement_table(annotations: Sequence[FacetAnnotation]) -> list[list]:
    """Rows of (question, classes, kappa, agreement, n_items) over the
    dual-annotated items; classes counts the distinct labels observed."""
    pairs = paired_facet_labels(annotations)
    rows = []
    for name, (qid, _) in FACET_FIELDS.items():
        a, b = pairs[name]
        if not a:
            continue
        result = cohen_kappa(a, b, question_id=qid)
        classes = len(set(a) | set(b))
        rows.append([qid, name, classes, result.kappa, result.proportion, result.n_items])
    return rows


def write_facet_export_csv(path: str | Path, annotations: Sequence[FacetAnnotation]) -> None:
    """Facet annotations as CSV, one column per question (q1..q8)."""
    header = ["annotation_id", "annotator_id", "system_id", "review_id"] + \
        [qid for qid, _ in FACET_FIELDS.values()] + ["comment"]
    rows = []
    for a in sorted(annotations, key=lambda a: (a.annotator_id, a.system_id, a.review_id, a.annotation_id)):
        rows.append([a.annotation_id, a.annotator_id, a.system_id, a.review_id]
                    + [getattr(a, name) for name in FACET_FIELDS] + [a.comment or ""])
    write_csv(path, header, rows)


def copying_table(
    corpus: Corpus, sidecars: SidecarBundle, systems: Sequence[str] | None = None,
    *, stemming: bool = False,
) -> list[lexical.CopyingReport]:
    """Synthesis / input-match rates, targets first then each system."""
    systems = list(systems) if systems is not None else corpus.systems
    reports = [lexical.copying_report(TARGET_ORIGIN, corpus, sidecars.statements,
                                      sidecars.summary_directions, stemming=stemming)]
    for system in systems:
        reports.append(lexical.copying_report(system, corpus, sidecars.statements,
                                              sidecars.summary_directions, stemming=stemming))
    return reports


def write_copying_csvs(out_dir: str | Path, reports: Sequence[lexical.CopyingReport]) -> None:
    out_dir = Path(out_dir)
    write_csv(out_dir / "copying.csv", ["system", "synthesis", "input_match", "n_reviews", "n_skipped"],
              [[r.system_id, r.synthesis_rate, r.input_match_rate,
                sum(1 for row in r.rows if not row.skipped),
                sum(1 for row in r.rows if row.skipped)] for r in reports])
    detail = []
    for r in reports:
        for row in r.rows:
            detail.append([r.system_id, row.review_id, row.closest_doc_id,
                           row.statement_direction, row.summary_direction,
                           row.synthesis, row.input_match,
                           int(row.skipped), row.reason or ""])
    write_csv(out_dir / "copying_detail.csv",
              ["system", "review_id", "closest_doc_id", "statement_direction",
               "summary_direction", "synthesis", "input_match", "skipped", "reason"],
              detail)


def summaries_by_origin(corpus: Corpus, systems: Sequence[str] | None = None,
                        *, stemming: bool = False) -> dict[str, list[lexical.TokenSequence]]:
    """Tokenized summaries per system plus the "target" series."""
    systems = list(systems) if systems is not None else corpus.systems
    out: dict[str, list[lexical.TokenSequence]] = {}
    out[TARGET_ORIGIN] = [
        tokenize(corpus.reviews[rid].target, stemming=stemming, source_key=(TARGET_ORIGIN, rid))
        for rid in sorted(corpus.reviews)
    ]
    for system in systems:
        out[system] = [
            tokenize(corpus.summaries[(s, rid)].summary, stemming=stemming, source_key=(s, rid))
            for s, rid in sorted(corpus.summaries)
            if s == system
        ]
    return out


def write_selfrep_csvs(
    out_dir: str | Path,
    corpus: Corpus,
    ns: Sequence[int],
    systems: Sequence[str] | None = None,
    train_targets: Sequence[lexical.TokenSequence] | None = None,
    *, stemming: bool = False,
) -> None:
    out_dir = Path(out_dir)
    groups = summaries_by_origin(corpus, systems, stemming=stemming)
    origins = sorted(groups)
    rates, coverage, top_rows, overlap_rows, amp_rows = [], [], [], [], []
    for origin in origins:
        summaries = groups[origin]
        for n in ns:
            rates.append([origin, n, lexical.self_repetition_rate(summaries, n)])
            profile = lexical.ngram_coverage(summaries, n)
            for g in sorted(profile.counts, key=lambda g: (-profile.counts[g], g)):
                coverage.append([origin, n, " ".join(g), profile.counts[g], profile.percent(g)])
            top = profile.most_frequent()
            if top is not None:
                g, count = top
                top_rows.append([origin, n, " ".join(g), count, profile.percent(g)])
            if train_targets is not None:
                overlap_rows.append([origin, n, lexical.train_overlap(profile, train_targets)])
                for g in sorted(profile.counts):
                    train_rate = sum(1 for t in train_targets if g in t.ngram_set(n)) / len(train_targets)
                    if train_rate == 0:
                        continue
                    amp_rows.append([origin, n, " ".join(g),
                                     profile.percent(g), train_rate,
                                     lexical.amplification(g, summaries, train_targets)])
    write_csv(out_dir / "selfrep_rates.csv", ["origin", "n", "rate"], rates)
    write_csv(out_dir / "ngram_coverage.csv", ["origin", "n", "ngram", "count", "percent"], coverage)
    write_csv(out_dir / "selfrep_top.csv", ["origin", "n", "ngram", "count", "percent"], top_rows)
    if train_targets is not None:
        write_csv(out_dir / "train_overlap.csv", ["origin", "n", "fraction"], overlap_rows)
        write_csv(out_dir / "amplification.csv",
                  ["origin", "n", "ngram", "generated_rate", "train_rate", "amplification"],
                  amp_rows)


def direction_classes(annotations: Sequence[FacetAnnotation]) -> dict[tuple[str, str], str]:
    """Instances split by human direction agreement: unanimous 1 -> agrees,
    unanimous 0 -> disagrees; mixed or undefined instances are left out."""
    scores = facet_instance_scores(annotations)["direction"]
    out = {}
    for key, value in scores.items():
        if value == 1.0:
            out[key] = "agrees"
        elif value == 0.0:
            out[key] = "disagrees"
    return out


def write_ecdf_csv(
    path: str | Path,
    records: Sequence[MetricRecord],
    annotations: Sequence[FacetAnnotation] = (),
) -> None:
    classes = direction_classes(annotations) if annotations else {}
    rows = []
    present = sorted({r.metric_id for r in records}, key=lambda m: m.value)
    for metric in present:
        values = [r.value for r in records if r.metric_id == metric]
        groups = {"all": values}
        if classes:
            for cls in ("agrees", "disagrees"):
                sub = [r.value for r in records
                       if r.metric_id == metric and classes.get((r.system_id, r.review_id)) == cls]
                if sub:
                    groups[cls] = sub
        for cls, sub in groups.items():
            for value, fraction in ranking.ecdf(sub):
                rows.append([metric.value, cls, value, fraction])
    write_csv(path, ["metric", "class", "value", "fraction"], rows)
