import pytest

from conftest import make_facet, make_pairwise, write_jsonl
from mdseval import reports
from mdseval.corpus import Metric, MetricRecord, load_sidecars
from mdseval.ranking import CorrelationResult


def record(system, review, metric, value):
    return MetricRecord(system_id=system, review_id=review, metric_id=metric, value=value)


class TestComputeMetricRecords:
    def test_missing_sidecar_is_undefined_not_zero(self, corpus):
        bundle = load_sidecars(corpus)  # no sidecar files at all
        records, undefined = reports.compute_metric_records(
            corpus, bundle, [Metric.DELTA_EI, Metric.PIO_OVERLAP, Metric.NLI, Metric.BERTSCORE_F],
        )
        assert records == []
        assert len(undefined) == 4 * len(corpus.summaries)
        reasons = {u.reason for u in undefined}
        assert any("no evidence sidecar" in r for r in reasons)
        assert any("no pio sidecar" in r for r in reasons)

    def test_rouge_needs_no_sidecars(self, corpus):
        bundle = load_sidecars(corpus)
        records, undefined = reports.compute_metric_records(
            corpus, bundle, [Metric.ROUGE1_F, Metric.AVG_ROUGE_F])
        assert undefined == []
        assert len(records) == 2 * len(corpus.summaries)
        assert all(0.0 <= r.value <= 1.0 for r in records)

    def test_empty_target_spans_undefined(self, corpus, tmp_path):
        pio = write_jsonl(tmp_path / "pio.jsonl", [
            {"origin": "target", "review_id": "r1", "spans": []},
            {"origin": "sysA", "review_id": "r1", "spans": [{"label": "I", "text": "metformin"}]},
        ])
        bundle = load_sidecars(corpus, pio_path=pio)
        records, undefined = reports.compute_metric_records(corpus, bundle, [Metric.PIO_OVERLAP])
        mine = [u for u in undefined if (u.system_id, u.review_id) == ("sysA", "r1")]
        assert mine and mine[0].reason == "target has no PIO spans"
        assert not any(r.system_id == "sysA" and r.review_id == "r1" for r in records)


class TestFacetInstanceScores:
    def test_dual_annotations_averaged(self):
        anns = [
            make_facet(annotation_id="a1", annotator_id="ann1", fluency="2"),
            make_facet(annotation_id="a2", annotator_id="ann2", fluency="1"),
        ]
        scores = reports.facet_instance_scores(anns)
        assert scores["fluency"][("sysA", "r1")] == pytest.approx(0.75)

    def test_undefined_annotator_excluded_from_mean(self):
        anns = [
            make_facet(annotation_id="a1", annotator_id="ann1", effect_target="NA"),
            make_facet(annotation_id="a2", annotator_id="ann2",
                       effect_target="+1", effect_generated="0"),
        ]
        scores = reports.facet_instance_scores(anns)
        assert scores["direction"][("sysA", "r1")] == 0.0

    def test_all_undefined_is_none(self):
        anns = [make_facet(effect_target="NA")]
        assert reports.facet_instance_scores(anns)["direction"][("sysA", "r1")] is None


class TestDirectionClasses:
    def test_unanimous_split_and_mixed_excluded(self):
        anns = [
            # unanimous agree on (sysA, r1)
            make_facet(annotation_id="a1", annotator_id="ann1"),
            make_facet(annotation_id="a2", annotator_id="ann2"),
            # unanimous disagree on (sysA, r2)
            make_facet(annotation_id="a3", review_id="r2", effect_generated="0"),
            # mixed on (sysB, r1)
            make_facet(annotation_id="a4", annotator_id="ann1", system_id="sysB"),
            make_facet(annotation_id="a5", annotator_id="ann2", system_id="sysB",
                       effect_generated="0"),
        ]
        classes = reports.direction_classes(anns)
        assert classes[("sysA", "r1")] == "agrees"
        assert classes[("sysA", "r2")] == "disagrees"
        assert ("sysB", "r1") not in classes


class TestRankingHelpers:
    def test_metric_rankings_respect_subset_and_polarity(self):
        records = [
            record("A", "r1", Metric.DELTA_EI, 0.1), record("B", "r1", Metric.DELTA_EI, 0.9),
            record("A", "r1", Metric.NLI, 0.1), record("B", "r1", Metric.NLI, 0.9),
            # outside the subset; would flip the order if counted
            record("A", "r2", Metric.NLI, 9.0),
        ]
        rankings = reports.metric_rankings(records, subset={("A", "r1"), ("B", "r1")})
        assert rankings["delta_ei"].ordering == {"A": 1, "B": 2}  # lower is better
        assert rankings["nli"].ordering == {"A": 2, "B": 1}

    def test_all_rankings_includes_every_source(self):
        records = [record("sysA", "r1", Metric.NLI, 0.9), record("sysB", "r1", Metric.NLI, 0.2)]
        facets = [make_facet(), make_facet(annotation_id="a2", system_id="sysB", fluency="0")]
        pairwise = [make_pairwise()]
        rankings = reports.all_rankings(records, facets, pairwise)
        assert {"nli", "fluency", "pio", "direction", "strength", "pw_combined"} <= set(rankings)

    def test_ranking_matrix_diagonal_and_symmetry(self):
        records = [
            record(s, r, Metric.NLI, v)
            for (s, r, v) in [("A", "r1", 0.9), ("B", "r1", 0.5), ("C", "r1", 0.1)]
        ] + [
            record(s, r, Metric.STS, v)
            for (s, r, v) in [("A", "r1", 0.8), ("B", "r1", 0.6), ("C", "r1", 0.2)]
        ]
        rankings = reports.metric_rankings(records)
        matrix = reports.ranking_correlation_matrix(rankings)
        assert matrix["nli"]["nli"].value == 1.0
        assert matrix["nli"]["sts"] == matrix["sts"]["nli"]
        assert matrix["nli"]["sts"].value == pytest.approx(1.0)


class TestMetricColumns:
    def test_alignment_with_gaps(self):
        records = [
            record("A", "r1", Metric.NLI, 0.5),
            record("A", "r2", Metric.NLI, 0.6),
            record("A", "r1", Metric.STS, 0.7),
        ]
        columns = reports.metric_value_columns(records)
        assert columns["nli"] == [0.5, 0.6]
        assert columns["sts"] == [0.7, None]


class TestAgreementTable:
    def test_classes_counts_observed_labels(self):
        anns = [
            make_facet(annotation_id="a1", annotator_id="ann1", fluency="2", population="NA"),
            make_facet(annotation_id="a2", annotator_id="ann2", fluency="1", population="2"),
            make_facet(annotation_id="a3", annotator_id="ann1", review_id="r2", fluency="2",
                       population="0"),
            make_facet(annotation_id="a4", annotator_id="ann2", review_id="r2", fluency="2",
                       population="0"),
        ]
        rows = {row[0]: row for row in reports.agreement_table(anns)}
        q1 = rows["q1"]  # fluency: labels {2, 1}
        assert q1[2] == 2 and q1[5] == 2
        q2 = rows["q2"]  # population: labels {NA, 2, 0}
        assert q2[2] == 3

    def test_facet_export_columns(self, tmp_path):
        path = tmp_path / "facets.csv"
        reports.write_facet_export_csv(path, [make_facet(comment="note")])
        header, row = path.read_text().splitlines()
        assert header.split(",") == [
            "annotation_id", "annotator_id", "system_id", "review_id",
            "q1", "q2", "q3", "q4", "q5", "q6", "q7", "q8", "comment",
        ]
        assert row.endswith(",note")


class TestEcdfCsv:
    def test_direction_split_rows(self, tmp_path):
        records = [
            record("sysA", "r1", Metric.NLI, 0.9),
            record("sysA", "r2", Metric.NLI, 0.1),
        ]
        anns = [
            make_facet(annotation_id="a1", review_id="r1"),
            make_facet(annotation_id="a2", review_id="r2", effect_generated="0"),
        ]
        path = tmp_path / "ecdf.csv"
        reports.write_ecdf_csv(path, records, anns)
        lines = path.read_text().splitlines()[1:]
        classes = {line.split(",")[1] for line in lines}
        assert classes == {"all", "agrees", "disagrees"}
