import json
import threading

import pytest

from conftest import GENERATED, REVIEWS, make_facet, make_pairwise, write_jsonl
from mdseval.corpus import (
    AnnotationLog,
    CorpusError,
    Metric,
    append_annotation,
    load_annotations,
    load_corpus,
    load_metric_records,
    load_sidecars,
    save_corpus,
)
from mdseval.humaneval import ValidationError


class TestLoadCorpus:
    def test_basic_load(self, corpus):
        assert len(corpus.reviews) == 3
        assert len(corpus.summaries) == 6
        assert corpus.systems == ["sysA", "sysB"]
        assert corpus.text_for(("target", "r1")) == REVIEWS[0]["target"]
        assert corpus.text_for(("sysA", "r1")) == GENERATED[0]["summary"]
        assert corpus.text_for(("sysC", "r1")) is None

    def test_two_review_one_system(self, tmp_path):
        reviews = write_jsonl(tmp_path / "r.jsonl", REVIEWS[:2])
        generated = write_jsonl(tmp_path / "g.jsonl", GENERATED[:2])
        c = load_corpus(reviews, generated)
        assert len(c.reviews) == 2
        assert len(c.summaries) == 2

    def test_duplicate_summary_key(self, tmp_path):
        reviews = write_jsonl(tmp_path / "r.jsonl", REVIEWS)
        generated = write_jsonl(tmp_path / "g.jsonl", GENERATED + [GENERATED[0]])
        with pytest.raises(CorpusError, match=r"sysA.*r1"):
            load_corpus(reviews, generated)

    def test_dangling_review(self, tmp_path):
        reviews = write_jsonl(tmp_path / "r.jsonl", REVIEWS)
        bad = {"system_id": "sysA", "review_id": "r404", "summary": "text"}
        generated = write_jsonl(tmp_path / "g.jsonl", [bad])
        with pytest.raises(CorpusError, match="unknown review"):
            load_corpus(reviews, generated)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text(json.dumps(REVIEWS[0]) + "\n{broken\n")
        generated = write_jsonl(tmp_path / "g.jsonl", [])
        with pytest.raises(CorpusError, match=r":2"):
            load_corpus(path, generated)

    def test_duplicate_review_id(self, tmp_path):
        reviews = write_jsonl(tmp_path / "r.jsonl", [REVIEWS[0], REVIEWS[0]])
        generated = write_jsonl(tmp_path / "g.jsonl", [])
        with pytest.raises(CorpusError, match="duplicate review_id"):
            load_corpus(reviews, generated)

    def test_empty_target_rejected(self, tmp_path):
        bad = dict(REVIEWS[0], target="")
        reviews = write_jsonl(tmp_path / "r.jsonl", [bad])
        with pytest.raises(CorpusError, match="empty target"):
            load_corpus(reviews, write_jsonl(tmp_path / "g.jsonl", []))

    def test_no_inputs_rejected(self, tmp_path):
        bad = dict(REVIEWS[0], inputs=[])
        reviews = write_jsonl(tmp_path / "r.jsonl", [bad])
        with pytest.raises(CorpusError, match="no inputs"):
            load_corpus(reviews, write_jsonl(tmp_path / "g.jsonl", []))

    def test_reserved_origin_rejected(self, tmp_path):
        reviews = write_jsonl(tmp_path / "r.jsonl", REVIEWS)
        generated = write_jsonl(tmp_path / "g.jsonl",
                                [{"system_id": "target", "review_id": "r1", "summary": "x"}])
        with pytest.raises(CorpusError, match="reserved"):
            load_corpus(reviews, generated)

    def test_round_trip(self, corpus, tmp_path):
        save_corpus(corpus, tmp_path / "r2.jsonl", tmp_path / "g2.jsonl")
        again = load_corpus(tmp_path / "r2.jsonl", tmp_path / "g2.jsonl")
        assert again == corpus


class TestLoadSidecars:
    def test_pio_and_evidence(self, corpus, tmp_path):
        pio = write_jsonl(tmp_path / "pio.jsonl", [
            {"origin": "target", "review_id": "r1",
             "spans": [{"label": "I", "text": "Metformin"}, {"label": "O", "text": "blood pressure"}]},
            {"origin": "sysA", "review_id": "r1", "spans": [{"label": "I", "text": "oral metformin"}]},
        ])
        evidence = write_jsonl(tmp_path / "ev.jsonl", [
            {"origin": "target", "review_id": "r1",
             "pairs": [{"intervention": "metformin", "outcome": "bp", "dist": [0.2, 0.3, 0.5]}]},
        ])
        bundle = load_sidecars(corpus, pio_path=pio, evidence_path=evidence)
        assert bundle.pio_spans[("target", "r1")][0].label == "Intervention"
        assert bundle.pio_spans[("target", "r1")][0].text == ("metformin",)
        assert bundle.evidence[("target", "r1")][0].dist == (0.2, 0.3, 0.5)
        # absence is represented: no entry at all for this key
        assert ("sysB", "r1") not in bundle.pio_spans

    def test_distribution_renormalized_within_tolerance(self, corpus, tmp_path):
        evidence = write_jsonl(tmp_path / "ev.jsonl", [
            {"origin": "target", "review_id": "r1",
             "pairs": [{"intervention": "i", "outcome": "o", "dist": [0.2, 0.3, 0.5005]}]},
        ])
        bundle = load_sidecars(corpus, evidence_path=evidence)
        assert sum(bundle.evidence[("target", "r1")][0].dist) == pytest.approx(1.0, abs=1e-12)

    def test_distribution_rejected_outside_tolerance(self, corpus, tmp_path):
        evidence = write_jsonl(tmp_path / "ev.jsonl", [
            {"origin": "target", "review_id": "r1",
             "pairs": [{"intervention": "i", "outcome": "o", "dist": [0.5, 0.5, 0.5]}]},
        ])
        with pytest.raises(CorpusError, match="sums to"):
            load_sidecars(corpus, evidence_path=evidence)

    def test_unknown_key_rejected(self, corpus, tmp_path):
        pio = write_jsonl(tmp_path / "pio.jsonl", [
            {"origin": "sysZ", "review_id": "r1", "spans": [{"label": "I", "text": "x"}]},
        ])
        with pytest.raises(CorpusError, match="does not resolve"):
            load_sidecars(corpus, pio_path=pio)

    def test_statements_and_directions(self, corpus, tmp_path):
        statements = write_jsonl(tmp_path / "st.jsonl", [
            {"review_id": "r1", "doc_id": "d1", "statement": "works", "direction": "+1"},
            {"review_id": "r1", "doc_id": "d2", "statement": "no effect", "direction": "0"},
        ])
        directions = write_jsonl(tmp_path / "dir.jsonl", [
            {"origin": "sysA", "review_id": "r1", "direction": "-1"},
        ])
        bundle = load_sidecars(corpus, statements_path=statements, directions_path=directions)
        assert [s.direction for s in bundle.statements["r1"]] == [1, 0]
        assert bundle.summary_directions[("sysA", "r1")] == -1

    def test_statement_for_unknown_doc(self, corpus, tmp_path):
        statements = write_jsonl(tmp_path / "st.jsonl", [
            {"review_id": "r1", "doc_id": "d999", "statement": "x", "direction": "0"},
        ])
        with pytest.raises(CorpusError, match="not an input"):
            load_sidecars(corpus, statements_path=statements)

    def test_embedding_dimension_mismatch(self, corpus, tmp_path):
        embs = write_jsonl(tmp_path / "emb.jsonl", [
            {"origin": "target", "review_id": "r1", "encoder_id": "nli", "vector": [1.0, 0.0]},
            {"origin": "sysA", "review_id": "r1", "encoder_id": "nli", "vector": [1.0, 0.0, 0.0]},
        ])
        with pytest.raises(CorpusError, match="dimensionality"):
            load_sidecars(corpus, embedding_paths=[embs])

    def test_token_embeddings(self, corpus, tmp_path):
        tok = write_jsonl(tmp_path / "tok.jsonl", [
            {"origin": "target", "review_id": "r1", "encoder_id": "bert",
             "tokens": ["a", "b"], "vectors": [[1.0, 0.0], [0.0, 1.0]]},
        ])
        bundle = load_sidecars(corpus, token_embedding_paths=[tok])
        m = bundle.token_embedding("bert", ("target", "r1"))
        assert m.tokens == ("a", "b")
        assert bundle.token_embedding("bert", ("sysA", "r1")) is None

    def test_ragged_token_vectors_rejected(self, corpus, tmp_path):
        tok = write_jsonl(tmp_path / "tok.jsonl", [
            {"origin": "target", "review_id": "r1", "encoder_id": "bert",
             "tokens": ["a", "b"], "vectors": [[1.0, 0.0], [0.0]]},
        ])
        with pytest.raises(CorpusError, match="ragged"):
            load_sidecars(corpus, token_embedding_paths=[tok])


class TestMetricRecords:
    def test_load(self, corpus, tmp_path):
        path = write_jsonl(tmp_path / "m.jsonl", [
            {"system_id": "sysA", "review_id": "r1", "metric": "rouge1_f", "value": 0.5},
        ])
        records = load_metric_records(path, corpus)
        assert records[0].metric_id is Metric.ROUGE1_F
        assert records[0].value == 0.5

    def test_unknown_pair_rejected(self, corpus, tmp_path):
        path = write_jsonl(tmp_path / "m.jsonl", [
            {"system_id": "sysZ", "review_id": "r1", "metric": "rouge1_f", "value": 0.5},
        ])
        with pytest.raises(CorpusError, match="not in corpus"):
            load_metric_records(path, corpus)

    def test_non_finite_rejected(self, corpus, tmp_path):
        path = write_jsonl(tmp_path / "m.jsonl", [
            {"system_id": "sysA", "review_id": "r1", "metric": "nli", "value": float("nan")},
        ])
        with pytest.raises(CorpusError, match="non-finite"):
            load_metric_records(path, corpus)

    def test_duplicate_rejected(self, corpus, tmp_path):
        row = {"system_id": "sysA", "review_id": "r1", "metric": "nli", "value": 0.5}
        path = write_jsonl(tmp_path / "m.jsonl", [row, row])
        with pytest.raises(CorpusError, match="duplicate"):
            load_metric_records(path, corpus)


class TestAnnotationLog:
    def test_append_and_ack(self, tmp_path):
        log = AnnotationLog(tmp_path / "log.jsonl")
        ack = append_annotation(log, make_facet())
        assert ack.seq == 1 and not ack.duplicate
        assert len(log) == 1

    def test_idempotent_resubmission(self, tmp_path):
        log = AnnotationLog(tmp_path / "log.jsonl")
        record = make_facet()
        first = append_annotation(log, record)
        again = append_annotation(log, record)
        assert again.seq == first.seq
        assert again.duplicate
        assert len(log) == 1

    def test_same_id_different_content_rejected(self, tmp_path):
        log = AnnotationLog(tmp_path / "log.jsonl")
        append_annotation(log, make_facet())
        with pytest.raises(ValidationError, match="different content"):
            append_annotation(log, make_facet(fluency="0"))

    def test_replay_restores_state(self, tmp_path):
        path = tmp_path / "log.jsonl"
        log = AnnotationLog(path)
        append_annotation(log, make_facet(), task_id="f00001")
        append_annotation(log, make_pairwise(), task_id="p00001")
        reopened = AnnotationLog(path)
        assert len(reopened) == 2
        assert [e.seq for e in reopened.entries] == [1, 2]
        assert reopened.entries[0].task_id == "f00001"
        # replay keeps idempotency
        ack = append_annotation(reopened, make_facet())
        assert ack.duplicate and ack.seq == 1

    def test_append_only_prefix_stable(self, tmp_path):
        path = tmp_path / "log.jsonl"
        log = AnnotationLog(path)
        append_annotation(log, make_facet())
        prefix = path.read_text()
        append_annotation(log, make_pairwise())
        assert path.read_text().startswith(prefix)

    def test_concurrent_appends(self, tmp_path):
        log = AnnotationLog(tmp_path / "log.jsonl")
        errors = []

        def worker(k):
            try:
                for i in range(20):
                    append_annotation(log, make_facet(annotation_id=f"w{k}-{i}"))
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=worker, args=(k,)) for k in range(5)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(log) == 100
        seqs = [e.seq for e in log.entries]
        assert seqs == list(range(1, 101))
        assert len(load_annotations(log.path)) == 100

    def test_load_annotations_split(self, tmp_path):
        log = AnnotationLog(tmp_path / "log.jsonl")
        append_annotation(log, make_facet())
        append_annotation(log, make_pairwise())
        records = load_annotations(log.path)
        kinds = {type(r).__name__ for r in records}
        assert kinds == {"FacetAnnotation", "PairwiseAnnotation"}
