import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_facet, make_pairwise
from mdseval.humaneval import (
    FACET_FIELDS,
    FACET_QUESTIONS,
    PAIRWISE_QUESTION,
    ValidationError,
    annotation_from_json_dict,
    annotator_ranking,
    cohen_kappa,
    facet_agreement,
    normalize_facets,
    tally_pairwise,
)


class TestSchema:
    def test_question_ids_cover_fields(self):
        assert [q["id"] for q in FACET_QUESTIONS] == [qid for qid, _ in FACET_FIELDS.values()]
        for q in FACET_QUESTIONS:
            codes = {o["code"] for o in q["options"]}
            assert codes == set(FACET_FIELDS[q["field"]][1])

    def test_pairwise_question(self):
        assert PAIRWISE_QUESTION["options"] == ["A", "B", "Neither"]

    def test_invalid_answer_rejected(self):
        with pytest.raises(ValidationError):
            make_facet(fluency="5")

    def test_other_requires_comment(self):
        with pytest.raises(ValidationError):
            make_facet(population="Other")
        a = make_facet(population="Other", comment="ambiguous population")
        assert a.population == "Other"

    def test_pairwise_self_comparison_rejected(self):
        with pytest.raises(ValidationError):
            make_pairwise(system_a="sysA", system_b="sysA")

    def test_roundtrip_json(self):
        a = make_facet(outcome="NA")
        assert annotation_from_json_dict(a.to_json_dict()) == a
        p = make_pairwise(preference="Neither", justification="both wrong")
        assert annotation_from_json_dict(p.to_json_dict()) == p


class TestNormalizeFacets:
    def test_all_agree(self):
        s = normalize_facets(make_facet())
        assert (s.fluency, s.pio, s.direction, s.strength) == (1.0, 1.0, 1.0, 1.0)

    def test_fluency_map(self):
        assert normalize_facets(make_facet(fluency="0")).fluency == 0.0
        assert normalize_facets(make_facet(fluency="1")).fluency == 0.5

    def test_pio_mean(self):
        s = normalize_facets(make_facet(population="2", intervention="1", outcome="0"))
        assert s.pio == pytest.approx((1.0 + 0.5 + 0.0) / 3)

    def test_pio_na_counts_zero(self):
        s = normalize_facets(make_facet(population="NA"))
        assert s.pio == pytest.approx(2 / 3)

    def test_pio_other_undefined(self):
        s = normalize_facets(make_facet(intervention="Other", comment="x"))
        assert s.pio is None

    def test_direction_disagree(self):
        s = normalize_facets(make_facet(effect_target="+1", effect_generated="0"))
        assert s.direction == 0.0

    def test_direction_na_undefined(self):
        assert normalize_facets(make_facet(effect_target="NA")).direction is None
        assert normalize_facets(make_facet(effect_generated="NA")).direction is None
        assert normalize_facets(make_facet(effect_target="NA", effect_generated="NA")).direction is None

    def test_strength_scale(self):
        s = normalize_facets(make_facet(strength_target="2", strength_generated="1"))
        assert s.strength == pytest.approx(1 - 1 / 3)
        s = normalize_facets(make_facet(strength_target="3", strength_generated="0"))
        assert s.strength == 0.0

    def test_strength_na_undefined(self):
        assert normalize_facets(make_facet(strength_target="NA")).strength is None

    @given(
        st.sampled_from(FACET_FIELDS["fluency"][1]),
        st.sampled_from(FACET_FIELDS["population"][1]),
        st.sampled_from(FACET_FIELDS["intervention"][1]),
        st.sampled_from(FACET_FIELDS["outcome"][1]),
        st.sampled_from(FACET_FIELDS["effect_target"][1]),
        st.sampled_from(FACET_FIELDS["effect_generated"][1]),
        st.sampled_from(FACET_FIELDS["strength_target"][1]),
        st.sampled_from(FACET_FIELDS["strength_generated"][1]),
    )
    def test_total_and_in_range(self, flu, pop, inter, out, et, eg, stt, stg):
        a = make_facet(
            fluency=flu, population=pop, intervention=inter, outcome=out,
            effect_target=et, effect_generated=eg,
            strength_target=stt, strength_generated=stg,
            comment="covers the Other cases",
        )
        s = normalize_facets(a)
        assert s.fluency in (0.0, 0.5, 1.0)
        for value in (s.pio, s.strength):
            assert value is None or 0.0 <= value <= 1.0
        assert s.direction in (None, 0.0, 1.0)


class TestCohenKappa:
    def test_identical(self):
        r = cohen_kappa(["x", "y", "x"], ["x", "y", "x"])
        assert r.kappa == pytest.approx(1.0)
        assert r.proportion == 1.0

    def test_hand_case(self):
        r = cohen_kappa(["x", "x", "y", "y"], ["x", "y", "x", "y"])
        assert r.proportion == 0.5
        assert r.kappa == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_marginals(self):
        r = cohen_kappa(["x", "x"], ["x", "x"])
        assert r.kappa is None
        assert r.proportion == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cohen_kappa(["x"], ["x", "y"])

    @given(st.lists(st.sampled_from("abc"), min_size=1, max_size=12),
           st.lists(st.sampled_from("abc"), min_size=1, max_size=12))
    def test_symmetry_and_bound(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        ab = cohen_kappa(a, b)
        ba = cohen_kappa(b, a)
        assert ab.proportion == ba.proportion
        if ab.kappa is not None:
            assert ab.kappa == pytest.approx(ba.kappa, abs=1e-12)
            assert ab.kappa <= 1.0 + 1e-12
            if ab.kappa == pytest.approx(1.0):
                assert a == b


class TestFacetAgreement:
    def test_pairs_dual_annotated_only(self):
        anns = [
            make_facet(annotation_id="a1", annotator_id="ann1", review_id="r1"),
            make_facet(annotation_id="a2", annotator_id="ann2", review_id="r1", fluency="1"),
            make_facet(annotation_id="a3", annotator_id="ann1", review_id="r2"),  # single
        ]
        results = {r.question_id: r for r in facet_agreement(anns)}
        assert results["q1"].n_items == 1
        assert results["q1"].proportion == 0.0
        assert results["q2"].proportion == 1.0


class TestTallyPairwise:
    def test_single_preference(self):
        points = tally_pairwise([make_pairwise(preference="A")])
        assert points == {"sysA": 1, "sysB": 0}

    def test_neither(self):
        assert tally_pairwise([make_pairwise(preference="Neither")]) == {"sysA": 0, "sysB": 0}

    def test_three_way(self):
        anns = [
            make_pairwise(annotation_id="p1", system_a="A", system_b="B", preference="A"),
            make_pairwise(annotation_id="p2", system_a="B", system_b="C", preference="A"),
            make_pairwise(annotation_id="p3", system_a="A", system_b="C", preference="A"),
        ]
        assert tally_pairwise(anns) == {"A": 2, "B": 1, "C": 0}

    def test_mixed_annotators_rejected(self):
        with pytest.raises(ValueError):
            tally_pairwise([
                make_pairwise(annotation_id="p1", annotator_id="ann1"),
                make_pairwise(annotation_id="p2", annotator_id="ann2"),
            ])

    def test_zero_fill_from_universe(self):
        points = tally_pairwise([make_pairwise(preference="A")], systems=["sysA", "sysB", "sysC"])
        assert points["sysC"] == 0

    @given(st.lists(st.tuples(st.sampled_from(["s1", "s2", "s3"]),
                              st.sampled_from(["s1", "s2", "s3"]),
                              st.sampled_from(["A", "B", "Neither"])), max_size=20))
    def test_points_sum_to_decisive_count(self, raw):
        anns = [
            make_pairwise(annotation_id=f"p{i}", system_a=a, system_b=b, preference=pref)
            for i, (a, b, pref) in enumerate(raw) if a != b
        ]
        points = tally_pairwise(anns)
        decisive = sum(1 for a in anns if a.preference != "Neither")
        assert sum(points.values()) == decisive


class TestAnnotatorRanking:
    def test_strict_order(self):
        assert annotator_ranking({"A": 2, "B": 1, "C": 0}) == {"A": 1, "B": 2, "C": 3}

    def test_two_way_tie(self):
        assert annotator_ranking({"A": 1, "B": 1}) == {"A": 1, "B": 1}

    def test_competition_ranks(self):
        assert annotator_ranking({"A": 3, "B": 3, "C": 1, "D": 0}) == {"A": 1, "B": 1, "C": 3, "D": 4}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            annotator_ranking({})

    @given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 5), min_size=1))
    def test_rank_props(self, points):
        ranks = annotator_ranking(points)
        ordered = sorted(points.items(), key=lambda kv: -kv[1])
        for (s1, p1), (s2, p2) in zip(ordered, ordered[1:]):
            if p1 == p2:
                assert ranks[s1] == ranks[s2]
            else:
                assert ranks[s1] < ranks[s2]
        assert min(ranks.values()) == 1
