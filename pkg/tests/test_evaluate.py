from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontoforge.corpus import TopConcept, Triple
from ontoforge.evaluate import (
    MatchConfig,
    evaluate_run,
    format_comparison,
    format_report,
    match_synonyms,
    match_terms,
    match_triples,
    normalize,
    prf,
)
from ontoforge.extract import DocPrediction, ExtractionRun

M = TopConcept.MATERIALS
P = TopConcept.PROCESS
PR = TopConcept.PROPERTY


class TestNormalize:
    @pytest.mark.parametrize(
        ("raw", "expected"),
        [
            ("  Sand  Casting.", "sand casting"),
            ("HPDC", "hpdc"),
            ("", ""),
            ("melting\tpoint ", "melting point"),
            ("(porosity)", "porosity"),
            ("Al₇Si₀.₃Mg", "al₇si₀.₃mg"),
        ],
    )
    def test_cases(self, raw, expected):
        assert normalize(raw) == expected


class TestMatchTerms:
    def test_exact_match(self):
        counts = match_terms([("metal", M)], [("metal", M)])
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)

    def test_truncation_is_a_miss(self):
        counts = match_terms(
            [("stirring speed", TopConcept.PARAMETER)],
            [("secondary stirring speed and timing", TopConcept.PARAMETER)],
        )
        assert (counts.tp, counts.fp, counts.fn) == (0, 1, 1)

    def test_duplicate_predictions_deduped(self):
        counts = match_terms([("metal", M), ("metal", M)], [("metal", M)])
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)

    def test_dedupe_off_counts_duplicate_as_fp(self):
        cfg = MatchConfig(dedupe_predictions=False)
        counts = match_terms([("metal", M), ("metal", M)], [("metal", M)], cfg)
        assert (counts.tp, counts.fp, counts.fn) == (1, 1, 0)

    def test_surface_mode_ignores_concept(self):
        counts = match_terms([("metal", P)], [("metal", M)])
        assert counts.tp == 1

    def test_strict_mode_requires_concept(self):
        cfg = MatchConfig(term_mode="strict")
        counts = match_terms([("metal", P)], [("metal", M)], cfg)
        assert (counts.tp, counts.fp, counts.fn) == (0, 1, 1)

    def test_per_concept_attribution(self):
        counts = match_terms(
            [("metal", M), ("ghost", P)],
            [("metal", M), ("missed", PR)],
        )
        assert counts.per_concept["materials"] == [1, 0, 0]
        assert counts.per_concept["casting-process"] == [0, 1, 0]
        assert counts.per_concept["product-property"] == [0, 0, 1]


class TestMatchTriples:
    def test_relation_substitution_full_mode(self):
        pred = [Triple("cast iron", "mechanical strength", "has property")]
        gold = [Triple("cast iron", "mechanical strength", "lacks")]
        counts = match_triples(pred, gold)
        assert (counts.tp, counts.fp, counts.fn) == (0, 1, 1)

    def test_terms_only_mode_ignores_relation(self):
        pred = [Triple("cast iron", "mechanical strength", "has property")]
        gold = [Triple("cast iron", "mechanical strength", "lacks")]
        counts = match_triples(pred, gold, MatchConfig(triple_mode="terms_only"))
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)

    def test_identical_sets(self):
        triples = [
            Triple("a", "b", "r1"),
            Triple("b", "c", "r2"),
            Triple("c", "d", "r3"),
        ]
        counts = match_triples(triples, list(triples))
        assert (counts.tp, counts.fp, counts.fn) == (3, 0, 0)

    def test_normalized_fields(self):
        counts = match_triples(
            [Triple("Cast Iron", "Fluidity ", "Has  Property")],
            [Triple("cast iron", "fluidity", "has property")],
        )
        assert counts.tp == 1


class TestMatchSynonyms:
    def test_reversed_pair_matches(self):
        predicted, matched = match_synonyms(
            [("melting point", "melting temperature")],
            [("melting temperature", "melting point")],
        )
        assert (predicted, matched) == (1, 1)

    def test_disjoint_sets(self):
        assert match_synonyms([("a", "b")], [("c", "d")]) == (1, 0)

    def test_duplicate_pred_counted_once(self):
        predicted, matched = match_synonyms(
            [("a", "b"), ("b", "a"), ("A ", "b")], [("a", "b")]
        )
        assert (predicted, matched) == (1, 1)


class TestPrf:
    @pytest.mark.parametrize(
        ("counts", "expected"),
        [
            ((336, 85, 254), (0.798, 0.569, 0.664)),
            ((517, 34, 73), (0.938, 0.876, 0.906)),
            ((271, 153, 210), (0.639, 0.563, 0.599)),
            ((353, 54, 128), (0.867, 0.734, 0.795)),
        ],
    )
    def test_published_counts(self, counts, expected):
        result = prf(*counts)
        for got, want in zip(result, expected):
            assert got == pytest.approx(want, abs=1e-3)

    def test_zero_denominators(self):
        assert prf(0, 0, 0) == (0.0, 0.0, 0.0)
        assert prf(0, 5, 0) == (0.0, 0.0, 0.0)
        assert prf(0, 0, 5) == (0.0, 0.0, 0.0)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            prf(-1, 0, 0)

    @given(
        st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(1, 9)
    )
    @settings(max_examples=100, deadline=None)
    def test_scale_free(self, tp, fp, fn, a):
        # exact rational check: prf(a*tp, a*fp, a*fn) == prf(tp, fp, fn)
        def rational_prf(tp, fp, fn):
            p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
            r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
            f = 2 * p * r / (p + r) if p + r else Fraction(0)
            return (p, r, f)

        assert rational_prf(a * tp, a * fp, a * fn) == rational_prf(tp, fp, fn)
        scaled, base = prf(a * tp, a * fp, a * fn), prf(tp, fp, fn)
        for s, b in zip(scaled, base):
            assert s == pytest.approx(b, abs=1e-12)


concepts = st.sampled_from(list(TopConcept))
terms = st.tuples(st.sampled_from(["metal", "mold", "alloy", "ladle", "sand"]), concepts)


@given(st.lists(terms, max_size=8), st.lists(terms, max_size=8))
@settings(max_examples=150, deadline=None)
def test_term_accounting_identity(pred, gold):
    """tp + fn == |gold| and tp + fp == |deduped pred| in every configuration."""
    for term_mode in ("surface", "strict"):
        cfg = MatchConfig(term_mode=term_mode)
        counts = match_terms(pred, gold, cfg)
        assert counts.tp + counts.fn == len(gold)
        keys = set()
        deduped = 0
        for surface, concept in pred:
            key = (normalize(surface), concept.value) if term_mode == "strict" else normalize(surface)
            if key not in keys:
                keys.add(key)
                deduped += 1
        assert counts.tp + counts.fp == deduped


triple_fields = st.sampled_from(["a", "b", "c", "r1", "r2"])
triples = st.tuples(triple_fields, triple_fields, triple_fields)


@given(st.lists(triples, max_size=8), st.lists(triples, max_size=8))
@settings(max_examples=150, deadline=None)
def test_triple_accounting_identity(pred, gold):
    for mode in ("full", "terms_only"):
        cfg = MatchConfig(triple_mode=mode)
        counts = match_triples(pred, gold, cfg)
        assert counts.tp + counts.fn == len(gold)
        keys = {(s, o, r) if mode == "full" else (s, o) for s, o, r in pred}
        assert counts.tp + counts.fp == len(keys)


@given(st.lists(terms, max_size=6), st.lists(terms, max_size=6))
@settings(max_examples=80, deadline=None)
def test_matching_invariant_under_permutation(pred, gold):
    counts = match_terms(pred, gold)
    flipped = match_terms(list(reversed(pred)), list(reversed(gold)))
    assert (counts.tp, counts.fp, counts.fn) == (flipped.tp, flipped.fp, flipped.fn)


# --- evaluate_run -------------------------------------------------------------


def terms_run_from(dataset, strategy="icl"):
    predictions = [
        DocPrediction(doc_id=item.doc.id, spans=list(item.spans)) for item in dataset.items
    ]
    return ExtractionRun(strategy=strategy, task="terms", model="m", params={}, predictions=predictions)


class TestEvaluateRun:
    def test_identity_terms_run_scores_one(self, gold):
        report = evaluate_run(terms_run_from(gold), gold)
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)
        assert report.fp == report.fn == 0

    def test_empty_run_vs_nonempty_gold(self, gold):
        run = ExtractionRun(strategy="icl", task="terms", model="m", params={})
        report = evaluate_run(run, gold)
        assert report.tp == 0 and report.recall == 0.0
        assert report.fn == sum(len(i.spans) for i in gold.items)

    def test_zero_shot_terms_precision_only(self, gold):
        run = terms_run_from(gold, strategy="zero_shot")
        run.predictions = [
            DocPrediction(doc_id=p.doc_id, names=[(s.surface, s.concept) for s in p.spans])
            for p in run.predictions
        ]
        report = evaluate_run(run, gold)
        assert report.precision == 1.0
        assert report.recall is None and report.f1 is None
        assert report.precision_only
        assert "n/a" in format_report(report)

    def test_hand_counted_relations_fixture(self, gold):
        # d01 identity (2 tp); one relation renamed (fp+fn); one gold triple missed (fn)
        predictions = []
        for item in gold.items:
            triples = list(gold.triples_for(item.doc.id))
            if item.doc.id == "d07":
                triples = [
                    Triple(t.subject, t.object, "has property", t.source_doc)
                    if t.relation == "improves"
                    else t
                    for t in triples
                ]
            if item.doc.id == "d08":
                triples = []
            predictions.append(DocPrediction(doc_id=item.doc.id, triples=triples))
        run = ExtractionRun(strategy="fine_tuned", task="relations", model="m", params={}, predictions=predictions)
        report = evaluate_run(run, gold)
        assert (report.tp, report.fp, report.fn) == (17, 1, 2)
        assert report.synonym_predicted == 0

    def test_synonym_triples_routed_to_pair_tally(self, gold):
        from ontoforge.extract import gold_triples_for_item

        predictions = [
            DocPrediction(doc_id=item.doc.id, triples=gold_triples_for_item(gold, item))
            for item in gold.items
        ]
        run = ExtractionRun(strategy="icl", task="relations", model="m", params={}, predictions=predictions)
        report = evaluate_run(run, gold)
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)
        assert (report.synonym_predicted, report.synonym_matched) == (2, 2)

    def test_injected_hierarchy_edges_excluded(self, gold):
        item = gold.items[0]
        triples = gold.triples_for(item.doc.id) + [
            Triple("Sand casting", "casting-process", "is a", item.doc.id)
        ]
        run = ExtractionRun(
            strategy="icl",
            task="relations",
            model="m",
            params={},
            predictions=[DocPrediction(doc_id=item.doc.id, triples=triples)],
        )
        report = evaluate_run(run, gold)
        assert report.fp == 0  # the "is a" edge did not count against precision

    def test_unknown_doc_rejected(self, gold):
        run = ExtractionRun(
            strategy="icl",
            task="terms",
            model="m",
            params={},
            predictions=[DocPrediction(doc_id="ghost", spans=[])],
        )
        with pytest.raises(ValueError, match="ghost"):
            evaluate_run(run, gold)

    def test_comparison_table_renders(self, gold):
        reports = [
            ("icl", evaluate_run(terms_run_from(gold), gold)),
            ("fine_tuned", evaluate_run(terms_run_from(gold, "fine_tuned"), gold)),
        ]
        table = format_comparison(reports)
        assert "precision" in table and "icl" in table and "fine_tuned" in table
