import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qarouter.classifier import RouteLabel
from qarouter.errors import EmptyEvaluation, LengthMismatch
from qarouter.evalkit import (
    EvalRecord,
    MetricConfig,
    classifier_report,
    exact_match,
    latency_stats,
    macro_avg_f1,
    token_f1,
)

F, S = RouteLabel.FACTUAL, RouteLabel.SQL
KEEP_ARTICLES = MetricConfig(strip_articles=False)


class TestExactMatch:
    def test_identity(self):
        assert exact_match("dor nas costas", ["dor nas costas"]) == 1

    def test_article_stripping_makes_match(self):
        # hand normalization trace: "A dor nas costas." -> "a dor nas costas"
        # -> article "a" removed -> "dor nas costas"
        assert exact_match("dor nas costas", ["A dor nas costas."]) == 1

    def test_without_article_stripping_no_match(self):
        assert exact_match("dor nas costas", ["A dor nas costas."], KEEP_ARTICLES) == 0

    def test_any_gold_suffices(self):
        assert exact_match("febre", ["tosse", "febre"]) == 1

    def test_final_punctuation_is_invisible(self):
        assert exact_match("febre alta.", ["febre alta"]) == 1

    def test_no_golds_rejected(self):
        with pytest.raises(EmptyEvaluation):
            exact_match("x", [])


class TestTokenF1:
    def test_disjoint_is_zero(self):
        assert token_f1("dor nas costas", "febre alta") == 0.0

    def test_six_sevenths_pair(self):
        # hand arithmetic: overlap 3, precision 3/3, recall 3/4
        # F1 = 2 * (1 * 0.75) / 1.75 = 6/7
        got = token_f1("dor nas costas", "a dor nas costas", KEEP_ARTICLES)
        assert got == pytest.approx(6 / 7, abs=1e-9)

    def test_identity_is_one(self):
        assert token_f1("o paciente dormiu", "o paciente dormiu", KEEP_ARTICLES) == 1.0

    def test_multiset_overlap_counts_repeats(self):
        # "dor dor" vs "dor": overlap 1, precision 1/2, recall 1 -> 2/3
        assert token_f1("dor dor", "dor") == pytest.approx(2 / 3, abs=1e-9)

    def test_both_empty_is_one(self):
        assert token_f1("", "") == 1.0
        assert token_f1("a", "o", MetricConfig(strip_articles=True)) == 1.0

    def test_one_empty_is_zero(self):
        assert token_f1("", "dor") == 0.0
        assert token_f1("dor", "") == 0.0


def _record(prediction, golds, route=F, timings=None, qid="q"):
    return EvalRecord(qid, prediction, tuple(golds), route, timings or {})


class TestMacroAvgF1:
    def test_all_perfect(self):
        records = [_record("dor", ["dor"]), _record("febre alta", ["febre alta"])]
        assert macro_avg_f1(records) == 1.0

    def test_mean_of_one_and_zero(self):
        records = [_record("dor", ["dor"]), _record("febre", ["tosse"])]
        assert macro_avg_f1(records) == pytest.approx(0.5, abs=1e-12)

    def test_single_record_equals_its_f1(self):
        record = _record("dor nas costas", ["a dor nas costas"])
        assert macro_avg_f1([record]) == pytest.approx(
            token_f1("dor nas costas", "a dor nas costas"), abs=1e-12
        )

    def test_best_gold_wins(self):
        record = _record("dor", ["febre", "dor"])
        assert macro_avg_f1([record]) == 1.0

    def test_empty_records_rejected(self):
        with pytest.raises(EmptyEvaluation):
            macro_avg_f1([])


class TestMetricProperties:
    @given(st.text(max_size=30), st.text(max_size=30))
    @settings(max_examples=300)
    def test_em_implies_f1_and_symmetry(self, a, b):
        config = MetricConfig()
        if exact_match(a, [b], config) == 1:
            assert token_f1(a, b, config) == pytest.approx(1.0, abs=1e-9)
        assert token_f1(a, b, config) == pytest.approx(token_f1(b, a, config), abs=1e-12)
        assert 0.0 <= token_f1(a, b, config) <= 1.0

    @given(st.text(max_size=30), st.sampled_from(["?", "!", ".", "…"]))
    def test_final_punctuation_never_matters(self, text, punct):
        assert token_f1(text + punct, text) == 1.0
        assert exact_match(text + punct, [text]) == 1


class TestClassifierReport:
    def test_all_correct(self):
        report = classifier_report([F, S, F], [F, S, F])
        assert report["accuracy"] == 1.0
        assert report["per_class"]["factual"]["f1"] == 1.0
        assert report["per_class"]["sql"]["f1"] == 1.0

    def test_all_factual_on_balanced_set(self):
        # hand confusion matrix: tp_f=2 fn_f=0 / sql all missed
        report = classifier_report([F, F, F, F], [F, F, S, S])
        assert report["accuracy"] == 0.5
        assert report["per_class"]["sql"]["recall"] == 0.0
        assert report["per_class"]["sql"]["precision"] == 0.0
        assert report["per_class"]["factual"]["recall"] == 1.0
        assert report["per_class"]["factual"]["precision"] == 0.5
        assert report["confusion"]["sql"]["factual"] == 2

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            classifier_report([F], [F, S])

    def test_empty_inputs(self):
        with pytest.raises(EmptyEvaluation):
            classifier_report([], [])


class TestLatencyStats:
    def test_single_record_total(self):
        record = _record("x", ["x"], timings={"retrieve": 0.1, "read": 0.2})
        report = latency_stats([record])
        assert report["factual"]["total"]["mean"] == pytest.approx(0.3, abs=1e-12)

    def test_route_without_records_is_omitted(self):
        report = latency_stats([_record("x", ["x"], route=F, timings={"a": 1.0})])
        assert "sql" not in report

    def test_ten_record_fixture_matches_spreadsheet(self):
        # hand spreadsheet: factual totals = [0.30, 0.60, 0.90, ..., 1.80]
        # (six records, stage split 1:2), sql totals = [0.2, 0.4, 0.8, 1.0]
        factual = [
            _record("x", ["x"], route=F, timings={"retrieve": 0.1 * i, "read": 0.2 * i}, qid=f"f{i}")
            for i in range(1, 7)
        ]
        sql = [
            _record("x", ["x"], route=S, timings={"translate": 0.1 * i, "execute": 0.1 * i}, qid=f"s{i}")
            for i in (1, 2, 4, 5)
        ]
        report = latency_stats(factual + sql)
        assert report["factual"]["count"] == 6
        assert report["factual"]["total"]["mean"] == pytest.approx(0.3 * 3.5, abs=1e-9)
        assert report["factual"]["total"]["median"] == pytest.approx(0.3 * 3.5, abs=1e-9)
        assert report["factual"]["total"]["p95"] == pytest.approx(1.8, abs=1e-9)
        assert report["factual"]["stages"]["retrieve"]["mean"] == pytest.approx(0.35, abs=1e-9)
        assert report["sql"]["total"]["mean"] == pytest.approx(0.6, abs=1e-9)
        assert report["sql"]["total"]["median"] == pytest.approx(0.6, abs=1e-9)
        assert report["sql"]["total"]["p95"] == pytest.approx(1.0, abs=1e-9)
        assert report["sql"]["stages"]["execute"]["median"] == pytest.approx(0.3, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(EmptyEvaluation):
            latency_stats([])

    def test_negative_timing_rejected(self):
        with pytest.raises(ValueError):
            _record("x", ["x"], timings={"a": -1.0})

    def test_gold_required(self):
        with pytest.raises(ValueError):
            EvalRecord("q", "x", (), F, {})


class TestRandomPairBulk:
    def test_ten_thousand_random_pairs_hold_properties(self):
        rng = random.Random(20260810)
        words = ["dor", "a", "costas", "febre", "o", "x1", "raio-x", ""]
        for _ in range(10_000):
            a = " ".join(rng.choices(words, k=rng.randint(0, 6)))
            b = " ".join(rng.choices(words, k=rng.randint(0, 6)))
            f_ab = token_f1(a, b)
            assert abs(f_ab - token_f1(b, a)) < 1e-12
            assert 0.0 <= f_ab <= 1.0
            if exact_match(a, [b]) == 1:
                assert abs(f_ab - 1.0) < 1e-9
