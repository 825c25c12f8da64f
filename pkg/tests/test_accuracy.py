import pytest
from hypothesis import given, settings, strategies as st

from nonresponse_lab.accuracy import (
    InconclusiveTreatment, NonComparisonTreatment, Outcome, RateEstimate, ScoringPolicy, classify,
    clopper_pearson, fmt_estimate, fp_histogram, round_pct, summarize,
)
from nonresponse_lab.study import Decision, ResponseRecord, SourceLabel

import study_fixtures
from oracles import bisect, lower_tail, upper_tail

DIFF, SAME = SourceLabel.DIFFERENT, SourceLabel.SAME


# ---- classify ----------------------------------------------------------------

def test_classify_core_cases():
    assert classify(DIFF, Decision.IDENTIFICATION) is Outcome.FALSE_POSITIVE
    assert classify(SAME, Decision.EXCLUSION) is Outcome.FALSE_NEGATIVE
    assert classify(SAME, Decision.IDENTIFICATION) is Outcome.TRUE_POSITIVE
    assert classify(DIFF, Decision.EXCLUSION) is Outcome.TRUE_NEGATIVE
    assert classify(SAME, Decision.INCONCLUSIVE) is Outcome.CORRECT_BY_POLICY
    assert classify(DIFF, None) is Outcome.NOT_SCORED


@pytest.mark.parametrize("decision", [Decision.INCONCLUSIVE, Decision.INCONCLUSIVE_A, Decision.INCONCLUSIVE_C])
def test_classify_inconclusive_policies(decision):
    err = ScoringPolicy(InconclusiveTreatment.ERROR)
    exc = ScoringPolicy(InconclusiveTreatment.EXCLUDED)
    assert classify(DIFF, decision, err) is Outcome.FALSE_POSITIVE
    assert classify(SAME, decision, err) is Outcome.FALSE_NEGATIVE
    assert classify(DIFF, decision, exc) is Outcome.NOT_SCORED


def test_classify_non_comparison_policies():
    missing = ScoringPolicy(unsuitable_treatment=NonComparisonTreatment.MISSING)
    assert classify(DIFF, Decision.UNSUITABLE) is Outcome.CORRECT_BY_POLICY
    assert classify(DIFF, Decision.UNSUITABLE, missing) is Outcome.NOT_SCORED
    assert classify(DIFF, Decision.NO_VALUE, missing) is Outcome.CORRECT_BY_POLICY


# ---- clopper_pearson ---------------------------------------------------------

def test_fbi_ames_interval_rounds_to_published():
    low, high = clopper_pearson(20, 2842, 0.95)
    assert (round_pct(20 / 2842), round_pct(low), round_pct(high)) == (0.7, 0.4, 1.1)


def test_boundaries():
    assert clopper_pearson(0, 17)[0] == 0.0
    assert clopper_pearson(17, 17)[1] == 1.0


def test_zero_successes_closed_form_and_bisection():
    closed = 1 - 0.025 ** (1 / 20)
    by_bisection = bisect(lambda p: lower_tail(20, p, 0) - 0.025)
    assert abs(closed - by_bisection) < 1e-10
    assert clopper_pearson(0, 20)[1] == pytest.approx(closed, abs=1e-10)


def test_three_of_ten_matches_bisection_oracle():
    low = bisect(lambda p: upper_tail(10, p, 3) - 0.025)
    high = bisect(lambda p: lower_tail(10, p, 3) - 0.025)
    got = clopper_pearson(3, 10)
    assert got == pytest.approx((low, high), abs=1e-10)
    est = RateEstimate.from_counts(3, 10)
    assert est.point == 0.3 and (est.ci_low, est.ci_high) == got


@pytest.mark.parametrize("args", [(-1, 5, 0.95), (6, 5, 0.95), (0, 0, 0.95), (1, 5, 1.0), (1, 5, 0.0)])
def test_invalid_arguments(args):
    with pytest.raises(ValueError):
        clopper_pearson(*args)


@given(st.integers(1, 400).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.floats(0.5, 0.999))
@settings(max_examples=200)
def test_interval_contains_point_and_is_monotone(xn, level):
    x, n = xn
    low, high = clopper_pearson(x, n, level)
    assert 0.0 <= low <= x / n <= high <= 1.0
    if x < n:
        low2, high2 = clopper_pearson(x + 1, n, level)
        assert low2 >= low and high2 >= high


def test_exactness_small_n():
    for n in range(1, 31):
        for x in range(n + 1):
            low, high = clopper_pearson(x, n, 0.95)
            if x > 0:
                assert abs(upper_tail(n, low, x) - 0.025) < 1e-8
            if x < n:
                assert abs(lower_tail(n, high, x) - 0.025) < 1e-8


# ---- summarize / histogram ---------------------------------------------------

def test_summarize_fbi_ames_fixture():
    s = summarize(study_fixtures.fbi_ames_observed())
    fp = s.false_positive
    assert (fp.numerator, fp.denominator) == (20, 2842)
    assert fmt_estimate(fp) == "0.7 (0.4, 1.1)"
    assert s.false_negative.undefined and s.false_negative.point is None
    assert fmt_estimate(s.false_negative) == "undefined"


def test_all_correct_has_zero_lower_bound():
    recs = [ResponseRecord("a", f"i{j}", DIFF, Decision.EXCLUSION) for j in range(12)]
    fp = summarize(recs).false_positive
    assert fp.point == 0.0 and fp.ci_low == 0.0


def test_sensitivity_and_specificity():
    recs = [
        ResponseRecord("a", "1", SAME, Decision.IDENTIFICATION),
        ResponseRecord("a", "2", SAME, Decision.INCONCLUSIVE),
        ResponseRecord("a", "3", DIFF, Decision.EXCLUSION),
        ResponseRecord("a", "4", DIFF, Decision.IDENTIFICATION),
    ]
    s = summarize(recs)
    assert (s.sensitivity.numerator, s.sensitivity.denominator) == (1, 2)
    assert (s.specificity.numerator, s.specificity.denominator) == (1, 2)
    assert s.scored_counts["different"]["false_positive"] == 1


decision_st = st.one_of(st.none(), st.sampled_from(list(Decision)))


@given(st.lists(st.tuples(st.sampled_from(list(SourceLabel)), decision_st), max_size=60))
def test_excluding_inconclusives_never_raises_fp_numerator(cells):
    recs = [ResponseRecord("e", str(i), t, d) for i, (t, d) in enumerate(cells)]
    excluded = summarize(recs, ScoringPolicy(InconclusiveTreatment.EXCLUDED)).false_positive.numerator
    as_error = summarize(recs, ScoringPolicy(InconclusiveTreatment.ERROR)).false_positive.numerator
    assert excluded <= as_error


def test_fp_histogram_fbi_ames_fixture():
    h = fp_histogram(study_fixtures.fbi_ames_observed())
    assert h.buckets() == (163, 5, 5)
    assert h.total_errors == 20
    # the published "13 examiners" cannot coexist with a 163/5/5 split of 173
    assert h.erring_examiners == 10


def test_fp_histogram_hand_counts():
    recs = []
    for e, k in enumerate([0, 1, 2, 3]):
        recs += [ResponseRecord(f"e{e}", f"i{j}", DIFF, Decision.IDENTIFICATION if j < k else Decision.EXCLUSION)
                 for j in range(5)]
    h = fp_histogram(recs)
    assert h.buckets() == (1, 1, 2) and h.total_errors == 6 and h.erring_examiners == 3
    correct = [ResponseRecord(f"e{e}", "i", DIFF, Decision.EXCLUSION) for e in range(7)]
    assert fp_histogram(correct).buckets() == (7, 0, 0)


@given(st.lists(st.tuples(st.integers(0, 6), st.sampled_from(list(SourceLabel)), decision_st), max_size=80))
def test_histogram_buckets_cover_scored_examiners(cells):
    recs = [ResponseRecord(f"e{e}", str(i), t, d) for i, (e, t, d) in enumerate(cells)]
    scored = {r.examiner_id for r in recs if r.truth is DIFF and r.decision is not None}
    assert sum(fp_histogram(recs).buckets()) == len(scored)


@pytest.mark.parametrize("p, expected", [(0.00705, 0.7), (0.00715, 0.7), (0.0125, 1.3), (0.0365, 3.7), (0.1795, 18.0)])
def test_round_pct_half_away_from_zero(p, expected):
    assert round_pct(p) == expected
