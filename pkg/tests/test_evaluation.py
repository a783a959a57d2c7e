import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from linkstress.errors import EmptyGroup, InsufficientData, MissingGold
from linkstress.evaluation import (OVERALL, aggregate_replicates, calibrate_threshold,
                                   classify_outcomes, mmr_at, outcome_counts,
                                   rates_and_disparities, stratified_sample, strata)

from .oracles import brute_force_threshold, t_half_width


def decisions(pairs):
    return pd.DataFrame({"left_id": [l for l, _ in pairs],
                         "right_id": pd.Series([r for _, r in pairs], dtype=object)})


def test_hand_case_rates():
    # ten records: 5 correct, 2 wrong links, 3 unlinked
    pairs = [(i, i) for i in range(5)] + [(5, 9), (6, 0)] + [(7, None), (8, None),
                                                               (9, None)]
    out = classify_outcomes(decisions(pairs))
    counts = outcome_counts(out, dict.fromkeys(range(10), "G"))
    assert counts.loc["G", ["n", "correct", "false_match", "missed"]].tolist() == [10, 5, 2, 3]
    rates = rates_and_disparities(counts, "G")
    assert rates.loc[OVERALL, "fmr"] == pytest.approx(0.2)
    assert rates.loc[OVERALL, "mmr"] == pytest.approx(0.3)


def test_perfect_and_empty_linkage():
    ids = list(range(6))
    counts = outcome_counts(classify_outcomes(decisions([(i, i) for i in ids])),
                            dict.fromkeys(ids, "G"))
    r = rates_and_disparities(counts, "G")
    assert r.loc["G", "fmr"] == 0 and r.loc["G", "mmr"] == 0
    counts = outcome_counts(classify_outcomes(decisions([(i, None) for i in ids])),
                            dict.fromkeys(ids, "G"))
    r = rates_and_disparities(counts, "G")
    assert r.loc["G", "fmr"] == 0 and r.loc["G", "mmr"] == 1


def test_missing_gold():
    with pytest.raises(MissingGold):
        classify_outcomes(decisions([(1, 1)]), gold={2: 2})


def test_disparities_and_absent_groups():
    counts = pd.DataFrame({"n": [100, 50], "correct": [80, 30], "false_match": [5, 5],
                           "missed": [15, 15]}, index=["Ref", "B"])
    r = rates_and_disparities(counts, "Ref", ["Ref", "B", "Empty"])
    assert r.loc["Ref", "mmr_disparity_pp"] == 0.0
    assert r.loc["B", "mmr_disparity_pp"] == pytest.approx(15.0)
    assert r.loc["B", "fmr_disparity_pp"] == pytest.approx(5.0)
    assert math.isnan(r.loc["Empty", "mmr"])
    with pytest.raises(EmptyGroup):
        rates_and_disparities(counts, "Missing")


@given(st.lists(st.tuples(st.integers(1, 200), st.integers(0, 200), st.integers(0, 200)),
                min_size=2, max_size=6), st.integers(0, 20))
def test_disparity_translation_invariance(rows, shift):
    # n, false, missed per group; add `shift` percent to every group's rates
    groups = [f"G{i}" for i in range(len(rows))]
    n = [r[0] * 100 for r in rows]
    fm = [min(r[1], r[0] * 40) for r in rows]
    ms = [min(r[2], r[0] * 40) for r in rows]
    base = pd.DataFrame({"n": n, "correct": [a - b - c for a, b, c in zip(n, fm, ms)],
                         "false_match": fm, "missed": ms}, index=groups)
    moved = base.copy()
    moved["missed"] = moved["missed"] + moved["n"] * shift // 100
    moved["correct"] = moved["n"] - moved["false_match"] - moved["missed"]
    a = rates_and_disparities(base, "G0")
    b = rates_and_disparities(moved, "G0")
    assert np.allclose(a.loc[groups, "mmr_disparity_pp"], b.loc[groups, "mmr_disparity_pp"])
    assert a.loc["G0", "mmr_disparity_pp"] == 0


def test_outcomes_partition():
    rng = np.random.default_rng(0)
    lids = np.arange(500)
    rids = np.where(rng.random(500) < 0.3, None, np.where(rng.random(500) < 0.8, lids, 0))
    out = classify_outcomes(decisions(list(zip(lids, rids))))
    counts = outcome_counts(out, {i: f"G{i % 4}" for i in lids})
    assert (counts["correct"] + counts["false_match"] + counts["missed"] == counts["n"]).all()


def test_calibration_tie_goes_to_lower_threshold():
    # 50 records; thresholds give MMR 0.18 or 0.22 but nothing in between
    w = [1.0] * 9 + [2.0] * 2 + [3.0] * 39
    t = calibrate_threshold(w, 0.20)
    assert mmr_at(w, t) == pytest.approx(0.18)
    assert t == 2.0


def test_calibration_single_value_and_no_candidates():
    assert calibrate_threshold([5.0] * 10, 0.2) == -math.inf
    w = [-math.inf] * 3 + [1.0] * 7
    t = calibrate_threshold(w, 0.2)
    assert mmr_at(w, t) == pytest.approx(0.3)


def test_calibration_matches_brute_force():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        w = np.round(rng.normal(0, 3, n), int(rng.integers(0, 3)))
        w[rng.random(n) < 0.05] = -np.inf
        assert calibrate_threshold(w, 0.20) == brute_force_threshold(w, Fraction(1, 5))


def test_aggregate_replicates():
    s = aggregate_replicates([1, 2, 3, 4, 5])
    assert s.mean == 3.0
    # exact t_{0.975,4} = 2.7764451...; times sqrt(2.5)/sqrt(5)
    assert s.half_width == pytest.approx(1.96324, abs=1e-5)
    assert s.half_width == pytest.approx(t_half_width([1, 2, 3, 4, 5], 2.7764451051977987))
    assert s.ci_low <= s.mean <= s.ci_high
    same = aggregate_replicates([0.4] * 5)
    assert same.ci_low == same.ci_high == pytest.approx(0.4)
    with pytest.raises(InsufficientData):
        aggregate_replicates([1.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=10))
def test_interval_brackets_mean(values):
    s = aggregate_replicates(values)
    assert s.ci_low <= s.mean + 1e-9 and s.mean <= s.ci_high + 1e-9


def make_strata(sizes):
    rows, audit = [], []
    i = 0
    for (g, status), n in sizes.items():
        for _ in range(n):
            i += 1
            rows.append((i, g))
            fn = status in ("forename_only", "both")
            sn = status in ("surname_only", "both")
            audit += [(i, "forename", fn), (i, "surname", sn)]
    return (pd.DataFrame(rows, columns=["id", "ethnic_group"]),
            pd.DataFrame(audit, columns=["id", "field", "exposed"]))


def test_stratified_sample_examples():
    ds, audit = make_strata({("A", "uncorrupted"): 1000, ("B", "uncorrupted"): 1000})
    s = stratified_sample(ds, audit, 0.05, seed=1)
    assert s["ethnic_group"].value_counts().to_dict() == {"A": 50, "B": 50}
    assert len(stratified_sample(ds, audit, 1.0, seed=1)) == 2000
    with pytest.raises(ValueError):
        stratified_sample(ds, audit, 0.0)


def test_stratified_sample_shares():
    ds, audit = make_strata({("A", "uncorrupted"): 700, ("A", "both"): 33,
                             ("B", "forename_only"): 250, ("B", "uncorrupted"): 17})
    s = stratified_sample(ds, audit, 0.1, seed=3)
    st_all = strata(ds, audit).groupby(["group", "status"]).size() / len(ds)
    st_s = strata(s, audit).groupby(["group", "status"]).size() / len(s)
    assert (st_all - st_s.reindex(st_all.index, fill_value=0)).abs().max() < 0.005
    # order preserved and deterministic
    assert s["id"].is_monotonic_increasing
    assert s.equals(stratified_sample(ds, audit, 0.1, seed=3))
