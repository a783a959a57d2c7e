from collections import Counter

import pandas as pd
import pytest
from hypothesis import given, strategies as st

from linkstress.corruption import (DISPROPORTIONATE, EQUAL_EXPOSURE, UNIFORM, CorruptionSetting,
                                   allocate_disproportionate, apply_corruption, corrupt_dataset,
                                   corruption_status, default_group_weights, largest_remainder,
                                   make_rng, plan_exposure, round_half_up, sample_mechanism)
from linkstress.errors import InfeasibleBudget, MissingGroupProfile
from linkstress.profiling import (POOLED, POSITIONS, TYPES, ErrorProfile,
                                  classify_edit, load_reference_marginals,
                                  profile_from_marginals)
from linkstress.synth import SynthSpec, synth_corpus

from .fixtures import SETTING3_FIXTURE, setting3_dataset


@pytest.fixture(scope="module")
def corpus():
    return synth_corpus(SynthSpec.default(4000, seed=3))


@pytest.fixture(scope="module")
def profiles():
    marg = load_reference_marginals()
    return {f: profile_from_marginals(marg[f]) for f in ("forename", "surname")}


def test_setting_validation():
    with pytest.raises(ValueError):
        CorruptionSetting(UNIFORM, 0.1, {"A": 1.0})
    with pytest.raises(ValueError):
        CorruptionSetting(DISPROPORTIONATE, 0.1)
    with pytest.raises(ValueError):
        CorruptionSetting("bogus")


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.4999)] == [1, 2, 3, 2]


def test_two_group_largest_remainder():
    # rescaled (2/3, 1/3) of 10 -> 6.67, 3.33 -> (7, 3)
    assert allocate_disproportionate(10, {"A": 0.2, "B": 0.1}, {"A": 50, "B": 50}) == \
        {"A": 7, "B": 3}


def test_setting3_fixture_allocation():
    sizes, weights, expected = SETTING3_FIXTURE
    assert allocate_disproportionate(20, weights, sizes) == expected
    ds = setting3_dataset()
    plan = plan_exposure(CorruptionSetting(DISPROPORTIONATE, 0.10, weights, 9), ds, "forename")
    assert plan.total == 20
    assert plan.counts == expected


def test_infeasible_budget():
    with pytest.raises(InfeasibleBudget):
        allocate_disproportionate(11, {"A": 1.0, "B": 1.0}, {"A": 5, "B": 5})


@given(st.integers(0, 200), st.dictionaries(st.sampled_from("ABCDEFG"),
                                            st.floats(0.01, 5.0), min_size=1))
def test_largest_remainder_properties(total, weights):
    alloc = largest_remainder(total, weights)
    assert sum(alloc.values()) == total
    quota = {k: total * w / sum(weights.values()) for k, w in weights.items()}
    assert all(abs(alloc[k] - quota[k]) < 1 + 1e-9 for k in weights)


@given(st.dictionaries(st.sampled_from("ABCDEF"), st.tuples(st.floats(0.05, 1.0),
                                                            st.integers(0, 60)), min_size=1),
       st.floats(0, 1))
def test_allocation_respects_capacity(groups, share):
    weights = {g: w for g, (w, _) in groups.items()}
    cap = {g: c for g, (_, c) in groups.items()}
    budget = int(share * sum(cap.values()))
    alloc = allocate_disproportionate(budget, weights, cap)
    assert sum(alloc.values()) == budget
    assert all(0 <= alloc[g] <= cap[g] for g in cap)


def test_uniform_and_equal_exposure_counts(corpus):
    n = len(corpus)
    plan = plan_exposure(CorruptionSetting(UNIFORM, 0.10, None, 1), corpus, "surname")
    assert plan.total == round_half_up(0.10 * n) == len(plan.selected)
    plan = plan_exposure(CorruptionSetting(EQUAL_EXPOSURE, 0.10, None, 1), corpus, "forename")
    sizes = corpus["ethnic_group"].value_counts()
    for g, k in plan.counts.items():
        assert k == round_half_up(0.10 * sizes[g])


def test_uniform_hundred():
    ds = pd.DataFrame({"id": range(100), "forename": ["ANNA"] * 100,
                       "ethnic_group": ["A"] * 50 + ["B"] * 50})
    plan = plan_exposure(CorruptionSetting(UNIFORM, 0.10, None, 4), ds, "forename")
    assert plan.total == 10 and len(set(plan.selected)) == 10


def test_blank_names_ineligible():
    ds = pd.DataFrame({"id": range(10), "forename": ["ANNA"] * 5 + [""] * 5,
                       "ethnic_group": ["A"] * 10})
    plan = plan_exposure(CorruptionSetting(UNIFORM, 0.4, None, 4), ds, "forename")
    assert plan.total == 2 and plan.eligible == {"A": 5}
    assert all(i < 5 for i in plan.selected)


def test_apply_corruption_examples():
    r = apply_corruption("MARIA", ("del", 1, "start"), make_rng(1))
    assert r.corrupted == "ARIA" and not r.fallback_flag
    r = apply_corruption("JON", ("del", 4, "across"), make_rng(1))
    assert r.fallback_flag
    assert len(r.script) <= 2
    assert r.corrupted != "JON"


@pytest.mark.parametrize("t", TYPES)
@pytest.mark.parametrize("pos", POSITIONS)
def test_apply_corruption_realises_cell(t, pos):
    rng = make_rng(7, t, pos)
    for name in ("ELIZABETH", "CHRISTOPHER", "MARGARET"):
        for bucket in (1, 2, 3):
            r = apply_corruption(name, (t, bucket, pos), rng)
            assert r.corrupted != name
            if not r.fallback_flag:
                c = classify_edit(name, r.corrupted)
                assert (c.primary_type, c.bucket, c.position) == (t, bucket, pos)


def test_seven_plus_is_exactly_seven():
    r = apply_corruption("BARTHOLOMEW", ("ins", 7, "across"), make_rng(2))
    assert not r.fallback_flag
    assert len(r.script) == 7


def test_sample_mechanism_frequencies():
    profile = ErrorProfile({"G": {("del", 1, "start"): 0.5, ("ins", 2, "end"): 0.3,
                                  ("rep", 1, "across"): 0.2}})
    rng = make_rng(99)
    draws = Counter(sample_mechanism(profile, "G", rng) for _ in range(100_000))
    for cell, p in profile.distribution("G").items():
        assert abs(draws[cell] / 100_000 - p) < 0.01


def test_sample_mechanism_pooled_and_missing():
    profile = ErrorProfile({"G": {("del", 1, "start"): 1.0},
                            POOLED: {("ins", 1, "end"): 1.0}})
    assert sample_mechanism(profile, "G", make_rng(1)) == ("del", 1, "start")
    assert sample_mechanism(profile, "G", make_rng(1), pooled=True) == ("ins", 1, "end")
    assert sample_mechanism(profile, "H", make_rng(1)) == ("ins", 1, "end")
    with pytest.raises(MissingGroupProfile):
        sample_mechanism(ErrorProfile({"G": {("del", 1, "start"): 1.0}}), "H", make_rng(1))


def test_rate_zero_is_identity(corpus, profiles):
    out, audit = corrupt_dataset(corpus, CorruptionSetting(UNIFORM, 0.0, None, 1), profiles)
    assert out.equals(corpus)
    assert not audit["exposed"].any()


def test_corrupt_dataset_contract(corpus, profiles):
    setting = CorruptionSetting(DISPROPORTIONATE, 0.10, default_group_weights(), 12)
    out, audit = corrupt_dataset(corpus, setting, profiles)
    out2, audit2 = corrupt_dataset(corpus, setting, profiles)
    assert out.equals(out2) and audit.equals(audit2)
    for col in ("id", "birth_year", "gender", "ethnic_group"):
        assert out[col].equals(corpus[col])
    assert len(audit) == 2 * len(corpus)
    exposed = audit[audit["exposed"]]
    assert (exposed["original"] != exposed["corrupted"]).all()
    unexposed = audit[~audit["exposed"]]
    assert (unexposed["type"] == "").all() and (unexposed["script"] == "").all()
    # audit exposure marginals reproduce the plan
    for fld in ("forename", "surname"):
        plan = plan_exposure(setting, corpus, fld)
        got = exposed[exposed["field"] == fld].groupby("group").size()
        assert {g: int(got.get(g, 0)) for g in plan.counts} == plan.counts


def test_record_corruption_independent_of_order(corpus, profiles):
    setting = CorruptionSetting(EQUAL_EXPOSURE, 0.10, None, 5)
    out, _ = corrupt_dataset(corpus, setting, profiles)
    shuffled = corpus.sample(frac=1.0, random_state=1).reset_index(drop=True)
    out2, _ = corrupt_dataset(shuffled, setting, profiles)
    a = out.set_index("id").sort_index()
    b = out2.set_index("id").sort_index()
    assert a.equals(b)


def test_corruption_status():
    audit = pd.DataFrame({"id": [1, 1, 2, 2, 3, 3, 4, 4],
                          "field": ["forename", "surname"] * 4,
                          "exposed": [True, True, True, False, False, True, False, False]})
    s = corruption_status(audit)
    assert list(s.loc[[1, 2, 3, 4]]) == ["both", "forename_only", "surname_only",
                                         "uncorrupted"]
