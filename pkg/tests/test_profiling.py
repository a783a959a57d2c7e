import pandas as pd
import pytest
from hypothesis import given, strategies as st

from linkstress.errors import DuplicateId, EmptyGroup, IdenticalInputs
from linkstress.profiling import (POOLED, CharInventory, ErrorProfile, build_profile,
                                  classify_edit, load_reference_marginals, pair_snapshots,
                                  profile_from_marginals)
from linkstress.strings import DELETION, INSERTION, SUBSTITUTION, apply_script, edit_script


def snap(rows):
    return pd.DataFrame(rows, columns=["id", "forename", "surname", "birth_year", "gender",
                                       "ethnic_group"])


def test_classify_examples():
    c = classify_edit("JON", "JOHN")
    assert (c.type_pattern, c.bucket, c.position) == (frozenset({INSERTION}), 1, "second_half")
    c = classify_edit("MARIA", "ARIA")
    assert (c.type_pattern, c.bucket, c.position) == (frozenset({DELETION}), 1, "start")
    c = classify_edit("SMITH", "SMYTHE")
    assert c.type_pattern == frozenset({SUBSTITUTION, INSERTION}) and c.bucket == 2
    # Y at index 2 of 6 (0.4) and E at the final index
    assert c.position == "across"


def test_classify_end_and_buckets():
    assert classify_edit("ANNA", "ANNE").position == "end"
    assert classify_edit("ANNE", "ANN").position == "end"
    assert classify_edit("A", "BCDEFGHIJ").bucket == 7
    with pytest.raises(IdenticalInputs):
        classify_edit("ANNA", "ANNA")


def test_pair_snapshots():
    a = snap([(7, "JON", "DOE", 1980, "M", "X"), (8, "ANN", "LEE", 1970, "F", "X")])
    b = snap([(7, "JOHN", "DOE", 1980, "M", "X"), (9, "ANN", "LEE", 1970, "F", "X")])
    recs = pair_snapshots(a, b)
    assert len(recs) == 1
    r = recs[0]
    assert (r.person_id, r.field, r.value_a, r.value_b, r.lev) == (7, "forename", "JON",
                                                                    "JOHN", 1)
    assert pair_snapshots(a, snap([(1, "A", "B", 1, "F", "X")])) == []
    dup = snap([(7, "JON", "DOE", 1980, "M", "X"), (7, "JO", "DOE", 1980, "M", "X")])
    with pytest.raises(DuplicateId):
        pair_snapshots(dup, b)


def test_degenerate_profile():
    a = snap([(i, "MARIA", "X", 1, "F", "G") for i in range(5)])
    b = snap([(i, "ARIA", "X", 1, "F", "G") for i in range(5)])
    p = build_profile(pair_snapshots(a, b), {i: "G" for i in range(5)})
    assert p.distribution("G") == {("del", 1, "start"): 1.0}


def test_identical_groups_identical_profiles():
    a = snap([(i, "MARIA", "JONES", 1, "F", "G") for i in range(4)])
    b = snap([(i, "MARIE" if i % 2 else "ARIA", "JONES", 1, "F", "G") for i in range(4)])
    recs = pair_snapshots(a, b)
    p = build_profile(recs, {0: "G1", 1: "G1", 2: "G2", 3: "G2"})
    assert p.distribution("G1") == p.distribution("G2")


def test_empty_group_and_fallback():
    a = snap([(1, "MARIA", "X", 1, "F", "G")])
    b = snap([(1, "ARIA", "X", 1, "F", "G")])
    recs = pair_snapshots(a, b)
    with pytest.raises(EmptyGroup):
        build_profile(recs, {1: "G"}, groups=["G", "H"])
    p = build_profile(recs, {1: "G"}, groups=["G", "H"], fallback_to_pooled=True)
    assert p.distribution("H") == p.distribution(POOLED)


def test_reference_marginals_fixture():
    marg = load_reference_marginals()
    asian = marg["forename"]["Asian"]["type"]
    assert asian["del"] == pytest.approx(0.386, abs=1e-3)
    assert asian["ins"] == pytest.approx(0.411, abs=1e-3)
    assert asian["rep"] == pytest.approx(0.203, abs=1e-3)
    prof = profile_from_marginals(marg["forename"])
    for g in prof.groups:
        assert sum(prof.distribution(g).values()) == pytest.approx(1.0, abs=1e-9)


def test_profile_json_round_trip(tmp_path):
    a = snap([(i, n, "X", 1, "F", "G") for i, n in enumerate(["ANNA", "MARK", "JOHN"])])
    b = snap([(i, n, "X", 1, "F", "G") for i, n in enumerate(["ANA", "MARC", "JOHNNY"])])
    p = build_profile(pair_snapshots(a, b), {0: "G", 1: "G", 2: "G"})
    p.save(tmp_path / "p.json")
    q = ErrorProfile.load(tmp_path / "p.json")
    assert q.distribution("G") == pytest.approx(p.distribution("G"))


words = st.text(alphabet="ABCDEIOR", min_size=1, max_size=10)


@given(words, words)
def test_script_round_trip_classification(a, b):
    if a == b:
        return
    c = classify_edit(a, b)
    replay = apply_script(a, edit_script(a, b))
    assert classify_edit(a, replay) == c
    assert c.bucket == min(len(edit_script(a, b)), 7)


@given(st.lists(st.tuples(words, words), min_size=1, max_size=30))
def test_profile_sums_and_marginals(pairs):
    pairs = [(a, b) for a, b in pairs if a != b]
    if not pairs:
        return
    a = snap([(i, x, "S", 1, "F", "G") for i, (x, _) in enumerate(pairs)])
    b = snap([(i, y, "S", 1, "F", "G") for i, (_, y) in enumerate(pairs)])
    recs = pair_snapshots(a, b)
    p = build_profile(recs, {i: "G" for i in range(len(pairs))})
    dist = p.distribution("G")
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(v >= 0 for v in dist.values())
    marg = p.marginals("G")
    for t, share in marg["type"].items():
        assert share == pytest.approx(sum(v for c, v in dist.items() if c[0] == t))


def test_char_inventory_learns_inserted_letters():
    a = snap([(i, "JON", "X", 1, "M", "G") for i in range(3)])
    b = snap([(i, "JOHN", "X", 1, "M", "G") for i in range(3)])
    inv = CharInventory.learn(pair_snapshots(a, b))
    assert any("H" in chars for chars in inv.to_dict().values())
