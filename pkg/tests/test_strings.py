import random

import pytest
from hypothesis import given, settings, strategies as st

from linkstress.strings import (DELETION, INSERTION, SUBSTITUTION, EditOp, apply_script,
                                edit_script, jaro, jaro_winkler, levenshtein, normalise_name)

from .oracles import dp_levenshtein, jaro_oracle, jaro_winkler_oracle

names = st.text(alphabet="ABCDEHIMNORST", max_size=12)


def random_pairs(n, seed, alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", max_len=12):
    rnd = random.Random(seed)
    out = []
    for _ in range(n):
        a = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, max_len)))
        b = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, max_len)))
        out.append((a, b))
    return out


@pytest.mark.parametrize("a,b,d", [("ANNA", "ANNA", 0), ("KITTEN", "SITTING", 3),
                                   ("", "ABC", 3), ("ABC", "", 3), ("", "", 0)])
def test_levenshtein_examples(a, b, d):
    assert levenshtein(a, b) == d


def test_jaro_examples():
    assert jaro("MARTHA", "MARTHA") == 1.0
    assert jaro("MARTHA", "MARHTA") == pytest.approx(17 / 18, abs=1e-15)
    assert jaro("ABC", "XYZ") == 0.0
    assert jaro("", "") == 1.0
    assert jaro("", "A") == 0.0


def test_jaro_winkler_examples():
    # 17/18 + 3 * 0.1 * (1 - 17/18)
    assert jaro_winkler("MARTHA", "MARHTA") == pytest.approx(0.9611111111111111, abs=1e-12)
    assert jaro_winkler("X", "X") == 1.0
    assert jaro_winkler("ABCDEF", "ABCDXY") > jaro("ABCDEF", "ABCDXY")


def test_prefix_cap_is_four():
    # identical 6-character prefix only earns the 4-character bonus
    j = jaro("ABCDEFXX", "ABCDEFYY")
    assert jaro_winkler("ABCDEFXX", "ABCDEFYY") == pytest.approx(j + 0.4 * (1 - j), abs=1e-15)


@pytest.mark.parametrize("a,b,ops", [
    ("JON", "JOHN", [EditOp(INSERTION, 2, "H")]),
    ("ANNA", "ANNA", []),
    ("SMITH", "SMYTH", [EditOp(SUBSTITUTION, 2, "Y")]),
    ("MARIA", "ARIA", [EditOp(DELETION, 0, "M")]),
])
def test_edit_script_examples(a, b, ops):
    assert edit_script(a, b) == ops


def test_levenshtein_matches_dp_oracle():
    for a, b in random_pairs(1000, seed=1):
        assert levenshtein(a, b) == dp_levenshtein(a, b)


def test_jaro_matches_definition():
    for a, b in random_pairs(1000, seed=2, alphabet="ABCDE"):
        assert abs(jaro(a, b) - jaro_oracle(a, b)) <= 1e-12
        assert abs(jaro_winkler(a, b) - jaro_winkler_oracle(a, b)) <= 1e-12


def test_script_replay_on_random_pairs():
    for a, b in random_pairs(10_000, seed=3, alphabet="ABCDEFG"):
        ops = edit_script(a, b)
        assert len(ops) == levenshtein(a, b)
        assert apply_script(a, ops) == b


def test_script_tie_break_prefers_substitution():
    # "AB" -> "BA" can be two substitutions or a deletion plus an insertion
    ops = edit_script("AB", "BA")
    assert [op.kind for op in ops] == [SUBSTITUTION, SUBSTITUTION]


def test_normalise_name():
    assert normalise_name("  mary jo ") == "MARY JO"
    assert normalise_name(None) == ""
    assert normalise_name(float("nan")) == ""
    # decomposed e + combining acute composes to a single code point
    assert normalise_name("renée") == "RENÉE"


@given(names, names)
def test_jaro_properties(a, b):
    j, jw = jaro(a, b), jaro_winkler(a, b)
    assert 0.0 <= j <= 1.0 and 0.0 <= jw <= 1.0
    assert j == jaro(b, a)
    assert jw == jaro_winkler(b, a)
    assert jw >= j
    assert (jw == 1.0) == (a == b)


@given(names, names, names)
@settings(max_examples=200)
def test_levenshtein_metric(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    assert (levenshtein(a, b) == 0) == (a == b)


@given(names, names)
def test_script_replays(a, b):
    ops = edit_script(a, b)
    assert len(ops) == levenshtein(a, b)
    assert apply_script(a, ops) == b
