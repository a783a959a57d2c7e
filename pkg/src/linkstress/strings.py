"""String comparators and minimal edit scripts.

All comparators expect names that have already been through
:func:`normalise_name` (NFC, uppercase, trimmed).  They work on Unicode
code points, so a precomposed accented letter counts as one character.
"""

from __future__ import annotations

import unicodedata
from typing import NamedTuple, Sequence

INSERTION = "insertion"
DELETION = "deletion"
SUBSTITUTION = "substitution"

WINKLER_PREFIX_SCALE = 0.1
WINKLER_PREFIX_CAP = 4


class EditOp(NamedTuple):
    kind: str
    position: int  # index in the target string
    char: str  # inserted/substituted character, or the deleted one


def normalise_name(value) -> str:
    """NFC-normalise, uppercase and trim a raw name value.

    ``None`` and NaN become the empty string.
    """
    if value is None:
        return ""
    if isinstance(value, float) and value != value:
        return ""
    text = unicodedata.normalize("NFC", str(value)).strip().upper()
    # uppercasing can decompose (e.g. U+00DF), so re-compose
    text = unicodedata.normalize("NFC", text)
    return " ".join(text.split())


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def jaro(a: str, b: str) -> float:
    if a == b:
        return 1.0
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 0.0
    window = max(max(la, lb) // 2 - 1, 0)
    a_matched = [False] * la
    b_matched = [False] * lb
    matches = 0
    for i, ca in enumerate(a):
        lo = max(0, i - window)
        hi = min(lb, i + window + 1)
        for j in range(lo, hi):
            if not b_matched[j] and b[j] == ca:
                a_matched[i] = b_matched[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    b_seq = [b[j] for j in range(lb) if b_matched[j]]
    out_of_order = 0
    k = 0
    for i in range(la):
        if a_matched[i]:
            if a[i] != b_seq[k]:
                out_of_order += 1
            k += 1
    transpositions = out_of_order / 2
    return (matches / la + matches / lb + (matches - transpositions) / matches) / 3.0


def common_prefix_length(a: str, b: str, cap: int = WINKLER_PREFIX_CAP) -> int:
    n = 0
    for ca, cb in zip(a, b):
        if ca != cb or n == cap:
            break
        n += 1
    return n


def jaro_winkler(a: str, b: str, prefix_scale: float = WINKLER_PREFIX_SCALE) -> float:
    sim = jaro(a, b)
    if sim == 1.0:
        return sim
    ell = common_prefix_length(a, b)
    return sim + ell * prefix_scale * (1.0 - sim)


def _suffix_table(a: str, b: str) -> list[list[int]]:
    # table[i][j] = levenshtein(a[i:], b[j:])
    la, lb = len(a), len(b)
    table = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la + 1):
        table[i][lb] = la - i
    for j in range(lb + 1):
        table[la][j] = lb - j
    for i in range(la - 1, -1, -1):
        row, below = table[i], table[i + 1]
        ca = a[i]
        for j in range(lb - 1, -1, -1):
            row[j] = min(below[j + 1] + (ca != b[j]), below[j] + 1, row[j + 1] + 1)
    return table


def edit_script(a: str, b: str) -> list[EditOp]:
    """Return one minimal edit script turning ``a`` into ``b``.

    The script is built by walking the alignment left to right.  A free
    match is taken whenever it stays on an optimal path; otherwise the
    first optimal move in the order substitution, deletion, insertion is
    used.  Positions refer to indices in ``b``; a deletion is placed at
    the index of the next target character (``len(b)`` when past the
    end).
    """
    table = _suffix_table(a, b)
    la, lb = len(a), len(b)
    ops: list[EditOp] = []
    i = j = 0
    while i < la or j < lb:
        here = table[i][j]
        if i < la and j < lb:
            if a[i] == b[j] and table[i + 1][j + 1] == here:
                i += 1
                j += 1
                continue
            if table[i + 1][j + 1] + 1 == here:
                ops.append(EditOp(SUBSTITUTION, j, b[j]))
                i += 1
                j += 1
                continue
        if i < la and table[i + 1][j] + 1 == here:
            ops.append(EditOp(DELETION, j, a[i]))
            i += 1
            continue
        ops.append(EditOp(INSERTION, j, b[j]))
        j += 1
    return ops


def apply_script(a: str, ops: Sequence[EditOp]) -> str:
    """Replay an edit script (as produced by :func:`edit_script`) on ``a``."""
    out: list[str] = []
    i = 0
    for kind, position, char in ops:
        while len(out) < position:
            if i >= len(a):
                raise ValueError(f"edit position {position} is beyond the source")
            out.append(a[i])
            i += 1
        if kind == INSERTION:
            out.append(char)
        elif kind == DELETION:
            if i >= len(a):
                raise ValueError("deletion past the end of the source")
            i += 1
        elif kind == SUBSTITUTION:
            if i >= len(a):
                raise ValueError("substitution past the end of the source")
            out.append(char)
            i += 1
        else:
            raise ValueError(f"unknown edit kind {kind!r}")
    out.extend(a[i:])
    return "".join(out)
