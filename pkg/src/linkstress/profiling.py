"""Within-person name discrepancies from paired snapshots, their edit
classification, and per-group empirical error profiles.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DuplicateId, EmptyGroup, IdenticalInputs
from .strings import (DELETION, INSERTION, SUBSTITUTION, EditOp, edit_script,
                      jaro_winkler)

log = logging.getLogger(__name__)

NAME_FIELDS = ("forename", "surname")
TYPES = ("del", "ins", "rep")
BUCKETS = (1, 2, 3, 4, 5, 6, 7)
POSITIONS = ("start", "first_half", "second_half", "end", "across")
POOLED = "__pooled__"

KIND_LABEL = {DELETION: "del", INSERTION: "ins", SUBSTITUTION: "rep"}
LABEL_KIND = {v: k for k, v in KIND_LABEL.items()}
# modal-type tie-break order
_TYPE_PRIORITY = {"rep": 0, "del": 1, "ins": 2}


def bucket_label(bucket: int) -> str:
    return "7+" if bucket >= 7 else str(bucket)


def parse_bucket(label) -> int:
    return 7 if str(label) == "7+" else int(label)


@dataclass(frozen=True)
class EditClass:
    type_pattern: frozenset
    bucket: int
    position: str
    primary_type: str

    @property
    def cell(self) -> tuple[str, int, str]:
        return (self.primary_type, self.bucket, self.position)


@dataclass(frozen=True)
class DiscrepancyRecord:
    person_id: object
    field: str
    value_a: str
    value_b: str
    jw: float
    lev: int
    type_pattern: frozenset
    distance_bucket: int
    position: str
    primary_type: str

    @property
    def cell(self) -> tuple[str, int, str]:
        return (self.primary_type, self.distance_bucket, self.position)


def primary_type(ops: Sequence[EditOp]) -> str:
    counts = Counter(KIND_LABEL[op.kind] for op in ops)
    return min(counts, key=lambda t: (-counts[t], _TYPE_PRIORITY[t]))


def classify_positions(ops: Sequence[EditOp], target_length: int) -> str:
    if not ops:
        raise IdenticalInputs("no edits to classify")
    positions = [op.position for op in ops]
    last = target_length - 1
    if all(p == 0 for p in positions):
        return "start"
    if all(p == last or (op.kind == DELETION and p == target_length)
           for op, p in zip(ops, positions)):
        return "end"
    scale = max(target_length - 1, 1)
    normalised = [p / scale for p in positions]
    if all(x < 0.5 for x in normalised):
        return "first_half"
    if all(x >= 0.5 for x in normalised):
        return "second_half"
    return "across"


def classify_script(ops: Sequence[EditOp], target_length: int) -> EditClass:
    return EditClass(
        type_pattern=frozenset(op.kind for op in ops),
        bucket=min(len(ops), 7),
        position=classify_positions(ops, target_length),
        primary_type=primary_type(ops),
    )


def classify_edit(a: str, b: str) -> EditClass:
    if a == b:
        raise IdenticalInputs(f"{a!r} and {b!r} are identical")
    return classify_script(edit_script(a, b), len(b))


def _index_unique(df: pd.DataFrame) -> pd.DataFrame:
    dup = df["id"].duplicated()
    if dup.any():
        raise DuplicateId(df.loc[dup, "id"].iloc[0])
    return df.set_index("id", drop=False)


def pair_snapshots(snap_a: pd.DataFrame, snap_b: pd.DataFrame,
                   fields: Sequence[str] = NAME_FIELDS) -> list[DiscrepancyRecord]:
    """Link two snapshots on ``id`` and emit one record per differing name field.

    Blank values on either side are skipped; they are missingness, not edits.
    """
    a = _index_unique(snap_a)
    b = _index_unique(snap_b)
    common = a.index.intersection(b.index, sort=False)
    common = sorted(common, key=_sort_key)
    out: list[DiscrepancyRecord] = []
    for field in fields:
        va = a.loc[common, field]
        vb = b.loc[common, field]
        for pid, x, y in zip(common, va.tolist(), vb.tolist()):
            if not x or not y or x == y:
                continue
            ops = edit_script(x, y)
            cls = classify_script(ops, len(y))
            out.append(DiscrepancyRecord(pid, field, x, y, jaro_winkler(x, y), len(ops),
                                         cls.type_pattern, cls.bucket, cls.position,
                                         cls.primary_type))
    return out


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, np.integer)) else (1, 0, str(v))


class ErrorProfile:
    """Per-group joint distribution over (type, bucket, position) cells."""

    def __init__(self, tables: Mapping[str, Mapping[tuple, float]]):
        self._cells: dict[str, list[tuple]] = {}
        self._probs: dict[str, np.ndarray] = {}
        for group, table in tables.items():
            cells = sorted((c for c, p in table.items() if p > 0), key=_cell_order)
            probs = np.array([table[c] for c in cells], dtype=float)
            if probs.size == 0 or np.any(probs < 0):
                raise ValueError(f"invalid distribution for group {group!r}")
            probs = probs / probs.sum()
            self._cells[group] = cells
            self._probs[group] = probs

    @property
    def groups(self) -> list[str]:
        return list(self._cells)

    def __contains__(self, group) -> bool:
        return group in self._cells

    def cells(self, group) -> list[tuple]:
        return list(self._cells[group])

    def probabilities(self, group) -> np.ndarray:
        return self._probs[group].copy()

    def distribution(self, group) -> dict[tuple, float]:
        return dict(zip(self._cells[group], self._probs[group].tolist()))

    def marginals(self, group) -> dict[str, dict]:
        out = {"type": dict.fromkeys(TYPES, 0.0),
               "bucket": {bucket_label(b): 0.0 for b in BUCKETS},
               "position": dict.fromkeys(POSITIONS, 0.0)}
        for (t, b, pos), p in zip(self._cells[group], self._probs[group]):
            out["type"][t] += p
            out["bucket"][bucket_label(b)] += p
            out["position"][pos] += p
        return out

    def to_dict(self) -> dict:
        return {g: {"cells": [{"type": t, "bucket": bucket_label(b), "position": pos,
                               "p": float(p)}
                              for (t, b, pos), p in zip(self._cells[g], self._probs[g])]}
                for g in self._cells}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ErrorProfile":
        return cls({g: {(c["type"], parse_bucket(c["bucket"]), c["position"]): float(c["p"])
                        for c in body["cells"]}
                    for g, body in d.items()})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ErrorProfile":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _cell_order(cell):
    t, b, pos = cell
    return (TYPES.index(t), b, POSITIONS.index(pos))


def build_profile(discrepancies: Iterable[DiscrepancyRecord],
                  group_of: Mapping | None,
                  groups: Sequence[str] | None = None,
                  fallback_to_pooled: bool = False) -> ErrorProfile:
    """Normalise joint cell counts per group; the pooled profile is always added.

    ``group_of`` maps person id to group (``None`` profiles only the pool).
    ``groups`` lists groups that must be present; a group with no
    discrepancies raises :class:`EmptyGroup` unless ``fallback_to_pooled``.
    """
    counts: dict[str, Counter] = defaultdict(Counter)
    pooled: Counter = Counter()
    for rec in discrepancies:
        pooled[rec.cell] += 1
        if group_of is not None:
            counts[group_of[rec.person_id]][rec.cell] += 1
    if not pooled:
        raise EmptyGroup(POOLED)

    tables: dict[str, dict] = {}
    wanted = list(groups) if groups is not None else sorted(counts, key=str)
    for g in wanted:
        if counts.get(g):
            tables[g] = _normalise(counts[g])
        elif fallback_to_pooled:
            log.warning("group %r has no discrepancies; using the pooled profile", g)
            tables[g] = _normalise(pooled)
        else:
            raise EmptyGroup(g)
    tables[POOLED] = _normalise(pooled)
    return ErrorProfile(tables)


def _normalise(counter: Counter) -> dict:
    total = sum(counter.values())
    return {cell: n / total for cell, n in counter.items()}


def profile_from_marginals(marginals: Mapping[str, Mapping],
                           pooled_weights: Mapping[str, float] | None = None) -> ErrorProfile:
    """Joint profile as the product of type, bucket and position marginals.

    Used when only marginal tables are available.  The pooled profile is
    the (optionally weighted) mixture of the group profiles.
    """
    tables = {}
    for g, m in marginals.items():
        t = _renorm(m["type"])
        b = _renorm(m["bucket"])
        pos = _renorm(m["position"])
        tables[g] = {(ti, parse_bucket(bi), pi): t[ti] * b[bi] * pos[pi]
                     for ti in t for bi in b for pi in pos}
    weights = dict(pooled_weights) if pooled_weights else dict.fromkeys(tables, 1.0)
    total = sum(weights[g] for g in tables)
    pooled: dict = defaultdict(float)
    for g, table in tables.items():
        for cell, p in table.items():
            pooled[cell] += weights[g] / total * p
    tables[POOLED] = dict(pooled)
    return ErrorProfile(tables)


def _renorm(d: Mapping[str, float]) -> dict:
    total = float(sum(d.values()))
    return {k: float(v) / total for k, v in d.items()}


def load_reference_marginals() -> dict:
    """Reference forename/surname error-profile marginals by ethnic group."""
    text = resources.files("linkstress.data").joinpath(
        "reference_error_marginals.json").read_text(encoding="utf-8")
    return json.loads(text)


def op_position_category(position: int, target_length: int) -> str:
    if position == 0:
        return "start"
    if position >= target_length - 1:
        return "end"
    return "first_half" if position / max(target_length - 1, 1) < 0.5 else "second_half"


class CharInventory:
    """Inserted/substituted characters observed in within-person edits,
    tallied by where in the name they occurred."""

    def __init__(self, counts: Mapping[str, Mapping[str, int]] | None = None):
        self.counts = {k: Counter(v) for k, v in (counts or {}).items()}

    @classmethod
    def learn(cls, discrepancies: Iterable[DiscrepancyRecord]) -> "CharInventory":
        counts: dict[str, Counter] = defaultdict(Counter)
        for rec in discrepancies:
            for op in edit_script(rec.value_a, rec.value_b):
                if op.kind != DELETION and op.char.isalpha():
                    counts[op_position_category(op.position, len(rec.value_b))][op.char] += 1
        return cls(counts)

    def draw(self, category: str, rng: np.random.Generator, exclude: str = "") -> str:
        counter = self.counts.get(category)
        if counter:
            chars = sorted(c for c in counter if c != exclude)
            if chars:
                w = np.array([counter[c] for c in chars], dtype=float)
                return chars[int(rng.choice(len(chars), p=w / w.sum()))]
        return uniform_letter(rng, exclude)

    def to_dict(self) -> dict:
        return {k: dict(sorted(v.items())) for k, v in sorted(self.counts.items())}


_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def uniform_letter(rng: np.random.Generator, exclude: str = "") -> str:
    letters = [c for c in _ALPHABET if c != exclude]
    return letters[int(rng.integers(len(letters)))]
