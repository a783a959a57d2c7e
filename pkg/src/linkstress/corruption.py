"""Replicate name corruption under controlled exposure regimes.

Exposure (who gets corrupted) is allocated by exact counts; the
mechanism (how) is a (type, bucket, position) cell drawn from an
:class:`~linkstress.profiling.ErrorProfile` and realised as a concrete
edit that the profiler classifies back into the same cell.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import InfeasibleBudget, MissingGroupProfile
from .profiling import (LABEL_KIND, NAME_FIELDS, POOLED, POSITIONS, TYPES,
                        CharInventory, ErrorProfile, bucket_label, classify_script,
                        op_position_category, uniform_letter)
from .strings import edit_script

UNIFORM = "uniform"
EQUAL_EXPOSURE = "equal_exposure_ethnic_mechanism"
DISPROPORTIONATE = "disproportionate"
KINDS = (UNIFORM, EQUAL_EXPOSURE, DISPROPORTIONATE)
SETTING_KINDS = {1: UNIFORM, 2: EQUAL_EXPOSURE, 3: DISPROPORTIONATE}

MAX_ATTEMPTS = 40
_FIELD_CODE = {"forename": 1, "surname": 2}


@dataclass(frozen=True)
class CorruptionSetting:
    kind: str
    overall_rate: float = 0.10
    group_weights: Mapping[str, float] | None = None
    replicate_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown corruption setting {self.kind!r}")
        if not 0.0 <= self.overall_rate < 1.0:
            raise ValueError("overall_rate must lie in [0, 1)")
        if (self.group_weights is not None) != (self.kind == DISPROPORTIONATE):
            raise ValueError("group_weights are required for, and only for, "
                             "the disproportionate setting")
        if self.group_weights is not None and any(
                not w > 0 for w in self.group_weights.values()):
            raise ValueError("group weights must be positive")

    @property
    def uses_pooled_mechanism(self) -> bool:
        return self.kind == UNIFORM


def default_group_weights() -> dict[str, float]:
    """Initial relative exposure weights for the disproportionate setting."""
    text = resources.files("linkstress.data").joinpath(
        "exposure_weights.json").read_text(encoding="utf-8")
    return {g: v["initial"] for g, v in json.loads(text).items()}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Split ``total`` into integers proportional to ``weights``.

    Leftover units go to the largest fractional parts; ties go to the
    earlier key in sorted order.
    """
    keys = sorted(weights)
    w = np.array([weights[k] for k in keys], dtype=float)
    quotas = total * w / w.sum()
    floors = np.floor(quotas + 1e-12).astype(int)
    left = total - int(floors.sum())
    frac = quotas - floors
    order = sorted(range(len(keys)), key=lambda i: (-frac[i], i))
    for i in order[:left]:
        floors[i] += 1
    return {k: int(n) for k, n in zip(keys, floors)}


def allocate_disproportionate(budget: int, weights: Mapping[str, float],
                              capacity: Mapping[str, int]) -> dict[str, int]:
    """Weighted integer allocation with capacity caps.

    Weights are rescaled to sum to one and turned into counts by largest
    remainder; whatever exceeds a group's capacity is pooled and handed
    out again, by weight, among groups that still have room, until the
    budget is placed.
    """
    if budget > sum(capacity.values()):
        raise InfeasibleBudget(f"budget {budget} exceeds {sum(capacity.values())} "
                               "eligible records")
    alloc = dict.fromkeys(capacity, 0)
    remaining = budget
    open_groups = {g for g in capacity if capacity[g] > 0 and weights.get(g, 0) > 0}
    while remaining > 0:
        if not open_groups:
            raise InfeasibleBudget("no group with remaining capacity and positive weight")
        share = largest_remainder(remaining, {g: weights[g] for g in open_groups})
        remaining = 0
        for g, n in share.items():
            room = capacity[g] - alloc[g]
            take = min(n, room)
            alloc[g] += take
            remaining += n - take
            if alloc[g] >= capacity[g]:
                open_groups.discard(g)
    return alloc


@dataclass(frozen=True)
class ExposurePlan:
    field: str
    total: int
    counts: dict
    eligible: dict
    selected: tuple = ()


def is_eligible(value) -> bool:
    return isinstance(value, str) and any(c.isalpha() for c in value)


def _seed_words(*parts) -> list[int]:
    words = []
    for p in parts:
        if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
            words.append(int(p) & 0xFFFFFFFFFFFFFFFF)
        else:
            digest = hashlib.blake2b(str(p).encode("utf-8"), digest_size=8).digest()
            words.append(int.from_bytes(digest, "little"))
    return words


def make_rng(*parts) -> np.random.Generator:
    """Counter-based generator keyed by an arbitrary tuple of ids/labels."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_seed_words(*parts))))


def _sorted_ids(ids) -> list:
    return sorted(ids, key=lambda v: (0, v, "") if isinstance(v, (int, np.integer))
                  else (1, 0, str(v)))


def plan_exposure(setting: CorruptionSetting, dataset: pd.DataFrame,
                  field: str, group_col: str = "ethnic_group") -> ExposurePlan:
    """Decide how many, and which, records have ``field`` corrupted."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    ok = dataset[field].map(is_eligible)
    elig = dataset.loc[ok, ["id", group_col]]
    by_group = {g: _sorted_ids(ids) for g, ids in elig.groupby(group_col)["id"]}
    all_groups = sorted(dataset[group_col].unique(), key=str)
    eligible = {g: len(by_group.get(g, [])) for g in all_groups}
    n = sum(eligible.values())
    fcode = _FIELD_CODE.get(field, field)

    if setting.kind == UNIFORM:
        budget = round_half_up(setting.overall_rate * n)
        if budget > n:
            raise InfeasibleBudget(f"budget {budget} exceeds {n} eligible records")
        pool = _sorted_ids(elig["id"].tolist())
        rng = make_rng(setting.replicate_seed, "exposure", fcode)
        picked = [pool[i] for i in sorted(rng.choice(len(pool), budget, replace=False))]
        pick_set = set(picked)
        counts = {g: sum(i in pick_set for i in by_group.get(g, [])) for g in all_groups}
        return ExposurePlan(field, budget, counts, eligible, tuple(_sorted_ids(picked)))

    if setting.kind == EQUAL_EXPOSURE:
        counts = {g: round_half_up(setting.overall_rate * eligible[g]) for g in all_groups}
    else:
        weights = dict(setting.group_weights)
        missing = [g for g in all_groups if g not in weights]
        if missing:
            raise ValueError(f"no exposure weight for groups {missing}")
        budget = round_half_up(setting.overall_rate * n)
        counts = allocate_disproportionate(
            budget, {g: weights[g] for g in all_groups}, eligible)

    picked = []
    for g in all_groups:
        ids = by_group.get(g, [])
        if counts[g] > len(ids):
            raise InfeasibleBudget(f"group {g!r} cannot take {counts[g]} corruptions")
        rng = make_rng(setting.replicate_seed, "exposure", fcode, g)
        picked.extend(ids[i] for i in sorted(rng.choice(len(ids), counts[g], replace=False)))
    return ExposurePlan(field, sum(counts.values()), counts, eligible,
                        tuple(_sorted_ids(picked)))


def sample_mechanism(profile: ErrorProfile, group, rng: np.random.Generator,
                     pooled: bool = False, allow_fallback: bool = True) -> tuple:
    """Draw one (type, bucket, position) cell for a record of ``group``."""
    key = POOLED if pooled else group
    if key not in profile:
        if not allow_fallback or POOLED not in profile:
            raise MissingGroupProfile(group)
        key = POOLED
    cells = profile.cells(key)
    idx = rng.choice(len(cells), p=profile.probabilities(key))
    return cells[int(idx)]


@dataclass
class CorruptionResult:
    corrupted: str
    script: list
    fallback_flag: bool
    realised_cell: tuple


def _half_ranges(length: int) -> tuple[list[int], list[int]]:
    scale = max(length - 1, 1)
    first = [i for i in range(length) if i / scale < 0.5]
    second = [i for i in range(length) if i / scale >= 0.5]
    return first, second


def _target_slots(position: str, length: int, d: int, rng) -> list[int] | None:
    """Candidate edit indices (in a string of ``length``) for one attempt."""
    first, second = _half_ranges(length)
    if position == "start":
        return [0] * d
    if position == "end":
        return [length - 1] * d
    if position == "first_half":
        pool = first
    elif position == "second_half":
        pool = second
    else:
        if d < 2 or not first or not second:
            return None
        a = int(rng.choice(first))
        b = int(rng.choice(second))
        rest = [i for i in range(length) if i not in (a, b)]
        if d - 2 > len(rest):
            return None
        extra = rng.choice(len(rest), d - 2, replace=False) if d > 2 else []
        return sorted([a, b] + [rest[int(k)] for k in extra])
    if d > len(pool):
        return None
    return sorted(int(pool[int(k)]) for k in rng.choice(len(pool), d, replace=False))


def _feasible(kind: str, d: int, position: str, n: int) -> bool:
    if kind == "del" and d > n - 1:
        return False
    if kind == "rep" and d > n:
        return False
    if position in ("start", "end") and kind != "del" and d != 1:
        return False
    if position == "across" and d < 2:
        return False
    return True


def _draw_char(inventory, category, rng, exclude=""):
    if inventory is not None:
        return inventory.draw(category, rng, exclude)
    return uniform_letter(rng, exclude)


def _attempt(name: str, kind: str, d: int, position: str, rng, inventory) -> str | None:
    n = len(name)
    if kind == "rep":
        slots = _target_slots(position, n, d, rng)
        if slots is None or len(set(slots)) != d:
            return None
        chars = list(name)
        for i in slots:
            chars[i] = _draw_char(inventory, op_position_category(i, n), rng, chars[i])
        return "".join(chars)
    if kind == "ins":
        m = n + d
        slots = _target_slots(position, m, d, rng)
        if slots is None or len(set(slots)) != d:
            return None
        src = iter(name)
        slot_set = set(slots)
        return "".join(_draw_char(inventory, op_position_category(i, m), rng)
                       if i in slot_set else next(src) for i in range(m))
    # deletion: choose source indices; the target position of a deletion is
    # its source index minus earlier deletions
    m = n - d
    if position == "start":
        drop = set(range(d))
    elif position == "end":
        drop = set(range(n - d, n))
    else:
        slots = _target_slots(position, n, d, rng)
        if slots is None or len(set(slots)) != d:
            return None
        drop = set(slots)
    if m < 1:
        return None
    return "".join(c for i, c in enumerate(name) if i not in drop)


def _ladder(kind: str, bucket: int, position: str):
    others = [p for p in POSITIONS if p != position]
    stages = [(kind, position)] + [(kind, p) for p in others]
    for k in TYPES:
        if k != kind:
            stages += [(k, position)] + [(k, p) for p in others]
    for k, p in stages:
        for d in range(bucket, 0, -1):
            yield k, d, p


def apply_corruption(name: str, cell: tuple, rng: np.random.Generator,
                     inventory: CharInventory | None = None,
                     max_attempts: int = MAX_ATTEMPTS) -> CorruptionResult:
    """Edit ``name`` so that its classification matches ``cell``.

    Candidates are generated at random and checked with the profiler's
    classifier.  If the cell cannot be realised, the request is degraded
    (distance first, then position, then type) and ``fallback_flag`` set.
    """
    if not name:
        raise ValueError("cannot corrupt an empty name")
    kind, bucket, position = cell
    bucket = min(int(bucket), 7)
    for k, d, p in _ladder(kind, bucket, position):
        if not _feasible(k, d, p, len(name)):
            continue
        target = (k, d, p)
        for _ in range(max_attempts):
            candidate = _attempt(name, k, d, p, rng, inventory)
            if candidate is None:
                break
            if candidate == name:
                continue
            ops = edit_script(name, candidate)
            got = classify_script(ops, len(candidate))
            if got.cell == target and len(got.type_pattern) == 1:
                return CorruptionResult(candidate, ops, target != (kind, bucket, position),
                                        target)
    # single substitution of the first character always classifies as start
    first = uniform_letter(rng, name[0])
    candidate = first + name[1:]
    ops = edit_script(name, candidate)
    return CorruptionResult(candidate, ops, True, classify_script(ops, len(candidate)).cell)


AUDIT_COLUMNS = ["id", "field", "exposed", "type", "bucket", "position", "fallback",
                 "original", "corrupted"]


def corrupt_dataset(dataset: pd.DataFrame, setting: CorruptionSetting,
                    profiles: Mapping[str, ErrorProfile],
                    inventories: Mapping[str, CharInventory] | None = None,
                    fields: Sequence[str] = NAME_FIELDS,
                    group_col: str = "ethnic_group") -> tuple[pd.DataFrame, pd.DataFrame]:
    """Corrupt forename and surname independently; return (dataset, audit).

    Every record appears once per field in the audit, sorted by id.
    Non-name columns are untouched.
    """
    out = dataset.copy()
    rows = []
    order = _sorted_ids(dataset["id"].tolist())
    for fld in fields:
        plan = plan_exposure(setting, dataset, fld, group_col)
        exposed = set(plan.selected)
        values = dict(zip(dataset["id"], dataset[fld]))
        groups = dict(zip(dataset["id"], dataset[group_col]))
        new_values = {}
        inv = inventories.get(fld) if inventories else None
        fcode = _FIELD_CODE.get(fld, fld)
        for rid in order:
            original = values[rid]
            if rid not in exposed:
                rows.append((rid, fld, groups[rid], False, "", "", "", False,
                             original, original, "", "", "", ""))
                continue
            rng = make_rng(setting.replicate_seed, "mechanism", fcode, rid)
            cell = sample_mechanism(profiles[fld], groups[rid], rng,
                                    pooled=setting.uses_pooled_mechanism)
            res = apply_corruption(original, cell, rng, inv)
            new_values[rid] = res.corrupted
            rows.append((rid, fld, groups[rid], True, cell[0], bucket_label(cell[1]), cell[2],
                         res.fallback_flag, original, res.corrupted,
                         res.realised_cell[0], bucket_label(res.realised_cell[1]),
                         res.realised_cell[2], format_script(res.script)))
        if new_values:
            mask = out["id"].isin(new_values.keys())
            out.loc[mask, fld] = out.loc[mask, "id"].map(new_values)
    audit = pd.DataFrame(rows, columns=[
        "id", "field", "group", "exposed", "type", "bucket", "position", "fallback",
        "original", "corrupted", "realised_type", "realised_bucket", "realised_position",
        "script"])
    return out, audit


def format_script(ops) -> str:
    return ";".join(f"{LABEL_OF[op.kind]}@{op.position}:{op.char}" for op in ops)


LABEL_OF = {v: k for k, v in LABEL_KIND.items()}


def corruption_status(audit: pd.DataFrame) -> pd.Series:
    """Per-id status: uncorrupted, forename_only, surname_only or both."""
    wide = audit.pivot(index="id", columns="field", values="exposed").fillna(False)
    fn = wide.get("forename", pd.Series(False, index=wide.index)).astype(bool)
    sn = wide.get("surname", pd.Series(False, index=wide.index)).astype(bool)
    status = np.select([fn & sn, fn, sn], ["both", "forename_only", "surname_only"],
                       "uncorrupted")
    return pd.Series(status, index=wide.index, name="status")


def write_audit_csv(audit: pd.DataFrame, path) -> None:
    audit[AUDIT_COLUMNS + ["script"]].to_csv(path, index=False)
