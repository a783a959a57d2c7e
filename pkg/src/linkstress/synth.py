"""Desk-scale synthetic registry extracts.

Names are drawn from per-group pools with Zipf-like frequencies: a
curated head of common names followed by a syllable-generated tail in
the group's naming styles.  Pools are compact and heavy-headed on
purpose: a desk-scale corpus has far smaller blocks than a registry of
millions, and concentrated names restore the density of same-name
non-matches per block that drives false matches.  A second snapshot with within-person name
discrepancies can be derived from a base extract for error profiling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

import numpy as np
import pandas as pd

from .corruption import EQUAL_EXPOSURE, CorruptionSetting, corrupt_dataset, make_rng
from .profiling import load_reference_marginals, profile_from_marginals

GROUPS = (
    "Asian",
    "Hispanic (White or Black)",
    "Indigenous or Pacific Islander",
    "Mixed",
    "Non-Hispanic Black",
    "Non-Hispanic White",
    "Other",
    "Unknown",
)

DEFAULT_GROUP_SHARES = {
    "Non-Hispanic White": 0.55,
    "Non-Hispanic Black": 0.20,
    "Hispanic (White or Black)": 0.07,
    "Asian": 0.04,
    "Other": 0.04,
    "Mixed": 0.03,
    "Indigenous or Pacific Islander": 0.02,
    "Unknown": 0.05,
}

COLUMNS = ["id", "forename", "surname", "birth_year", "gender", "ethnic_group"]


def _pool_document() -> dict:
    text = resources.files("linkstress.data").joinpath("name_pools.json").read_text(
        encoding="utf-8")
    return json.loads(text)


def _generate_name(style: dict, rng: np.random.Generator) -> str:
    def one_term() -> str:
        n_syll = int(rng.choice(style["syllables"]))
        parts = []
        for _ in range(n_syll):
            parts.append(style["onsets"][int(rng.integers(len(style["onsets"])))])
            parts.append(style["vowels"][int(rng.integers(len(style["vowels"])))])
        parts.append(style["codas"][int(rng.integers(len(style["codas"])))])
        return "".join(parts)

    name = one_term()
    if rng.random() < style.get("two_terms", 0.0):
        name = f"{name} {one_term()}"
    elif rng.random() < style.get("hyphen", 0.0):
        name = f"{name}-{one_term()}"
    elif rng.random() < style.get("apostrophe", 0.0) and len(name) > 3:
        name = f"{name[:2]}'{name[2:]}"
    return name


def build_pool(head: list[str], styles: Mapping[str, float], size: int,
               style_defs: Mapping[str, dict], rng: np.random.Generator) -> list[str]:
    """Curated ``head`` followed by generated names until ``size`` is reached."""
    pool = list(dict.fromkeys(head))
    seen = set(pool)
    keys = sorted(styles)
    weights = np.array([styles[k] for k in keys], dtype=float)
    weights /= weights.sum()
    guard = 0
    while len(pool) < size and guard < size * 50:
        guard += 1
        style = style_defs[keys[int(rng.choice(len(keys), p=weights))]]
        name = _generate_name(style, rng)
        if len(name.replace(" ", "")) >= 2 and name not in seen:
            seen.add(name)
            pool.append(name)
    return pool


@dataclass
class NamePools:
    female: dict
    male: dict
    surname: dict


@lru_cache(maxsize=4)
def default_name_pools(n_forenames: int = 400, n_surnames: int = 2000,
                       seed: int = 20221001) -> NamePools:
    doc = _pool_document()
    female, male, surname = {}, {}, {}
    for g, spec in doc["groups"].items():
        female[g] = build_pool(spec["female"], spec["styles"], n_forenames, doc["styles"],
                               make_rng(seed, "pool", g, "female"))
        male[g] = build_pool(spec["male"], spec["styles"], n_forenames, doc["styles"],
                             make_rng(seed, "pool", g, "male"))
        surname[g] = build_pool(spec["surname"], spec["styles"], n_surnames, doc["styles"],
                                make_rng(seed, "pool", g, "surname"))
    return NamePools(female, male, surname)


def zipf_probabilities(n: int, exponent: float, offset: float = 0.0) -> np.ndarray:
    """Zipf-Mandelbrot rank probabilities, p_k proportional to (k + offset)^-exponent."""
    p = (np.arange(1, n + 1, dtype=float) + offset) ** -exponent
    return p / p.sum()


@dataclass
class SynthSpec:
    group_sizes: dict
    pools: NamePools | None = None
    forename_zipf: float = 1.0
    forename_offset: float = 0.0
    surname_zipf: float = 1.0
    surname_offset: float = 0.0
    birth_years: tuple = (1930, 2004)
    seed: int = 0

    @classmethod
    def default(cls, n: int = 50_000, seed: int = 0, **kw) -> "SynthSpec":
        sizes = _split(n, DEFAULT_GROUP_SHARES)
        return cls(group_sizes=sizes, seed=seed, **kw)


def _split(n: int, shares: Mapping[str, float]) -> dict:
    from .corruption import largest_remainder
    return largest_remainder(n, shares)


def synth_corpus(spec: SynthSpec) -> pd.DataFrame:
    """Deterministic synthetic extract with the registry schema."""
    pools = spec.pools or default_name_pools()
    rng = make_rng(spec.seed, "corpus")
    groups = [g for g in sorted(spec.group_sizes) for _ in range(spec.group_sizes[g])]
    n = len(groups)
    groups = np.array(groups, dtype=object)[rng.permutation(n)]
    gender = np.where(rng.random(n) < 0.5, "F", "M")
    lo, hi = spec.birth_years
    years = rng.integers(lo, hi + 1, size=n)
    forename = np.empty(n, dtype=object)
    surname = np.empty(n, dtype=object)
    for g in sorted(spec.group_sizes):
        in_g = groups == g
        for sex, table in (("F", pools.female), ("M", pools.male)):
            mask = in_g & (gender == sex)
            pool = table[g]
            idx = rng.choice(len(pool), size=int(mask.sum()),
                             p=zipf_probabilities(len(pool), spec.forename_zipf,
                                                  spec.forename_offset))
            forename[mask] = [pool[i] for i in idx]
        pool = pools.surname[g]
        idx = rng.choice(len(pool), size=int(in_g.sum()),
                         p=zipf_probabilities(len(pool), spec.surname_zipf,
                                               spec.surname_offset))
        surname[in_g] = [pool[i] for i in idx]
    return pd.DataFrame({
        "id": np.arange(1, n + 1, dtype=np.int64),
        "forename": forename,
        "surname": surname,
        "birth_year": years.astype(np.int64),
        "gender": gender,
        "ethnic_group": groups,
    })[COLUMNS]


def synth_later_snapshot(base: pd.DataFrame, forename_rate: float = 0.02,
                         surname_rate: float = 0.03, seed: int = 0,
                         marginals: Mapping | None = None) -> pd.DataFrame:
    """A later snapshot of ``base`` carrying within-person name changes.

    Changes follow the reference per-group marginal error profiles
    (combined as independent cells), applied to an equal share of every
    group.  Pair it with ``base`` for discrepancy profiling.
    """
    marginals = marginals or load_reference_marginals()
    out = base
    for fld, rate, code in (("forename", forename_rate, 11), ("surname", surname_rate, 12)):
        if rate <= 0:
            continue
        profile = profile_from_marginals(marginals[fld])
        setting = CorruptionSetting(EQUAL_EXPOSURE, rate,
                                    replicate_seed=int(make_rng(seed, "snapshot", code)
                                                       .integers(2**63)))
        out, _ = corrupt_dataset(out, setting, {fld: profile}, fields=(fld,))
    return out
