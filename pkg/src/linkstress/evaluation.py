"""Evaluation sampling, outcome classification, error rates and
disparities, threshold calibration, and replicate summaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .corruption import corruption_status, largest_remainder, make_rng, round_half_up
from .errors import EmptyGroup, InsufficientData, MissingGold

STATUSES = ("uncorrupted", "forename_only", "surname_only", "both")
OUTCOMES = ("correct", "false_match", "missed")
REFERENCE_GROUP = "Non-Hispanic White"
OVERALL = "Overall"


def strata(dataset: pd.DataFrame, audit: pd.DataFrame,
           group_col: str = "ethnic_group") -> pd.DataFrame:
    """id, group and corruption status for every record."""
    status = corruption_status(audit)
    out = dataset[["id", group_col]].rename(columns={group_col: "group"}).copy()
    out["status"] = out["id"].map(status).fillna("uncorrupted")
    return out


def stratified_sample(dataset: pd.DataFrame, audit: pd.DataFrame, fraction: float = 0.05,
                      seed: int = 0, group_col: str = "ethnic_group") -> pd.DataFrame:
    """Proportional sample stratified by group x corruption status.

    The overall size ``round(fraction * N)`` is split over strata by
    largest remainder on stratum sizes; each stratum is then sampled
    without replacement.  Rows come back in the dataset's order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    st = strata(dataset, audit, group_col)
    sizes = st.groupby(["group", "status"]).size()
    sizes = {(str(g), s): int(n) for (g, s), n in sizes.items()}
    total = round_half_up(fraction * len(dataset))
    take = largest_remainder(total, sizes) if total else dict.fromkeys(sizes, 0)
    keep = []
    for (g, s), ids in st.groupby([st["group"].astype(str), "status"])["id"]:
        n = take[(g, s)]
        ids = ids.tolist()
        if n >= len(ids):
            keep.extend(ids)
        elif n > 0:
            rng = make_rng(seed, "sample", g, s)
            keep.extend(ids[i] for i in rng.choice(len(ids), n, replace=False))
    return dataset[dataset["id"].isin(set(keep))]


def classify_outcomes(decisions: pd.DataFrame, gold: Mapping | None = None) -> pd.Series:
    """Outcome per left id: correct, false_match or missed.

    ``gold`` maps left id to its true right id; by default every record's
    gold counterpart carries the same id.
    """
    out = []
    for lid, rid in zip(decisions["left_id"], decisions["right_id"]):
        if gold is None:
            target = lid
        else:
            if lid not in gold:
                raise MissingGold(lid)
            target = gold[lid]
        if rid is None or (isinstance(rid, float) and math.isnan(rid)):
            out.append("missed")
        elif rid == target:
            out.append("correct")
        else:
            out.append("false_match")
    return pd.Series(out, index=decisions["left_id"].to_numpy(), name="outcome")


def outcome_counts(outcomes: pd.Series, group_of: Mapping) -> pd.DataFrame:
    """n / correct / false_match / missed per group."""
    df = pd.DataFrame({"group": [group_of[i] for i in outcomes.index],
                       "outcome": outcomes.to_numpy()})
    table = pd.crosstab(df["group"], df["outcome"])
    for col in OUTCOMES:
        if col not in table:
            table[col] = 0
    table = table[list(OUTCOMES)]
    table.insert(0, "n", table.sum(axis=1))
    table.columns.name = None
    return table


def rates_and_disparities(counts: pd.DataFrame, reference: str = REFERENCE_GROUP,
                          groups: Sequence[str] | None = None) -> pd.DataFrame:
    """FMR and MMR per group and overall, with percentage-point disparities
    against ``reference``.  Groups with no records get NaN rates."""
    if reference not in counts.index or counts.loc[reference, "n"] == 0:
        raise EmptyGroup(reference)
    names = list(groups) if groups is not None else list(counts.index)
    rows = []
    for g in names:
        if g in counts.index and counts.loc[g, "n"] > 0:
            c = counts.loc[g]
            rows.append((g, int(c["n"]), c["false_match"] / c["n"], c["missed"] / c["n"]))
        else:
            rows.append((g, 0, np.nan, np.nan))
    total = counts.sum()
    rows.append((OVERALL, int(total["n"]), total["false_match"] / total["n"],
                 total["missed"] / total["n"]))
    out = pd.DataFrame(rows, columns=["group", "n", "fmr", "mmr"]).set_index("group")
    ref = out.loc[reference]
    out["fmr_disparity_pp"] = (out["fmr"] - ref["fmr"]) * 100.0
    out["mmr_disparity_pp"] = (out["mmr"] - ref["mmr"]) * 100.0
    out.loc[OVERALL, ["fmr_disparity_pp", "mmr_disparity_pp"]] = np.nan
    return out


def _weights_array(best) -> np.ndarray:
    if isinstance(best, pd.DataFrame):
        best = best["match_weight"]
    w = np.asarray(best, dtype=float)
    if w.size == 0:
        raise InsufficientData("no decision weights to calibrate on")
    return w


def mmr_at(weights, threshold: float) -> float:
    """Share of records whose best candidate weight is below ``threshold``;
    records without any candidate (weight -inf) always count as missed."""
    w = _weights_array(weights)
    missed = np.isneginf(w) | (w < threshold)
    return float(missed.mean())


def calibrate_threshold(weights, target_mmr: float = 0.20) -> float:
    """Threshold whose MMR is closest to ``target_mmr``.

    Candidates are every distinct observed weight plus -inf and +inf;
    equal distances resolve to the lower threshold.  Distances are
    compared exactly (as rationals), so a decimal target like 0.20 ties
    symmetric MMRs such as 0.18 and 0.22 as intended.
    """
    w = _weights_array(weights)
    n = w.size
    no_cand = int(np.isneginf(w).sum())
    finite = np.sort(w[np.isfinite(w)])
    cands = np.concatenate([[-math.inf], np.unique(finite), [math.inf]])
    below = np.searchsorted(finite, cands, side="left")
    below[-1] = finite.size
    missed = no_cand + below
    # |missed/n - p/q| * n * q = |q * missed - p * n|
    target = Fraction(str(target_mmr))
    dist = np.abs(target.denominator * missed.astype(object) - target.numerator * n)
    best = min(range(len(cands)), key=lambda i: (dist[i], i))
    return float(cands[best])


@dataclass(frozen=True)
class ReplicateSummary:
    metric: str
    values: tuple
    mean: float
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def aggregate_replicates(values: Sequence[float], metric: str = "",
                         confidence: float = 0.95) -> ReplicateSummary:
    """Mean and t-interval across replicates: mean +/- t_{k-1} * sd / sqrt(k)."""
    x = np.asarray(values, dtype=float)
    k = x.size
    if k < 2:
        raise InsufficientData("need at least two replicates for an interval")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, k - 1)) * sd / math.sqrt(k)
    return ReplicateSummary(metric, tuple(float(v) for v in x), mean, mean - half, mean + half)
