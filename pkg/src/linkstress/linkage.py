"""Fellegi-Sunter linkage: blocking, comparison levels, u estimation from
random pairs, EM for the prior and m-probabilities, term-frequency
adjusted match weights and best-candidate decisions.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import NonConvergenceWarning
from .features import NameEmbedder, PCDistanceThresholds, pc_distance
from .strings import jaro_winkler, levenshtein

MODEL_NAMES = ("jw", "jw_no_tf", "levenshtein", "levenshtein_no_tf", "combined")
JW_BANDS = (0.92, 0.88, 0.70)
LEV_BANDS = (1, 2)
NULL_LEVEL = -1
U_FLOOR = 1e-9
LAMBDA_BOUNDS = (1e-6, 1 - 1e-6)


# -- blocking -----------------------------------------------------------------

@dataclass(frozen=True)
class BlockKey:
    field: str
    prefix: int | None = None

    @property
    def label(self) -> str:
        return self.field if self.prefix is None else f"prefix({self.field},{self.prefix})"

    def derive(self, values: pd.Series) -> pd.Series:
        s = values.astype("string")
        if self.prefix is not None:
            s = s.str.slice(0, self.prefix)
        return s

    def value(self, record) -> str | None:
        v = record[self.field]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return None
        v = str(v)
        return v[: self.prefix] if self.prefix is not None else v


@dataclass(frozen=True)
class BlockingRule:
    keys: tuple

    @property
    def label(self) -> str:
        return " & ".join(k.label for k in self.keys)

    def matches(self, left_record, right_record) -> bool:
        for k in self.keys:
            a, b = k.value(left_record), k.value(right_record)
            if not a or not b or a != b:
                return False
        return True


def prefix(field_name: str, k: int) -> BlockKey:
    return BlockKey(field_name, k)


DEFAULT_BLOCKING = (
    BlockingRule((BlockKey("birth_year"), BlockKey("gender"), BlockKey("surname"),
                  prefix("forename", 3))),
    BlockingRule((BlockKey("birth_year"), BlockKey("gender"), prefix("forename", 3))),
)

# EM training pairs share only keys that do not depend on the surname;
# u comes from random pairs sharing RANDOM_PAIR_KEYS, so non-matches among
# training pairs follow the u distribution.
TRAINING_BLOCKING = (BlockingRule((BlockKey("birth_year"), BlockKey("gender"))),)
RANDOM_PAIR_KEYS = ("gender",)


def _key_frame(df: pd.DataFrame, rule: BlockingRule) -> pd.DataFrame:
    cols = {f"k{i}": k.derive(df[k.field]) for i, k in enumerate(rule.keys)}
    out = pd.DataFrame(cols)
    out["id"] = df["id"].to_numpy()
    ok = np.ones(len(out), dtype=bool)
    for c in cols:
        ok &= out[c].notna().to_numpy() & (out[c] != "").fillna(False).to_numpy()
    return out[ok]


def block(left: pd.DataFrame, right: pd.DataFrame,
          rules: Sequence[BlockingRule] = DEFAULT_BLOCKING) -> pd.DataFrame:
    """Union of per-rule equi-joins, as a frame of (left_id, right_id)."""
    parts = []
    for rule in rules:
        lk = _key_frame(left, rule)
        rk = _key_frame(right, rule)
        on = [f"k{i}" for i in range(len(rule.keys))]
        m = lk.merge(rk, on=on, suffixes=("_l", "_r"))
        parts.append(m[["id_l", "id_r"]])
    if not parts:
        return pd.DataFrame({"left_id": [], "right_id": []})
    pairs = pd.concat(parts, ignore_index=True).drop_duplicates()
    pairs.columns = ["left_id", "right_id"]
    return pairs.sort_values(["left_id", "right_id"], kind="mergesort").reset_index(drop=True)


# -- comparison specs ---------------------------------------------------------

@lru_cache(maxsize=1 << 21)
def _jw(a: str, b: str) -> float:
    return jaro_winkler(a, b)


@lru_cache(maxsize=1 << 21)
def _lev(a: str, b: str) -> int:
    return levenshtein(a, b)


@dataclass
class ComparisonColumn:
    """One comparison column; level 0 is the strongest agreement."""

    name: str
    field: str
    comparator: str  # jaro_winkler | levenshtein | pc_cluster | pc_component
    bands: tuple = ()
    tf: bool = False
    embedder: NameEmbedder | None = None
    thresholds: PCDistanceThresholds | None = None
    component: int | None = None

    def __post_init__(self):
        if self.comparator in ("pc_cluster", "pc_component"):
            if self.embedder is None or self.thresholds is None:
                raise ValueError(f"{self.comparator} needs an embedder and thresholds")
            if self.tf:
                raise ValueError("TF adjustment applies to exact string levels only")

    @property
    def level_labels(self) -> list[str]:
        if self.comparator == "jaro_winkler":
            return ["exact"] + [f"jw>={b:g}" for b in self.bands] + ["else"]
        if self.comparator == "levenshtein":
            return ["exact"] + [f"lev<={b}" for b in self.bands] + ["else"]
        return ["pc4", "pc3", "pc2", "pc1", "pc0"]

    @property
    def n_levels(self) -> int:
        return len(self.level_labels)

    def level(self, a: str, b: str) -> int:
        if not a or not b:
            return NULL_LEVEL
        if self.comparator == "jaro_winkler":
            if a == b:
                return 0
            s = _jw(a, b)
            for i, band in enumerate(self.bands, 1):
                if s >= band:
                    return i
            return len(self.bands) + 1
        if self.comparator == "levenshtein":
            if a == b:
                return 0
            d = _lev(a, b)
            for i, band in enumerate(self.bands, 1):
                if d <= band:
                    return i
            return len(self.bands) + 1
        return int(self.levels(np.array([a], object), np.array([b], object))[0])

    def levels(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.comparator in ("jaro_winkler", "levenshtein"):
            cache: dict = {}
            out = np.empty(len(a), dtype=np.int8)
            for i, pair in enumerate(zip(a, b)):
                lv = cache.get(pair)
                if lv is None:
                    lv = cache[pair] = self.level(*pair)
                out[i] = lv
            return out
        out = np.full(len(a), NULL_LEVEL, dtype=np.int8)
        ok = np.array([bool(x) and bool(y) for x, y in zip(a, b)], dtype=bool)
        if ok.any():
            pa = self.embedder.embed(list(a[ok]))
            pb = self.embedder.embed(list(b[ok]))
            if self.comparator == "pc_cluster":
                d = pc_distance(pa, pb)
            else:
                d = np.abs(pa[:, self.component] - pb[:, self.component])
            cuts = np.asarray(self.thresholds.cuts)
            # pc level 4 (closest) maps to index 0
            out[ok] = np.searchsorted(cuts, d, side="right")
        return out

    def describe(self) -> dict:
        d = {"name": self.name, "field": self.field, "comparator": self.comparator,
             "levels": self.level_labels, "tf": self.tf}
        if self.bands:
            d["bands"] = list(self.bands)
        if self.thresholds is not None:
            d["thresholds"] = self.thresholds.to_dict()
        if self.component is not None:
            d["component"] = self.component
        return d


@dataclass
class ComparisonSpec:
    name: str
    columns: list

    def describe(self) -> dict:
        return {"name": self.name, "columns": [c.describe() for c in self.columns]}


def model_spec(name: str, embedder: NameEmbedder | None = None,
               thresholds=None, jw_bands=JW_BANDS, lev_bands=LEV_BANDS,
               pc_mode: str = "aggregate") -> ComparisonSpec:
    """Comparison spec for one of the five model families.

    For ``combined`` with ``pc_mode="per_component"``, ``thresholds`` is a
    list with one :class:`PCDistanceThresholds` per component and the
    forename contributes one column per component.
    """
    if name in ("jw", "jw_no_tf"):
        tf = name == "jw"
        cols = [ComparisonColumn("forename", "forename", "jaro_winkler", tuple(jw_bands), tf),
                ComparisonColumn("surname", "surname", "jaro_winkler", tuple(jw_bands), tf)]
    elif name in ("levenshtein", "levenshtein_no_tf"):
        tf = name == "levenshtein"
        cols = [ComparisonColumn("forename", "forename", "levenshtein", tuple(lev_bands), tf),
                ComparisonColumn("surname", "surname", "levenshtein", tuple(lev_bands), tf)]
    elif name == "combined":
        if pc_mode == "aggregate":
            fn = [ComparisonColumn("forename", "forename", "pc_cluster", embedder=embedder,
                                   thresholds=thresholds)]
        elif pc_mode == "per_component":
            fn = [ComparisonColumn(f"forename_pc{k + 1}", "forename", "pc_component",
                                   embedder=embedder, thresholds=t, component=k)
                  for k, t in enumerate(thresholds)]
        else:
            raise ValueError(f"unknown pc_mode {pc_mode!r}")
        cols = fn + [ComparisonColumn("surname", "surname", "jaro_winkler",
                                      tuple(jw_bands), True)]
    else:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    return ComparisonSpec(name, cols)


@dataclass
class ComparisonVectors:
    left_id: np.ndarray
    right_id: np.ndarray
    levels: np.ndarray  # (n_pairs, n_columns), NULL_LEVEL for missing
    values: dict  # column name -> right-side values (TF lookups)

    def __len__(self) -> int:
        return len(self.left_id)


def compare(pairs: pd.DataFrame, left: pd.DataFrame, right: pd.DataFrame,
            spec: ComparisonSpec) -> ComparisonVectors:
    """Level vectors for each (left_id, right_id) pair."""
    lidx = pd.Index(left["id"])
    ridx = pd.Index(right["id"])
    li = lidx.get_indexer(pairs["left_id"])
    ri = ridx.get_indexer(pairs["right_id"])
    if (li < 0).any() or (ri < 0).any():
        raise KeyError("pair refers to an id missing from the datasets")
    levels = np.empty((len(pairs), len(spec.columns)), dtype=np.int8)
    values = {}
    for c, col in enumerate(spec.columns):
        a = left[col.field].to_numpy(dtype=object)[li]
        b = right[col.field].to_numpy(dtype=object)[ri]
        levels[:, c] = col.levels(a, b)
        if col.tf:
            values[col.name] = b
    return ComparisonVectors(pairs["left_id"].to_numpy(), pairs["right_id"].to_numpy(),
                             levels, values)


def sample_random_pairs(left: pd.DataFrame, right: pd.DataFrame, n: int,
                        rng: np.random.Generator, within: Sequence[str] = ()) -> pd.DataFrame:
    """Uniform random cross pairs with different ids (so non-matches).

    ``within`` names columns the two records must share; pairs are then
    drawn uniformly from the cross product restricted to equal values.
    """
    if not within:
        li = rng.integers(len(left), size=n)
        ri = rng.integers(len(right), size=n)
    else:
        lkey = pd.MultiIndex.from_frame(left[list(within)].astype(str))
        rkey = pd.MultiIndex.from_frame(right[list(within)].astype(str))
        rcodes = pd.Index(rkey.unique())
        rgroup = rcodes.get_indexer(rkey)
        lgroup = rcodes.get_indexer(lkey)
        order = np.argsort(rgroup, kind="stable")
        sizes = np.bincount(rgroup, minlength=len(rcodes))
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        ok = np.flatnonzero(lgroup >= 0)
        # left records weighted by the number of right partners they can take
        w = sizes[lgroup[ok]].astype(float)
        li = ok[rng.choice(len(ok), size=n, p=w / w.sum())]
        g = lgroup[li]
        ri = order[starts[g] + (rng.random(n) * sizes[g]).astype(int)]
    out = pd.DataFrame({"left_id": left["id"].to_numpy()[li],
                        "right_id": right["id"].to_numpy()[ri]})
    return out[out["left_id"] != out["right_id"]].reset_index(drop=True)


def estimate_u(random_levels: np.ndarray, spec: ComparisonSpec,
               floor: float = U_FLOOR) -> list[np.ndarray]:
    """Level frequencies among random pairs, floored and renormalised."""
    u = []
    for c, col in enumerate(spec.columns):
        lv = random_levels[:, c]
        lv = lv[lv != NULL_LEVEL]
        counts = np.bincount(lv.astype(int), minlength=col.n_levels).astype(float)
        freq = counts / counts.sum() if counts.sum() > 0 else np.full(col.n_levels,
                                                                      1 / col.n_levels)
        freq = np.maximum(freq, floor)
        u.append(freq / freq.sum())
    return u


# -- model and EM -------------------------------------------------------------

@dataclass
class LinkageModel:
    spec: ComparisonSpec
    lam: float
    m: list
    u: list
    tf_tables: dict = field(default_factory=dict)
    u_floor: float = U_FLOOR
    converged: bool = True
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "model": self.spec.name,
            "lambda": self.lam,
            "converged": self.converged,
            "iterations": self.iterations,
            "u_floor": self.u_floor,
            "columns": [dict(col.describe(), m=self.m[c].tolist(), u=self.u[c].tolist())
                        for c, col in enumerate(self.spec.columns)],
            "tf_tables": {k: dict(sorted(v.items())) for k, v in self.tf_tables.items()},
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)


@dataclass
class EMOptions:
    lam_init: float = 0.1
    m_init: list | None = None
    u_init: list | None = None
    fix_u: bool = True
    tol: float = 1e-6
    max_iter: int = 200
    floor: float = 1e-9


def _default_m(n_levels: int) -> np.ndarray:
    m = np.array([0.5 ** k for k in range(n_levels)])
    m[0] = 8.0 * m[0]
    return m / m.sum()


def em_fit(levels: np.ndarray, spec: ComparisonSpec, options: EMOptions | None = None,
           u: Sequence[np.ndarray] | None = None) -> LinkageModel:
    """Estimate the match prior and m (and u unless fixed) by EM.

    Works on the distinct level patterns and their counts, so the fit does
    not depend on pair order.  A run that hits ``max_iter`` returns the
    model with ``converged=False`` and a :class:`NonConvergenceWarning`.
    """
    opt = options or EMOptions()
    levels = np.asarray(levels)
    if levels.ndim != 2 or levels.shape[0] == 0:
        raise ValueError("need a non-empty (n_pairs, n_columns) level array")
    patterns, counts = np.unique(levels, axis=0, return_counts=True)
    counts = counts.astype(float)
    n_cols = len(spec.columns)
    sizes = [col.n_levels for col in spec.columns]

    if u is None and opt.u_init is None and opt.fix_u:
        raise ValueError("fix_u requires u")
    m_par = [np.asarray(opt.m_init[c], float) if opt.m_init else _default_m(k)
             for c, k in enumerate(sizes)]
    if u is not None:
        u_par = [np.asarray(x, float) for x in u]
    elif opt.u_init is not None:
        u_par = [np.asarray(x, float) for x in opt.u_init]
    else:
        u_par = [_default_m(k)[::-1].copy() for k in sizes]
    lam = float(opt.lam_init)

    # one-hot membership of each pattern in each (column, level)
    member = [[patterns[:, c] == lv for lv in range(sizes[c])] for c in range(n_cols)]
    observed = [patterns[:, c] != NULL_LEVEL for c in range(n_cols)]

    converged = False
    it = 0
    for it in range(1, opt.max_iter + 1):
        log_m = np.zeros(len(patterns))
        log_u = np.zeros(len(patterns))
        for c in range(n_cols):
            idx = np.where(observed[c], patterns[:, c], 0).astype(int)
            log_m += np.where(observed[c], np.log(m_par[c][idx]), 0.0)
            log_u += np.where(observed[c], np.log(u_par[c][idx]), 0.0)
        a = math.log(lam) + log_m
        b = math.log(1 - lam) + log_u
        r = 1.0 / (1.0 + np.exp(np.clip(b - a, -700, 700)))

        wm = counts * r
        wu = counts * (1 - r)
        new_lam = float(np.clip(wm.sum() / counts.sum(), *LAMBDA_BOUNDS))
        new_m, new_u = [], []
        for c in range(n_cols):
            mc = np.array([wm[member[c][lv]].sum() for lv in range(sizes[c])])
            mc = np.maximum(mc / max(mc.sum(), 1e-300), opt.floor)
            new_m.append(mc / mc.sum())
            if opt.fix_u:
                new_u.append(u_par[c])
            else:
                uc = np.array([wu[member[c][lv]].sum() for lv in range(sizes[c])])
                uc = np.maximum(uc / max(uc.sum(), 1e-300), opt.floor)
                new_u.append(uc / uc.sum())
        delta = abs(new_lam - lam)
        for c in range(n_cols):
            delta = max(delta, np.max(np.abs(new_m[c] - m_par[c])),
                        np.max(np.abs(new_u[c] - u_par[c])))
        lam, m_par, u_par = new_lam, new_m, new_u
        if delta < opt.tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"EM did not converge in {opt.max_iter} iterations",
                      NonConvergenceWarning, stacklevel=2)
    return LinkageModel(spec, lam, m_par, u_par, converged=converged, iterations=it)


def tf_table(values: Sequence[str]) -> dict[str, float]:
    s = pd.Series([v for v in values if v])
    freq = s.value_counts(normalize=True, sort=False)
    return {str(k): float(v) for k, v in freq.items()}


def attach_tf(model: LinkageModel, reference: pd.DataFrame) -> LinkageModel:
    """Build TF tables from the reference dataset for every TF column;
    the TF floor is 1 / (10 N)."""
    for col in model.spec.columns:
        if col.tf:
            model.tf_tables[col.name] = tf_table(reference[col.field].tolist())
    model.u_floor = 1.0 / (10.0 * max(len(reference), 1))
    return model


# -- weights and decisions ----------------------------------------------------

def prior_weight(lam: float) -> float:
    return math.log2(lam / (1 - lam))


def match_weight(vector: Sequence[int], model: LinkageModel,
                 values: Mapping[str, str] | None = None) -> float:
    """Total log2 Bayes factor for one level vector.

    ``values`` gives the agreed value per TF column; when a TF column sits
    at its exact level, u is replaced by ``max(tf(value), u_floor)``.
    """
    w = prior_weight(model.lam)
    for c, (col, lv) in enumerate(zip(model.spec.columns, vector)):
        if lv == NULL_LEVEL:
            continue
        u = model.u[c][lv]
        if col.tf and lv == 0 and values is not None and col.name in values:
            table = model.tf_tables.get(col.name, {})
            u = max(table.get(values[col.name], 0.0), model.u_floor)
        w += math.log2(model.m[c][lv] / u)
    return w


def score(vectors: ComparisonVectors, model: LinkageModel) -> np.ndarray:
    """Vectorised :func:`match_weight` over all pairs."""
    w = np.full(len(vectors), prior_weight(model.lam))
    for c, col in enumerate(model.spec.columns):
        lv = vectors.levels[:, c].astype(int)
        obs = lv != NULL_LEVEL
        safe = np.where(obs, lv, 0)
        logm = np.log2(model.m[c])[safe]
        logu = np.log2(model.u[c])[safe]
        if col.tf and col.name in vectors.values:
            table = model.tf_tables.get(col.name, {})
            exact = obs & (lv == 0)
            if exact.any():
                vals = vectors.values[col.name][exact]
                tf = np.array([table.get(v, 0.0) for v in vals], dtype=float)
                logu = logu.copy()
                logu[exact] = np.log2(np.maximum(tf, model.u_floor))
        w += np.where(obs, logm - logu, 0.0)
    return w


def best_candidates(left: pd.DataFrame, right: pd.DataFrame, model: LinkageModel,
                    rules: Sequence[BlockingRule] = DEFAULT_BLOCKING) -> pd.DataFrame:
    """Highest-weight blocked candidate for every left record.

    Ties go to the smaller right id.  Left records without candidates get
    ``right_id=None`` and weight ``-inf``.
    """
    return best_from_pairs(block(left, right, rules), left, right, model)


def best_from_pairs(pairs: pd.DataFrame, left: pd.DataFrame, right: pd.DataFrame,
                    model: LinkageModel) -> pd.DataFrame:
    vec = compare(pairs, left, right, model.spec)
    scored = pd.DataFrame({"left_id": vec.left_id, "right_id": vec.right_id,
                           "match_weight": score(vec, model)})
    scored = scored.sort_values(["left_id", "match_weight", "right_id"],
                                ascending=[True, False, True], kind="mergesort")
    best = scored.drop_duplicates("left_id", keep="first").set_index("left_id")
    ids = left["id"].tolist()
    found = best.reindex(ids)
    has = found["right_id"].notna().to_numpy()
    right_ids = found["right_id"].to_numpy(dtype=object)
    out = pd.DataFrame({"left_id": ids})
    out["right_id"] = pd.Series([_plain(r) if h else None for r, h in zip(right_ids, has)],
                                dtype=object)
    out["match_weight"] = np.where(has, found["match_weight"].to_numpy(dtype=float), -math.inf)
    counts = scored["left_id"].value_counts()
    out["n_candidates"] = counts.reindex(ids).fillna(0).astype(int).to_numpy()
    return out


def _plain(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def decide(best: pd.DataFrame, threshold: float) -> pd.DataFrame:
    """Apply a threshold to best candidates: link iff weight >= threshold."""
    if math.isnan(threshold):
        raise ValueError("threshold must not be NaN")
    chosen = best["match_weight"] >= threshold
    out = pd.DataFrame({"left_id": best["left_id"],
                        "right_id": best["right_id"].where(chosen, None),
                        "match_weight": best["match_weight"],
                        "threshold": threshold})
    return out


def link(corrupted: pd.DataFrame, original: pd.DataFrame, model: LinkageModel,
         threshold: float, rules: Sequence[BlockingRule] = DEFAULT_BLOCKING) -> pd.DataFrame:
    return decide(best_candidates(corrupted, original, model, rules), threshold)


def write_decisions_csv(decisions: pd.DataFrame, path) -> None:
    out = decisions[["left_id", "right_id", "match_weight", "threshold"]].copy()
    out["right_id"] = out["right_id"].map(lambda v: "" if v is None or
                                          (isinstance(v, float) and math.isnan(v)) else v)
    out.to_csv(path, index=False, float_format="%.10g")


def fit_model(spec: ComparisonSpec, blocked_levels: np.ndarray, random_levels: np.ndarray,
              reference: pd.DataFrame, options: EMOptions | None = None) -> LinkageModel:
    """u from random pairs (held fixed), EM on blocked pairs, TF from reference."""
    u = estimate_u(random_levels, spec)
    model = em_fit(blocked_levels, spec, options or EMOptions(), u=u)
    return attach_tf(model, reference)
