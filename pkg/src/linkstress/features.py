"""Forename structure features, a standardised PCA embedding of them, and
percentile-based discretisation of embedding distances.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import (DegenerateFeature, EmptyName, InsufficientData,
                     InsufficientPairs, StrictOrderViolation)

VOWELS = frozenset("AEIOU")
N_COMPONENTS = 8
MIN_THRESHOLD_PAIRS = 100
PERCENTILES = (5.0, 10.0, 25.0, 50.0)


@dataclass(frozen=True)
class NameFeatureVector:
    hyphen: int
    apostrophe: int
    length_with_space: int
    length_without_space: int
    vowel_consonant_ratio: float
    longest_vowel_run: int
    unique_binary: int
    uniqueness_continuous: float
    number_of_terms: int
    middle_name_binary: int
    shared_trigram_count: int
    ends_with_vowel: int
    characters_per_term: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=float)


FEATURE_NAMES = tuple(f.name for f in fields(NameFeatureVector))


@dataclass
class CorpusStats:
    """Name and initial-trigram record counts from the reference corpus."""

    name_counts: Counter
    trigram_counts: Counter
    total: int

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "CorpusStats":
        names = [n for n in names if n]
        return cls(Counter(names), Counter(n[:3] for n in names), len(names))

    def count(self, name: str) -> int:
        return self.name_counts.get(name, 0)


def extract_features(name: str, stats: CorpusStats) -> NameFeatureVector:
    """Compute the 13 structure features of a normalised name.

    A name absent from the reference corpus is treated as a singleton
    (it is one occurrence of itself).  ``shared_trigram_count`` counts
    reference records whose name starts with the same three characters
    but is a different name.
    """
    letters = [c for c in name if c.isalpha()]
    if not letters:
        raise EmptyName(f"name {name!r} has no alphabetic characters")

    terms = name.split()
    n_terms = max(len(terms), 1)
    no_space = name.replace(" ", "")
    vowels = sum(c in VOWELS for c in letters)
    consonants = len(letters) - vowels

    run = best_run = 0
    for c in name:
        run = run + 1 if c in VOWELS else 0
        best_run = max(best_run, run)

    count = stats.count(name)
    effective = max(count, 1)
    total = max(stats.total, 1)
    shared = stats.trigram_counts.get(name[:3], 0) - count

    return NameFeatureVector(
        hyphen=int("-" in name),
        apostrophe=int("'" in name or "’" in name),
        length_with_space=len(name),
        length_without_space=len(no_space),
        vowel_consonant_ratio=vowels / max(consonants, 1),
        longest_vowel_run=best_run,
        unique_binary=int(effective == 1),
        uniqueness_continuous=1.0 - min(effective / total, 1.0),
        number_of_terms=n_terms,
        middle_name_binary=int(n_terms >= 2),
        shared_trigram_count=max(shared, 0),
        ends_with_vowel=int(letters[-1] in VOWELS),
        characters_per_term=len(no_space) / n_terms,
    )


@dataclass(frozen=True)
class EmbeddingModel:
    feature_means: np.ndarray
    feature_sds: np.ndarray
    loadings: np.ndarray  # (n_features, n_components)
    explained_variance: np.ndarray
    feature_names: tuple = FEATURE_NAMES

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "means": self.feature_means.tolist(),
            "sds": self.feature_sds.tolist(),
            "loadings": self.loadings.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingModel":
        return cls(np.asarray(d["means"], float), np.asarray(d["sds"], float),
                   np.asarray(d["loadings"], float),
                   np.asarray(d["explained_variance"], float),
                   tuple(d.get("feature_names", FEATURE_NAMES)))


def fit_pca(matrix, n_components: int = N_COMPONENTS,
            feature_names: Sequence[str] | None = None) -> EmbeddingModel:
    """PCA on the correlation matrix of ``matrix`` (rows are observations)."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, p = x.shape
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"x{i}" for i in range(p))
    if n_components > p:
        raise ValueError("more components than features")
    if n < 2:
        raise InsufficientData("need at least two observations")

    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    for i, sd in enumerate(sds):
        if not sd > 0:
            raise DegenerateFeature(i, names[i])

    z = (x - means) / sds
    corr = z.T @ z / (n - 1)
    eigval, eigvec = np.linalg.eigh(corr)
    order = np.argsort(eigval)[::-1][:n_components]
    eigval = np.clip(eigval[order], 0.0, None)
    eigvec = eigvec[:, order]
    # make each column's largest-magnitude loading positive
    pivots = np.argmax(np.abs(eigvec), axis=0)
    signs = np.sign(eigvec[pivots, np.arange(eigvec.shape[1])])
    signs[signs == 0] = 1.0
    eigvec = eigvec * signs
    return EmbeddingModel(means, sds, eigvec, eigval, names)


def fit_embedding(corpus: Sequence[NameFeatureVector],
                  n_components: int = N_COMPONENTS) -> EmbeddingModel:
    rows = np.array([v.as_array() for v in corpus], dtype=float)
    if rows.ndim != 2 or len({tuple(r) for r in rows}) < len(FEATURE_NAMES):
        raise InsufficientData(
            f"need at least {len(FEATURE_NAMES)} distinct feature vectors")
    return fit_pca(rows, n_components, FEATURE_NAMES)


def project(v, model: EmbeddingModel) -> np.ndarray:
    """Standardise and rotate one feature vector, or a (n, 13) array of them."""
    if isinstance(v, NameFeatureVector):
        v = v.as_array()
    x = np.asarray(v, dtype=float)
    return ((x - model.feature_means) / model.feature_sds) @ model.loadings


def pc_distance(p, q) -> float | np.ndarray:
    """Euclidean norm of the componentwise absolute differences (row-wise for 2-d)."""
    diff = np.abs(np.asarray(p, float) - np.asarray(q, float))
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class PCDistanceThresholds:
    cut_p5: float
    cut_p10: float
    cut_p25: float
    cut_p50: float

    @property
    def cuts(self) -> tuple[float, float, float, float]:
        return (self.cut_p5, self.cut_p10, self.cut_p25, self.cut_p50)

    def to_dict(self) -> dict:
        return {"cut_p5": self.cut_p5, "cut_p10": self.cut_p10,
                "cut_p25": self.cut_p25, "cut_p50": self.cut_p50}

    @classmethod
    def from_dict(cls, d: dict) -> "PCDistanceThresholds":
        return cls(float(d["cut_p5"]), float(d["cut_p10"]),
                   float(d["cut_p25"]), float(d["cut_p50"]))


def thresholds_from_distances(distances, strict: bool = True) -> PCDistanceThresholds:
    d = np.asarray(distances, dtype=float)
    if d.size < MIN_THRESHOLD_PAIRS:
        raise InsufficientPairs(
            f"need at least {MIN_THRESHOLD_PAIRS} within-person pairs, got {d.size}")
    cuts = [float(c) for c in np.percentile(d, PERCENTILES, method="linear")]
    if strict and not (0.0 < cuts[0] < cuts[1] < cuts[2] < cuts[3]):
        raise StrictOrderViolation(f"percentile cuts are not strictly increasing: {cuts}")
    return PCDistanceThresholds(*cuts)


def fit_thresholds(within_person_pairs: Sequence[tuple[str, str]],
                   embedder: "NameEmbedder") -> PCDistanceThresholds:
    """Percentile cuts of the embedding distance between within-person name pairs."""
    if len(within_person_pairs) < MIN_THRESHOLD_PAIRS:
        raise InsufficientPairs(
            f"need at least {MIN_THRESHOLD_PAIRS} within-person pairs, "
            f"got {len(within_person_pairs)}")
    left = embedder.embed([a for a, _ in within_person_pairs])
    right = embedder.embed([b for _, b in within_person_pairs])
    return thresholds_from_distances(pc_distance(left, right))


def fit_component_thresholds(within_person_pairs, embedder) -> list[PCDistanceThresholds]:
    """Per-component variant: one set of cuts for each |p_k - q_k|."""
    left = embedder.embed([a for a, _ in within_person_pairs])
    right = embedder.embed([b for _, b in within_person_pairs])
    diff = np.abs(left - right)
    return [thresholds_from_distances(diff[:, k], strict=False)
            for k in range(diff.shape[1])]


def discretise(d: float, t: PCDistanceThresholds) -> int:
    if d < t.cut_p5:
        return 4
    if d < t.cut_p10:
        return 3
    if d < t.cut_p25:
        return 2
    if d < t.cut_p50:
        return 1
    return 0


def discretise_many(d, t: PCDistanceThresholds) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return 4 - np.searchsorted(np.asarray(t.cuts), d, side="right")


@dataclass
class NameEmbedder:
    """Memoised name -> PC coordinates under fixed corpus statistics."""

    stats: CorpusStats
    model: EmbeddingModel
    _cache: dict = field(default_factory=dict, repr=False)

    def embed_one(self, name: str) -> np.ndarray:
        hit = self._cache.get(name)
        if hit is None:
            hit = project(extract_features(name, self.stats), self.model)
            self._cache[name] = hit
        return hit

    def embed(self, names: Sequence[str]) -> np.ndarray:
        if len(names) == 0:
            return np.empty((0, self.model.n_components))
        return np.vstack([self.embed_one(n) for n in names])


def fit_name_embedder(reference_names: Sequence[str],
                      n_components: int = N_COMPONENTS) -> NameEmbedder:
    """Build corpus statistics and fit the embedding on one feature row per
    reference record (so frequent names weigh more)."""
    names = [n for n in reference_names if n]
    stats = CorpusStats.from_names(names)
    per_name = {n: extract_features(n, stats) for n in stats.name_counts}
    vectors = [per_name[n] for n in names]
    return NameEmbedder(stats, fit_embedding(vectors, n_components))


def save_embedding(path, model: EmbeddingModel,
                   thresholds: PCDistanceThresholds | None = None) -> None:
    doc = model.to_dict()
    if thresholds is not None:
        doc["thresholds"] = thresholds.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def load_embedding(path) -> tuple[EmbeddingModel, PCDistanceThresholds | None]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    t = doc.get("thresholds")
    return EmbeddingModel.from_dict(doc), (PCDistanceThresholds.from_dict(t) if t else None)
