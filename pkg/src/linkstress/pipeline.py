"""End-to-end stress test: profile, corrupt, fit, calibrate, link, evaluate.

Everything is keyed off the master seed, so a run is reproducible from
its manifest.  Work runs sequentially in a fixed order; report files are
written with fixed float formatting so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig
from .corruption import (SETTING_KINDS, DISPROPORTIONATE, CorruptionSetting,
                         corrupt_dataset, make_rng)
from .datasets import ingest
from .evaluation import (OVERALL, aggregate_replicates, calibrate_threshold,
                         classify_outcomes, outcome_counts, rates_and_disparities,
                         stratified_sample)
from .features import fit_name_embedder, fit_thresholds, fit_component_thresholds, \
    save_embedding
from .linkage import (DEFAULT_BLOCKING, RANDOM_PAIR_KEYS, TRAINING_BLOCKING, EMOptions, block, best_from_pairs, compare,
                      decide, fit_model, model_spec, sample_random_pairs,
                      write_decisions_csv)
from .profiling import NAME_FIELDS, CharInventory, build_profile, pair_snapshots
from .synth import GROUPS, SynthSpec, synth_corpus, synth_later_snapshot

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"
OVERALL_COLUMNS = ["model", "setting", "fmr_mean", "fmr_lo", "fmr_hi",
                   "mmr_mean", "mmr_lo", "mmr_hi", "threshold"]
METRICS = ("mmr", "fmr", "mmr_disparity_pp", "fmr_disparity_pp")


def derive_seed(master: int, *parts) -> int:
    """Child seed for one stage, keyed by labels."""
    return int(make_rng(master, *parts).integers(2**63))


@dataclass
class Inputs:
    base: pd.DataFrame
    snapshot_a: pd.DataFrame
    snapshot_b: pd.DataFrame
    source: dict


@dataclass
class Progress:
    """Stages completed so far; written to the manifest even on failure."""

    done: list = field(default_factory=list)

    def mark(self, stage: str) -> None:
        log.info("done: %s", stage)
        self.done.append(stage)


def load_inputs(cfg: RunConfig) -> Inputs:
    source = {}
    if cfg.base:
        base = ingest(cfg.base)
        source["base"] = os.path.abspath(cfg.base)
    else:
        base = synth_corpus(SynthSpec.default(cfg.synth_n, seed=derive_seed(cfg.seed, "synth")))
        source["base"] = f"synthetic(n={cfg.synth_n})"
    if cfg.snapshot_a:
        snap_a, snap_b = ingest(cfg.snapshot_a), ingest(cfg.snapshot_b)
        source["snapshots"] = [os.path.abspath(cfg.snapshot_a),
                               os.path.abspath(cfg.snapshot_b)]
    else:
        snap_a = base
        snap_b = synth_later_snapshot(base, cfg.synth_forename_rate, cfg.synth_surname_rate,
                                      seed=derive_seed(cfg.seed, "later_snapshot"))
        source["snapshots"] = ["base", "synthetic later snapshot of base"]
    return Inputs(base, snap_a, snap_b, source)


@dataclass
class ProfileStage:
    profiles: dict
    inventories: dict
    embedder: object
    thresholds: object
    n_discrepancies: dict


def profile_stage(inputs: Inputs, cfg: RunConfig) -> ProfileStage:
    disc = pair_snapshots(inputs.snapshot_a, inputs.snapshot_b)
    group_of = dict(zip(inputs.snapshot_a["id"], inputs.snapshot_a["ethnic_group"]))
    groups = sorted(set(GROUPS) | set(inputs.base["ethnic_group"].unique()))
    profiles, inventories, counts = {}, {}, {}
    for fld in NAME_FIELDS:
        recs = [d for d in disc if d.field == fld]
        counts[fld] = len(recs)
        profiles[fld] = build_profile(recs, group_of, groups, fallback_to_pooled=True)
        inventories[fld] = CharInventory.learn(recs)
    embedder = thresholds = None
    if "combined" in cfg.models:
        embedder = fit_name_embedder(inputs.base["forename"].tolist())
        pairs = [(d.value_a, d.value_b) for d in disc if d.field == "forename"]
        if cfg.pc_mode == "aggregate":
            thresholds = fit_thresholds(pairs, embedder)
        else:
            thresholds = fit_component_thresholds(pairs, embedder)
    return ProfileStage(profiles, inventories, embedder, thresholds, counts)


def make_setting(cfg: RunConfig, setting: int, seed: int) -> CorruptionSetting:
    kind = SETTING_KINDS[setting]
    weights = dict(cfg.group_weights) if kind == DISPROPORTIONATE else None
    return CorruptionSetting(kind, cfg.overall_rate, weights, replicate_seed=seed)


@dataclass
class Replicate:
    index: int
    seed: int
    corrupted: pd.DataFrame
    sample: pd.DataFrame
    pairs: pd.DataFrame


def fit_subsample(left: pd.DataFrame, n: int, seed: int) -> pd.DataFrame:
    if n >= len(left):
        return left
    idx = np.sort(make_rng(seed, "fit_subsample").choice(len(left), n, replace=False))
    return left.iloc[idx]


def summarise(values, metric: str) -> tuple:
    """(mean, lo, hi) over the finite replicate values; no interval for k < 2."""
    x = [v for v in values if v is not None and math.isfinite(v)]
    if not x:
        return (math.nan, math.nan, math.nan)
    if len(x) == 1:
        return (x[0], math.nan, math.nan)
    s = aggregate_replicates(x, metric)
    return (s.mean, s.ci_low, s.ci_high)


def _write_csv(df: pd.DataFrame, path) -> None:
    text = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def run_all(cfg: RunConfig) -> dict:
    """Run the full grid and write overall.csv, by_group.csv, replicates.csv
    and manifest.json into ``cfg.output_dir``.  Returns the manifest."""
    cfg.validate()
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    art_dir = os.path.join(out_dir, "artifacts")
    if cfg.write_artifacts:
        os.makedirs(art_dir, exist_ok=True)
    progress = Progress()
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "master_seed": cfg.seed,
        "defaults": {
            "blocking": [r.label for r in DEFAULT_BLOCKING],
            "training_blocking": [r.label for r in TRAINING_BLOCKING],
            "random_pair_keys": list(RANDOM_PAIR_KEYS),
            "em": {"lam_init": EMOptions().lam_init, "tol": EMOptions().tol,
                   "fix_u": True, "floor": EMOptions().floor},
            "calibration": "min |MMR - target| over distinct weights and +/-inf; "
                           "ties to the lower threshold",
            "interval": "t-interval over replicates, 95%",
            "fit": "models fitted on a subsample of replicate 1 of each setting",
        },
        "seeds": {},
        "thresholds": {},
        "models": {},
        "progress": progress.done,
        "status": "running",
    }
    try:
        _run(cfg, manifest, progress, out_dir, art_dir)
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        _write_json(manifest, os.path.join(out_dir, "manifest.json"))
        raise
    manifest["status"] = "complete"
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def _run(cfg: RunConfig, manifest: dict, progress: Progress, out_dir: str,
         art_dir: str) -> None:
    inputs = load_inputs(cfg)
    manifest["inputs"] = dict(inputs.source, n_base=len(inputs.base))
    manifest["seeds"]["synth"] = derive_seed(cfg.seed, "synth")
    manifest["seeds"]["later_snapshot"] = derive_seed(cfg.seed, "later_snapshot")
    progress.mark("inputs")

    prof = profile_stage(inputs, cfg)
    manifest["n_discrepancies"] = prof.n_discrepancies
    if cfg.write_artifacts:
        for fld, p in prof.profiles.items():
            p.save(os.path.join(art_dir, f"profile_{fld}.json"))
            _write_json(prof.inventories[fld].to_dict(),
                        os.path.join(art_dir, f"inventory_{fld}.json"))
        if prof.embedder is not None and cfg.pc_mode == "aggregate":
            save_embedding(os.path.join(art_dir, "embedding.json"), prof.embedder.model,
                           prof.thresholds)
    progress.mark("profile")

    base = inputs.base
    group_of = dict(zip(base["id"], base["ethnic_group"]))
    groups = sorted(base["ethnic_group"].unique(), key=str)
    overall_rows, group_rows, rep_rows = [], [], []

    for setting in cfg.settings:
        reps = []
        for r in range(1, cfg.replicates + 1):
            seed = derive_seed(cfg.seed, "setting", setting, "replicate", r)
            sample_seed = derive_seed(cfg.seed, "sample", setting, r)
            manifest["seeds"][f"setting{setting}/replicate{r}"] = {
                "corruption": seed, "sample": sample_seed}
            corrupted, audit = corrupt_dataset(base, make_setting(cfg, setting, seed),
                                               prof.profiles, prof.inventories)
            sample = stratified_sample(corrupted, audit, cfg.sample_fraction, sample_seed)
            pairs = block(sample, base)
            reps.append(Replicate(r, seed, corrupted, sample, pairs))
            progress.mark(f"corrupt setting{setting} replicate{r}")

        fit_seed = derive_seed(cfg.seed, "fit", setting)
        manifest["seeds"][f"setting{setting}/fit"] = fit_seed
        fit_left = fit_subsample(reps[0].corrupted, cfg.fit_sample, fit_seed)
        fit_pairs = block(fit_left, base, TRAINING_BLOCKING)
        rnd_pairs = sample_random_pairs(reps[0].corrupted, base, cfg.u_pairs,
                                        make_rng(fit_seed, "u_pairs"),
                                        within=RANDOM_PAIR_KEYS)

        for model_name in cfg.models:
            key = f"{model_name}/setting{setting}"
            spec = model_spec(model_name, prof.embedder, prof.thresholds,
                              tuple(cfg.jw_bands), tuple(cfg.lev_bands), cfg.pc_mode)
            blocked_levels = compare(fit_pairs, fit_left, base, spec).levels
            random_levels = compare(rnd_pairs, reps[0].corrupted, base, spec).levels
            model = fit_model(spec, blocked_levels, random_levels, base,
                              EMOptions(max_iter=cfg.em_max_iter))
            manifest["models"][key] = {"lambda": model.lam, "converged": model.converged,
                                       "iterations": model.iterations,
                                       "n_fit_pairs": int(len(fit_pairs)),
                                       "n_random_pairs": int(len(rnd_pairs))}
            if cfg.write_artifacts:
                model.save(os.path.join(art_dir, f"model_{model_name}_setting{setting}.json"))

            bests = [best_from_pairs(rep.pairs, rep.sample, base, model) for rep in reps]
            threshold = calibrate_threshold(bests[0], cfg.target_mmr)
            manifest["thresholds"][key] = threshold

            per_rep = []
            for rep, best in zip(reps, bests):
                decisions = decide(best, threshold)
                if cfg.write_artifacts:
                    write_decisions_csv(decisions, os.path.join(
                        art_dir, f"decisions_{model_name}_setting{setting}_rep{rep.index}.csv"))
                counts = outcome_counts(classify_outcomes(decisions), group_of)
                rates = rates_and_disparities(counts, cfg.reference_group, groups)
                per_rep.append(rates)
                for g, row in rates.iterrows():
                    rep_rows.append({"model": model_name, "setting": setting,
                                     "replicate": rep.index, "group": g, "n": int(row["n"]),
                                     "fmr": row["fmr"] * 100, "mmr": row["mmr"] * 100,
                                     "fmr_disparity_pp": row["fmr_disparity_pp"],
                                     "mmr_disparity_pp": row["mmr_disparity_pp"]})

            ov = [r.loc[OVERALL] for r in per_rep]
            fmr = summarise([x["fmr"] * 100 for x in ov], "fmr")
            mmr = summarise([x["mmr"] * 100 for x in ov], "mmr")
            overall_rows.append([model_name, setting, *fmr, *mmr, threshold])
            for g in groups:
                row = {"model": model_name, "setting": setting, "group": g}
                for metric in METRICS:
                    scale = 100.0 if metric in ("mmr", "fmr") else 1.0
                    vals = [r.loc[g, metric] * scale for r in per_rep]
                    m, lo, hi = summarise(vals, metric)
                    row.update({f"{metric}_mean": m, f"{metric}_lo": lo, f"{metric}_hi": hi})
                group_rows.append(row)
            progress.mark(f"link {key}")

    overall = pd.DataFrame(overall_rows, columns=OVERALL_COLUMNS)
    by_group = pd.DataFrame(group_rows)
    replicates = pd.DataFrame(rep_rows)
    _write_csv(overall, os.path.join(out_dir, "overall.csv"))
    _write_csv(by_group, os.path.join(out_dir, "by_group.csv"))
    _write_csv(replicates, os.path.join(out_dir, "replicates.csv"))
    progress.mark("reports")
