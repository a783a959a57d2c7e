"""Command-line entry point: profile, synth, corrupt, link, evaluate, run-all."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import pandas as pd

from .config import RunConfig, load_config
from .corruption import SETTING_KINDS, corrupt_dataset, make_rng, write_audit_csv
from .datasets import ingest, write_dataset
from .errors import LinkstressError
from .evaluation import (REFERENCE_GROUP, calibrate_threshold, classify_outcomes,
                         outcome_counts, rates_and_disparities, stratified_sample)
from .features import fit_component_thresholds, fit_name_embedder, fit_thresholds
from .linkage import (MODEL_NAMES, RANDOM_PAIR_KEYS, TRAINING_BLOCKING, EMOptions,
                      best_candidates, compare, decide, fit_model, model_spec,
                      sample_random_pairs, block, write_decisions_csv)
from .pipeline import derive_seed, fit_subsample, make_setting, run_all
from .profiling import NAME_FIELDS, CharInventory, ErrorProfile, build_profile, pair_snapshots
from .synth import GROUPS, SynthSpec, synth_corpus, synth_later_snapshot

log = logging.getLogger("linkstress")


def _discrepancy_frame(disc) -> pd.DataFrame:
    return pd.DataFrame([{
        "id": d.person_id, "field": d.field, "value_a": d.value_a, "value_b": d.value_b,
        "jw": d.jw, "lev": d.lev, "type": d.primary_type,
        "types": "+".join(sorted(d.type_pattern)), "bucket": d.distance_bucket,
        "position": d.position} for d in disc],
        columns=["id", "field", "value_a", "value_b", "jw", "lev", "type", "types",
                 "bucket", "position"])


def cmd_profile(args) -> None:
    a, b = ingest(args.snapshot_a), ingest(args.snapshot_b)
    disc = pair_snapshots(a, b)
    group_of = dict(zip(a["id"], a["ethnic_group"]))
    groups = sorted(set(GROUPS) | set(a["ethnic_group"].unique()))
    os.makedirs(args.out_dir, exist_ok=True)
    for fld in NAME_FIELDS:
        recs = [d for d in disc if d.field == fld]
        build_profile(recs, group_of, groups, fallback_to_pooled=True).save(
            os.path.join(args.out_dir, f"profile_{fld}.json"))
        with open(os.path.join(args.out_dir, f"inventory_{fld}.json"), "w") as fh:
            json.dump(CharInventory.learn(recs).to_dict(), fh, indent=1, sort_keys=True)
    _discrepancy_frame(disc).to_csv(os.path.join(args.out_dir, "discrepancies.csv"),
                                    index=False, float_format="%.6f")
    print(f"{len(disc)} discrepancies profiled into {args.out_dir}")


def cmd_synth(args) -> None:
    base = synth_corpus(SynthSpec.default(args.n, seed=args.seed))
    write_dataset(base, args.out)
    if args.later:
        later = synth_later_snapshot(base, args.forename_rate, args.surname_rate,
                                     seed=args.seed)
        write_dataset(later, args.later)
    print(f"wrote {len(base)} records to {args.out}")


def _load_profiles(profile_dir):
    profiles, inventories = {}, {}
    for fld in NAME_FIELDS:
        profiles[fld] = ErrorProfile.load(os.path.join(profile_dir, f"profile_{fld}.json"))
        inv_path = os.path.join(profile_dir, f"inventory_{fld}.json")
        if os.path.exists(inv_path):
            with open(inv_path) as fh:
                inventories[fld] = CharInventory(json.load(fh))
    return profiles, inventories


def cmd_corrupt(args) -> None:
    base = ingest(args.input)
    profiles, inventories = _load_profiles(args.profile_dir)
    cfg = RunConfig(overall_rate=args.rate, seed=args.seed)
    if args.config:
        cfg = load_config(args.config, cfg)
    setting = make_setting(cfg, args.setting, args.seed)
    corrupted, audit = corrupt_dataset(base, setting, profiles, inventories)
    write_dataset(corrupted, args.out)
    write_audit_csv(audit, args.audit)
    n = int(audit["exposed"].sum())
    print(f"setting {args.setting} ({SETTING_KINDS[args.setting]}): {n} field corruptions")


def _embedding_for(args, right):
    if args.model != "combined":
        return None, None
    if not args.discrepancies:
        raise LinkstressError("the combined model needs --discrepancies from `profile`")
    disc = pd.read_csv(args.discrepancies, dtype=str, keep_default_na=False)
    pairs = list(disc.loc[disc["field"] == "forename", ["value_a", "value_b"]]
                 .itertuples(index=False, name=None))
    embedder = fit_name_embedder(right["forename"].tolist())
    fit = fit_thresholds if args.pc_mode == "aggregate" else fit_component_thresholds
    return embedder, fit(pairs, embedder)


def cmd_link(args) -> None:
    left, right = ingest(args.left), ingest(args.right)
    embedder, thresholds = _embedding_for(args, right)
    spec = model_spec(args.model, embedder, thresholds, pc_mode=args.pc_mode)
    fit_seed = derive_seed(args.seed, "fit")
    fit_left = fit_subsample(left, args.fit_sample, fit_seed)
    fit_pairs = block(fit_left, right, TRAINING_BLOCKING)
    rnd = sample_random_pairs(left, right, args.u_pairs, make_rng(fit_seed, "u_pairs"),
                              within=RANDOM_PAIR_KEYS)
    model = fit_model(spec, compare(fit_pairs, fit_left, right, spec).levels,
                      compare(rnd, left, right, spec).levels, right, EMOptions())
    best = best_candidates(left, right, model)
    threshold = args.threshold
    if threshold is None:
        threshold = calibrate_threshold(best, args.target_mmr)
    write_decisions_csv(decide(best, threshold), args.out)
    if args.model_out:
        model.save(args.model_out)
    print(f"threshold {threshold:.6f}; decisions written to {args.out}")


def cmd_evaluate(args) -> None:
    decisions = pd.read_csv(args.decisions, dtype={"left_id": str, "right_id": str},
                            keep_default_na=False)
    dataset = ingest(args.dataset)
    ids = {str(i): i for i in dataset["id"]}
    decisions["left_id"] = decisions["left_id"].map(ids)
    decisions["right_id"] = decisions["right_id"].map(lambda v: ids.get(v) if v else None)
    if args.audit:
        audit = pd.read_csv(args.audit, dtype={"field": str})
        audit["id"] = audit["id"].astype(str).map(ids)
        sample = stratified_sample(dataset, audit, args.sample_fraction, args.seed)
        decisions = decisions[decisions["left_id"].isin(set(sample["id"]))]
    group_of = dict(zip(dataset["id"], dataset["ethnic_group"]))
    counts = outcome_counts(classify_outcomes(decisions), group_of)
    rates = rates_and_disparities(counts, args.reference_group,
                                  sorted(dataset["ethnic_group"].unique()))
    rates[["fmr", "mmr"]] = rates[["fmr", "mmr"]] * 100
    rates.reset_index().to_csv(args.out, index=False, float_format="%.6f")
    print(rates.round(3).to_string())


def cmd_run_all(args) -> None:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {
        "output_dir": args.output_dir, "base": args.base, "snapshot_a": args.snapshot_a,
        "snapshot_b": args.snapshot_b, "synth_n": args.synth_n, "models": args.models,
        "settings": args.settings, "replicates": args.replicates,
        "overall_rate": args.overall_rate, "sample_fraction": args.sample_fraction,
        "target_mmr": args.target_mmr, "pc_mode": args.pc_mode,
        "reference_group": args.reference_group, "fit_sample": args.fit_sample,
        "u_pairs": args.u_pairs,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.seed = args.seed
    manifest = run_all(cfg)
    print(f"run complete: {len(manifest['thresholds'])} model x setting cells "
          f"in {cfg.output_dir}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linkstress", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("profile", help="learn error profiles from two snapshots")
    s.add_argument("--snapshot-a", required=True)
    s.add_argument("--snapshot-b", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("synth", help="write a synthetic registry extract")
    s.add_argument("--n", type=int, default=50_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--later", help="also write a later snapshot with name changes")
    s.add_argument("--forename-rate", type=float, default=0.02)
    s.add_argument("--surname-rate", type=float, default=0.03)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("corrupt", help="write one corrupted replicate and its audit")
    s.add_argument("--input", required=True)
    s.add_argument("--profile-dir", required=True)
    s.add_argument("--setting", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--rate", type=float, default=0.10)
    s.add_argument("--config", help="typed key-value file (group weights for setting 3)")
    s.add_argument("--out", required=True)
    s.add_argument("--audit", required=True)
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("link", help="fit a model and link left records to right")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--model", choices=MODEL_NAMES, default="jw")
    s.add_argument("--discrepancies", help="discrepancies.csv (combined model only)")
    s.add_argument("--pc-mode", choices=("aggregate", "per_component"), default="aggregate")
    s.add_argument("--threshold", type=float)
    s.add_argument("--target-mmr", type=float, default=0.20)
    s.add_argument("--fit-sample", type=int, default=1_000)
    s.add_argument("--u-pairs", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--model-out")
    s.set_defaults(func=cmd_link)

    s = sub.add_parser("evaluate", help="outcome rates and disparities for decisions")
    s.add_argument("--decisions", required=True)
    s.add_argument("--dataset", required=True, help="the corrupted (left) dataset")
    s.add_argument("--audit", help="corruption audit; enables stratified sampling")
    s.add_argument("--sample-fraction", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reference-group", default=REFERENCE_GROUP)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run-all", help="full grid of models x settings x replicates")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--config")
    s.add_argument("--output-dir")
    s.add_argument("--base")
    s.add_argument("--snapshot-a")
    s.add_argument("--snapshot-b")
    s.add_argument("--synth-n", type=int)
    s.add_argument("--models", nargs="+", choices=MODEL_NAMES)
    s.add_argument("--settings", nargs="+", type=int, choices=(1, 2, 3))
    s.add_argument("--replicates", type=int)
    s.add_argument("--overall-rate", type=float)
    s.add_argument("--sample-fraction", type=float)
    s.add_argument("--target-mmr", type=float)
    s.add_argument("--pc-mode", choices=("aggregate", "per_component"))
    s.add_argument("--reference-group")
    s.add_argument("--fit-sample", type=int)
    s.add_argument("--u-pairs", type=int)
    s.set_defaults(func=cmd_run_all)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (LinkstressError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
