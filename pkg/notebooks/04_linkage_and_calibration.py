# %% [markdown]
# # Fitting a linkage model and calibrating its threshold
#
# u-probabilities come from random same-gender pairs and stay fixed; EM then
# finds the match prior and m-probabilities on year-and-gender blocks.  The
# fitted model scores production blocks, and the threshold is set so that
# about one record in five is left unlinked.

# %%
from linkstress.corruption import CorruptionSetting, corrupt_dataset, make_rng
from linkstress.evaluation import calibrate_threshold, classify_outcomes, mmr_at, \
    outcome_counts, rates_and_disparities
from linkstress.linkage import (RANDOM_PAIR_KEYS, TRAINING_BLOCKING, best_candidates, block,
                                compare, decide, fit_model, model_spec, sample_random_pairs)
from linkstress.profiling import build_profile, pair_snapshots
from linkstress.synth import SynthSpec, synth_corpus, synth_later_snapshot

base = synth_corpus(SynthSpec.default(10_000, seed=1))
disc = pair_snapshots(base, synth_later_snapshot(base, seed=2))
profiles = {f: build_profile([d for d in disc if d.field == f], None)
            for f in ("forename", "surname")}
corrupted, audit = corrupt_dataset(base, CorruptionSetting("uniform", 0.10, None, 4), profiles)

# %%
for name in ("jw", "jw_no_tf"):
    spec = model_spec(name)
    fit_left = corrupted.sample(1000, random_state=0)
    fit_pairs = block(fit_left, base, TRAINING_BLOCKING)
    rnd = sample_random_pairs(corrupted, base, 50_000, make_rng(5), within=RANDOM_PAIR_KEYS)
    model = fit_model(spec, compare(fit_pairs, fit_left, base, spec).levels,
                      compare(rnd, corrupted, base, spec).levels, base)
    best = best_candidates(corrupted, base, model)
    t = calibrate_threshold(best, 0.20)
    counts = outcome_counts(classify_outcomes(decide(best, t)),
                            dict(zip(base["id"], base["ethnic_group"])))
    overall = rates_and_disparities(counts).loc["Overall"]
    print(f"{name:9} lambda={model.lam:.4f} threshold={t:7.3f} "
          f"MMR={100 * mmr_at(best, t):.2f}% FMR={100 * overall['fmr']:.2f}%")
