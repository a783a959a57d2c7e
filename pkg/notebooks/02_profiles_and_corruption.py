# %% [markdown]
# # Learning error profiles and replaying them
#
# Two snapshots of the same people differ where names were re-keyed or
# changed.  Profiling those differences gives a joint distribution over
# (edit type, edit distance, position) per group, which the corruption
# engine then replays on a clean extract.

# %%
from linkstress.corruption import CorruptionSetting, corrupt_dataset, default_group_weights
from linkstress.profiling import CharInventory, build_profile, pair_snapshots
from linkstress.synth import SynthSpec, synth_corpus, synth_later_snapshot

base = synth_corpus(SynthSpec.default(20_000, seed=1))
later = synth_later_snapshot(base, seed=2)
disc = pair_snapshots(base, later)
print(f"{len(disc)} within-person discrepancies")

group_of = dict(zip(base["id"], base["ethnic_group"]))
groups = sorted(base["ethnic_group"].unique())
profiles = {f: build_profile([d for d in disc if d.field == f], group_of, groups,
                             fallback_to_pooled=True) for f in ("forename", "surname")}
inventories = {f: CharInventory.learn([d for d in disc if d.field == f])
               for f in ("forename", "surname")}
print(profiles["forename"].marginals("Asian")["type"])

# %% [markdown]
# Setting 3 spends a fixed 10% budget unevenly across groups.  The audit
# records every exposure, so realised rates can be read straight off it.

# %%
setting = CorruptionSetting("disproportionate", 0.10, default_group_weights(), replicate_seed=3)
corrupted, audit = corrupt_dataset(base, setting, profiles, inventories)
rates = audit[audit["field"] == "forename"].groupby("group")["exposed"].mean()
print((100 * rates).round(1).to_string())
print(audit[audit["exposed"]].head(5)[["id", "field", "original", "corrupted", "type",
                                       "bucket", "position"]].to_string(index=False))
