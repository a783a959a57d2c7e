# %% [markdown]
# # A structural embedding of forenames
#
# Thirteen structure features per forename are standardised and rotated by
# PCA.  Distances between two names in the first eight components are then
# cut at percentiles of within-person distances, giving five agreement levels.

# %%
import numpy as np

from linkstress.features import FEATURE_NAMES, discretise, fit_name_embedder, fit_thresholds, \
    pc_distance
from linkstress.profiling import pair_snapshots
from linkstress.synth import SynthSpec, synth_corpus, synth_later_snapshot

base = synth_corpus(SynthSpec.default(20_000, seed=1))
embedder = fit_name_embedder(base["forename"].tolist())
model = embedder.model
share = model.explained_variance / len(FEATURE_NAMES)
print("explained variance share:", np.round(share, 3))
top = np.argsort(-np.abs(model.loadings[:, 0]))[:4]
print("PC1 leans on:", [FEATURE_NAMES[i] for i in top])

# %%
disc = pair_snapshots(base, synth_later_snapshot(base, seed=2))
pairs = [(d.value_a, d.value_b) for d in disc if d.field == "forename"]
cuts = fit_thresholds(pairs, embedder)
print("cuts:", np.round(cuts.cuts, 3))
for a, b in pairs[:6]:
    d = float(pc_distance(embedder.embed_one(a), embedder.embed_one(b)))
    print(f"{a:14} vs {b:14} distance {d:.3f} -> level {discretise(d, cuts)}")

# %% [markdown]
# Level 4 is the closest fifth of within-person distances and level 0 is
# anything beyond their median.  Unrelated common names usually land at 0.

# %%
for a, b in [("MARY", "MARY"), ("JOSE", "CHRISTOPHER")]:
    d = float(pc_distance(embedder.embed_one(a), embedder.embed_one(b)))
    print(f"{a:5} vs {b:12} distance {d:.3f} -> level {discretise(d, cuts)}")
