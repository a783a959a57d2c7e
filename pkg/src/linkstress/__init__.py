"""Record-linkage fairness stress testing.

Learn name-error profiles from paired snapshots, replay them under
controlled exposure regimes, link corrupted records back with
Fellegi-Sunter models and report subgroup error rates and disparities.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .corruption import CorruptionSetting, apply_corruption, corrupt_dataset, plan_exposure
from .datasets import ingest
from .evaluation import (aggregate_replicates, calibrate_threshold, classify_outcomes,
                         rates_and_disparities, stratified_sample)
from .features import extract_features, fit_embedding, fit_name_embedder, pc_distance
from .linkage import best_candidates, block, em_fit, match_weight, model_spec
from .profiling import ErrorProfile, build_profile, classify_edit, pair_snapshots
from .strings import edit_script, jaro, jaro_winkler, levenshtein
from .synth import SynthSpec, synth_corpus

__all__ = [
    "CorruptionSetting", "ErrorProfile", "RunConfig", "SynthSpec",
    "aggregate_replicates", "apply_corruption", "best_candidates", "block",
    "build_profile", "calibrate_threshold", "classify_edit", "classify_outcomes",
    "corrupt_dataset", "edit_script", "em_fit", "extract_features", "fit_embedding",
    "fit_name_embedder", "ingest", "jaro", "jaro_winkler", "levenshtein", "load_config",
    "match_weight", "model_spec", "pair_snapshots", "parse_config", "pc_distance",
    "plan_exposure", "rates_and_disparities", "stratified_sample", "synth_corpus",
]
