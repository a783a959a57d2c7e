"""Run configuration and its flat, typed key-value file format.

One entry per line::

    # comment
    replicates: int = 5
    models: list = jw, jw_no_tf, combined
    overall_rate: float = 0.10
    group_weight.Non-Hispanic White: float = 0.1

Every value carries its type.  Unknown keys, unknown types and type
mismatches are errors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .corruption import default_group_weights
from .errors import ConfigError
from .evaluation import REFERENCE_GROUP
from .linkage import JW_BANDS, LEV_BANDS, MODEL_NAMES


@dataclass
class RunConfig:
    output_dir: str = "runs/default"
    # inputs; when base is empty a synthetic corpus is generated
    base: str = ""
    snapshot_a: str = ""
    snapshot_b: str = ""
    synth_n: int = 50_000
    synth_forename_rate: float = 0.02
    synth_surname_rate: float = 0.03
    models: list = field(default_factory=lambda: list(MODEL_NAMES))
    settings: list = field(default_factory=lambda: [1, 2, 3])
    replicates: int = 5
    overall_rate: float = 0.10
    group_weights: dict = field(default_factory=default_group_weights)
    sample_fraction: float = 0.05
    target_mmr: float = 0.20
    reference_group: str = REFERENCE_GROUP
    seed: int | None = None
    jw_bands: list = field(default_factory=lambda: list(JW_BANDS))
    lev_bands: list = field(default_factory=lambda: list(LEV_BANDS))
    pc_mode: str = "aggregate"
    fit_sample: int = 1_000
    u_pairs: int = 100_000
    em_max_iter: int = 200
    write_artifacts: bool = True

    def validate(self) -> "RunConfig":
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ConfigError(f"unknown models: {bad}")
        if not self.models:
            raise ConfigError("no models selected")
        if not self.settings or any(s not in (1, 2, 3) for s in self.settings):
            raise ConfigError("settings must be a non-empty subset of 1, 2, 3")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0 <= self.overall_rate < 1:
            raise ConfigError("overall_rate must lie in [0, 1)")
        if not 0 < self.sample_fraction <= 1:
            raise ConfigError("sample_fraction must lie in (0, 1]")
        if not 0 <= self.target_mmr <= 1:
            raise ConfigError("target_mmr must lie in [0, 1]")
        if self.pc_mode not in ("aggregate", "per_component"):
            raise ConfigError(f"unknown pc_mode {self.pc_mode!r}")
        if self.seed is None:
            raise ConfigError("a master seed is required")
        if bool(self.snapshot_a) != bool(self.snapshot_b):
            raise ConfigError("snapshot_a and snapshot_b go together")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_TYPES = {
    "int": int,
    "float": float,
    "str": str,
    "bool": bool,
    "list": list,
    "intlist": list,
    "floatlist": list,
}

_FIELD_TYPES = {
    "output_dir": "str", "base": "str", "snapshot_a": "str", "snapshot_b": "str",
    "synth_n": "int", "synth_forename_rate": "float", "synth_surname_rate": "float",
    "models": "list", "settings": "intlist", "replicates": "int",
    "overall_rate": "float", "sample_fraction": "float", "target_mmr": "float",
    "reference_group": "str", "seed": "int", "jw_bands": "floatlist",
    "lev_bands": "intlist", "pc_mode": "str", "fit_sample": "int", "u_pairs": "int",
    "em_max_iter": "int", "write_artifacts": "bool",
}
assert set(_FIELD_TYPES) | {"group_weights"} == {f.name for f in fields(RunConfig)}


def _convert(raw: str, typ: str, where: str):
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "str":
            return raw
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if typ == "list":
            return items
        if typ == "intlist":
            return [int(x) for x in items]
        if typ == "floatlist":
            return [float(x) for x in items]
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {raw!r} as {typ}") from exc
    raise ConfigError(f"{where}: unknown type {typ!r}")


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    weights = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"line {lineno}"
        head, sep, value = line.partition("=")
        key, colon, typ = head.partition(":")
        if not sep or not colon:
            raise ConfigError(f"{where}: expected 'key: type = value'")
        key, typ = key.strip(), typ.strip()
        if typ not in _TYPES:
            raise ConfigError(f"{where}: unknown type {typ!r}")
        if key.startswith("group_weight."):
            if typ != "float":
                raise ConfigError(f"{where}: group weights are floats")
            if weights is None:
                weights = dict(cfg.group_weights)
            weights[key.split(".", 1)[1].strip()] = _convert(value, "float", where)
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if typ != _FIELD_TYPES[key]:
            raise ConfigError(f"{where}: {key} is {_FIELD_TYPES[key]}, not {typ}")
        setattr(cfg, key, _convert(value, typ, where))
    if weights is not None:
        cfg.group_weights = weights
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "group_weights":
            for g in sorted(value):
                lines.append(f"group_weight.{g}: float = {value[g]!r}")
            continue
        if value is None:
            continue
        typ = _FIELD_TYPES[f.name]
        if isinstance(value, list):
            text = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{f.name}: {typ} = {text}")
    return "\n".join(lines) + "\n"
