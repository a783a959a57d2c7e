"""Reading and writing registry-shaped CSV extracts."""

from __future__ import annotations

import logging
from typing import Mapping

import pandas as pd

from .errors import DuplicateId, SchemaError
from .strings import normalise_name

log = logging.getLogger(__name__)

REQUIRED = ("id", "forename", "surname", "birth_year", "gender", "ethnic_group")


def _coerce_ids(ids: pd.Series) -> pd.Series:
    text = ids.astype(str).str.strip()
    if text.str.fullmatch(r"-?\d+").all():
        return text.astype("int64")
    return text.astype(object)


def ingest(path, column_map: Mapping[str, str] | None = None) -> pd.DataFrame:
    """Load and normalise a registry extract.

    ``column_map`` maps canonical column names to the file's header names.
    Names are trimmed, NFC-normalised and uppercased; rows without an id
    are dropped; blank names are kept (they are not corruptible).
    """
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    return normalise_frame(raw, column_map)


def normalise_frame(raw: pd.DataFrame, column_map: Mapping[str, str] | None = None
                    ) -> pd.DataFrame:
    column_map = dict(column_map or {})
    df = pd.DataFrame()
    for col in REQUIRED:
        src = column_map.get(col, col)
        if src not in raw.columns:
            raise SchemaError(col)
        df[col] = raw[src]

    ids = df["id"].astype(str).str.strip()
    missing = ids.eq("") | df["id"].isna()
    if missing.any():
        log.warning("dropping %d rows without an id", int(missing.sum()))
        df = df[~missing]
    df = df.copy()
    df["id"] = _coerce_ids(df["id"])
    dup = df["id"].duplicated()
    if dup.any():
        raise DuplicateId(df.loc[dup, "id"].iloc[0])

    for col in ("forename", "surname"):
        df[col] = df[col].map(normalise_name)
    df["gender"] = df["gender"].map(lambda v: normalise_name(v))
    df["ethnic_group"] = df["ethnic_group"].map(lambda v: " ".join(str(v).split()))
    years = pd.to_numeric(df["birth_year"].replace("", None), errors="coerce")
    df["birth_year"] = years.astype("Int64")
    return df.reset_index(drop=True)


def write_dataset(df: pd.DataFrame, path) -> None:
    df[list(REQUIRED)].to_csv(path, index=False)
