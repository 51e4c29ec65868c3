"""Best-effort preprocessing for two public datasets.

Neither file ships with the package. Each recipe turns a locally downloaded
copy into a plain numeric CSV that ``linproxy --input`` can audit:

- Chicago Strategic Subject List (data.cityofchicago.org, "Strategic Subject
  List"): protected race or sex, the eight ``PREDICTOR RAT`` inputs, target
  ``SSL SCORE``.
- UCI Communities and Crime (archive.ics.uci.edu, dataset 183): protected Z is
  racepctblack - racePctWhite, inputs are every predictive attribute that has
  no missing values and does not measure race directly, target
  ViolentCrimesPerPop.

Row filters and the race-column list are our reading of an under-specified
pipeline, so results are approximate.

    python -m linproxy.recipes ssl Strategic_Subject_List.csv ssl.csv
    python -m linproxy.recipes communities communities.data communities.names cc.csv
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

SSL_TARGET = "SSL SCORE"
SSL_PROTECTED = {"race": ("RACE CODE CD", ("WHI", "BLK")), "sex": ("SEX CODE CD", ("F", "M"))}
SSL_AGE = "PREDICTOR RAT AGE AT LATEST ARREST"
SSL_GANG = "PREDICTOR RAT GANG AFFILIATION"

CC_TARGET = "ViolentCrimesPerPop"
CC_PROTECTED = "race_gap"
CC_NON_PREDICTIVE = ("state", "county", "community", "communityname", "fold")
CC_RACE_COLUMNS = (
    "racepctblack",
    "racePctWhite",
    "racePctAsian",
    "racePctHisp",
    "whitePerCap",
    "blackPerCap",
    "indianPerCap",
    "AsianPerCap",
    "OtherPerCap",
    "HispPerCap",
)


def _age_value(cell) -> float:
    """Map an age bracket such as '20-30' or 'less than 20' to a number."""
    if pd.isna(cell):
        return np.nan
    text = str(cell).strip().lower()
    try:
        return float(text)
    except ValueError:
        pass
    if m := re.fullmatch(r"(\d+)\s*-\s*(\d+)", text):
        return (float(m[1]) + float(m[2])) / 2
    if m := re.fullmatch(r"less than (\d+)", text):
        return float(m[1]) - 5
    if m := re.fullmatch(r"(\d+)\s*(\+|or more|and over)", text):
        return float(m[1]) + 5
    return np.nan


def ssl_frame(path: str | Path, protected: str = "race") -> tuple[pd.DataFrame, list[str]]:
    """Binary protected column 'z' (WHI/F = 0, BLK/M = 1), predictors, 'y'.

    Rows with another race or sex label, or any missing value in the kept
    columns, are dropped.
    """
    if protected not in SSL_PROTECTED:
        raise ValueError(f"protected must be one of {sorted(SSL_PROTECTED)}")
    column, (zero, one) = SSL_PROTECTED[protected]
    raw = pd.read_csv(path, dtype=str, skipinitialspace=True)
    predictors = [c for c in raw.columns if c.startswith("PREDICTOR RAT")]
    for name in (column, SSL_TARGET):
        if name not in raw.columns:
            raise DataError(f"SSL file lacks column {name!r}")
    if not predictors:
        raise DataError("SSL file has no 'PREDICTOR RAT' columns")

    out = pd.DataFrame({"z": raw[column].str.strip().map({zero: 0.0, one: 1.0})})
    for name in predictors:
        if name == SSL_AGE:
            out[name] = raw[name].map(_age_value)
        else:
            out[name] = pd.to_numeric(raw[name], errors="coerce")
    out["y"] = pd.to_numeric(raw[SSL_TARGET], errors="coerce")
    return out.dropna().reset_index(drop=True), predictors


def attribute_names(names_path: str | Path) -> list[str]:
    """Column names from the '@attribute' lines of a UCI .names file."""
    names = []
    for line in Path(names_path).read_text(errors="replace").splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0].lower() == "@attribute":
            names.append(parts[1])
    if not names:
        raise DataError(f"no @attribute lines in {names_path}")
    return names


def communities_frame(
    data_path: str | Path, names_path: str | Path
) -> tuple[pd.DataFrame, list[str]]:
    """Derived protected column, clean predictors and target, one row per community."""
    names = attribute_names(names_path)
    raw = pd.read_csv(data_path, header=None, names=names, na_values="?")
    for name in ("racepctblack", "racePctWhite", CC_TARGET):
        if name not in raw.columns:
            raise DataError(f"Communities file lacks column {name!r}")
    excluded = set(CC_NON_PREDICTIVE) | set(CC_RACE_COLUMNS) | {CC_TARGET}
    features = [c for c in names if c not in excluded and not raw[c].isna().any()]
    out = pd.DataFrame({CC_PROTECTED: raw["racepctblack"] - raw["racePctWhite"]})
    for name in features:
        out[name] = raw[name].astype(float)
    out["y"] = raw[CC_TARGET]
    return out.dropna().reset_index(drop=True), features


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m linproxy.recipes")
    sub = p.add_subparsers(dest="dataset", required=True)
    s = sub.add_parser("ssl")
    s.add_argument("source")
    s.add_argument("out")
    s.add_argument("--protected", choices=sorted(SSL_PROTECTED), default="race")
    c = sub.add_parser("communities")
    c.add_argument("data")
    c.add_argument("names")
    c.add_argument("out")
    args = p.parse_args(argv)

    if args.dataset == "ssl":
        frame, features = ssl_frame(args.source, args.protected)
    else:
        frame, features = communities_frame(args.data, args.names)
    frame.to_csv(args.out, index=False)
    print(f"{len(frame)} rows, {len(features)} features -> {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
