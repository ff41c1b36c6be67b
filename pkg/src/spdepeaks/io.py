"""CSV and manifest persistence.

Floats are written with 17 significant digits so every value round-trips
bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .estimate import MONTE_CARLO, ORACLE, GrowthIndexReport, MomentField

MOMENT_COLUMNS = ("t", "x", "nu", "value", "se", "n_paths", "source")
GROWTH_COLUMNS = ("alpha", "slope", "slope_se", "classification")
CLASSES = ("grow", "decay", "dead-band", "unavailable")


class CSVFormatError(ValueError):
    """Malformed CSV input; the message carries the file and line number."""


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def canonical_json(d) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)


def canonical_hash(d) -> str:
    return hashlib.sha256(canonical_json(d).encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# moments.csv
# ---------------------------------------------------------------------------

def write_moments_csv(path, fields: Iterable[MomentField]) -> Path:
    """Rows ordered by time, then ``nu``, then ``x``."""
    fields = sorted(fields, key=lambda f: f.nu)
    if not fields:
        raise ValueError("no moment fields to write")
    times = fields[0].times
    for f in fields[1:]:
        if not (np.array_equal(f.times, times) and np.array_equal(f.xs, fields[0].xs)):
            raise ValueError("moment fields must share one grid")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MOMENT_COLUMNS)
        for i, t in enumerate(times):
            ts = fmt(t)
            for f in fields:
                nu, n = fmt(f.nu), str(int(f.n_paths))
                for x, v, s in zip(f.xs, f.values[i], f.ses[i]):
                    w.writerow((ts, fmt(x), nu, fmt(v), fmt(s), n, f.source))
    return path


def _float(tok: str, where: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CSVFormatError(f"{where}: cannot parse {tok!r} as a number") from None


def read_moments_csv(path) -> List[MomentField]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError:
        raise
    rows = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CSVFormatError(f"{path}:1: empty file")
        if tuple(h.strip() for h in header) != MOMENT_COLUMNS:
            raise CSVFormatError(f"{path}:1: header must be {','.join(MOMENT_COLUMNS)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) != len(MOMENT_COLUMNS):
                raise CSVFormatError(f"{where}: expected {len(MOMENT_COLUMNS)} columns, got {len(row)}")
            t, x, nu, v, s = (_float(tok, f"{where} column {c}") for tok, c in zip(row[:5], MOMENT_COLUMNS))
            try:
                n = int(row[5])
            except ValueError:
                raise CSVFormatError(f"{where} column n_paths: cannot parse {row[5]!r} as an integer") from None
            src = row[6].strip()
            if src not in (MONTE_CARLO, ORACLE):
                raise CSVFormatError(f"{where} column source: expected {MONTE_CARLO} or {ORACLE}, got {src!r}")
            if v < 0 or s < 0 or math.isnan(v):
                raise CSVFormatError(f"{where}: value and se must be nonnegative numbers")
            rows.setdefault(nu, []).append((lineno, t, x, v, s, n, src))

    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    out = []
    for nu, rs in sorted(rows.items()):
        times = np.unique([r[1] for r in rs])
        xs = np.unique([r[2] for r in rs])
        if len(rs) != times.size * xs.size:
            raise CSVFormatError(f"{path}: nu={nu} rows do not form a full (t, x) grid "
                                 f"({len(rs)} rows for {times.size} times x {xs.size} points)")
        vals = np.full((times.size, xs.size), np.nan)
        ses = np.full_like(vals, np.nan)
        ti = {t: i for i, t in enumerate(times)}
        xi = {x: j for j, x in enumerate(xs)}
        for lineno, t, x, v, s, n, src in rs:
            i, j = ti[t], xi[x]
            if not math.isnan(vals[i, j]):
                raise CSVFormatError(f"{path}:{lineno}: duplicate row for t={t}, x={x}, nu={nu}")
            if n != rs[0][5] or src != rs[0][6]:
                raise CSVFormatError(f"{path}:{lineno}: n_paths/source differ from line {rs[0][0]}")
            vals[i, j], ses[i, j] = v, s
        out.append(MomentField(nu, times, xs, vals, ses, rs[0][5], rs[0][6]))
    return out


# ---------------------------------------------------------------------------
# growth_index.csv
# ---------------------------------------------------------------------------

def write_growth_csv(path, report: GrowthIndexReport) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROWTH_COLUMNS)
        for a, s, se, c in zip(report.alpha_grid, report.slopes, report.slope_ses, report.classification):
            w.writerow((fmt(a), fmt(s), fmt(se), c))
    return path


def read_growth_csv(path):
    """``(alphas, slopes, slope_ses, classification)`` from a growth-index CSV."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != GROWTH_COLUMNS:
            raise CSVFormatError(f"{path}:1: header must be {','.join(GROWTH_COLUMNS)}")
        cols = ([], [], [], [])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CSVFormatError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            for k in range(3):
                cols[k].append(_float(row[k], f"{path}:{lineno} column {GROWTH_COLUMNS[k]}"))
            if row[3] not in CLASSES:
                raise CSVFormatError(f"{path}:{lineno} column classification: unknown value {row[3]!r}")
            cols[3].append(row[3])
    return np.array(cols[0]), np.array(cols[1]), np.array(cols[2]), cols[3]


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    config_hash: str
    tool_version: str
    started: str
    finished: str
    outputs: List[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def output_entries(paths: Iterable) -> List[dict]:
    return [{"file": Path(p).name, "sha256": file_digest(p)} for p in paths]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path
