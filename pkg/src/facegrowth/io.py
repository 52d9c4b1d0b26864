"""CSV and JSON formats shared by the command-line tools.

Floats are written with ``repr`` so every file re-parses to the exact values
that were written.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import LabeledSet
from .features import FeatureMatrix, GrowthClass
from .geometry import AGE_GROUPS, Cephalogram, Landmark

LANDMARK_HEADER = ("subject_id", "group", "age_years", "landmark", "x", "y")
TRUTH_HEADER = ("subject_id", "class", "delta")
SWEEP_HEADER = ("method", "factor", "mean", "sd")
SELECT_HEADER = ("stage", "rank", "model", "feature", "family", "mean", "sd")
PREDICTION_HEADER = ("subject_id", "class")
SCHEMA = 1


class CsvFormatError(ValueError):
    """Malformed CSV input; ``line`` is 1-based, ``column`` names the field."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = None if path is None else str(path)
        self.line = line
        self.column = column
        where = ":".join(str(p) for p in (self.path, line) if p is not None)
        col = f" column {column!r}" if column is not None else ""
        super().__init__(f"{where}:{col} {message}" if where else f"{col.strip()} {message}".strip())


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _read_csv(path, header: Sequence[str] | None = None, prefix: Sequence[str] | None = None):
    """Yield ``(line_number, row_dict)`` after checking the header."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        got = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file, header missing", path, 1) from None
    if header is not None and tuple(got) != tuple(header):
        raise CsvFormatError(f"header must be exactly {','.join(header)}; got {','.join(got)}", path, 1)
    if prefix is not None and tuple(got[: len(prefix)]) != tuple(prefix):
        raise CsvFormatError(f"header must start with {','.join(prefix)}", path, 1)
    rows = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(got):
            raise CsvFormatError(f"expected {len(got)} fields, found {len(row)}", path, line)
        rows.append((line, dict(zip(got, row))))
    return got, rows


def _float(value: str, path, line, column) -> float:
    try:
        x = float(value)
    except ValueError:
        raise CsvFormatError(f"not a number: {value!r}", path, line, column) from None
    if not math.isfinite(x):
        raise CsvFormatError(f"not a finite number: {value!r}", path, line, column)
    return x


def _int(value: str, path, line, column) -> int:
    try:
        return int(value)
    except ValueError:
        raise CsvFormatError(f"not an integer: {value!r}", path, line, column) from None


# -- landmarks --------------------------------------------------------------------

def write_landmark_csv(records: Iterable[Cephalogram], path) -> None:
    rows = []
    for c in records:
        for name, lm in c.landmarks.items():
            rows.append((c.subject_id, c.age_group, c.age_years, name, lm.x, lm.y))
    _write_csv(path, LANDMARK_HEADER, rows)


def parse_landmark_csv(path) -> list[Cephalogram]:
    """Group landmark rows into one record per (subject, group), in file order."""
    _, rows = _read_csv(path, LANDMARK_HEADER)
    groups: dict[tuple[str, int], dict] = {}
    seen: dict[tuple[str, int, str], int] = {}
    for line, r in rows:
        sid = r["subject_id"]
        if not sid:
            raise CsvFormatError("empty subject_id", path, line, "subject_id")
        g = _int(r["group"], path, line, "group")
        if g not in AGE_GROUPS:
            raise CsvFormatError(f"group must be one of {AGE_GROUPS}", path, line, "group")
        age = _float(r["age_years"], path, line, "age_years")
        name = r["landmark"]
        if not name:
            raise CsvFormatError("empty landmark name", path, line, "landmark")
        x = _float(r["x"], path, line, "x")
        y = _float(r["y"], path, line, "y")
        key = (sid, g, name)
        if key in seen:
            raise CsvFormatError(f"duplicate landmark {name!r} for {sid} at {g} (first on line {seen[key]})",
                                 path, line, "landmark")
        seen[key] = line
        entry = groups.setdefault((sid, g), {"age": age, "line": line, "landmarks": {}})
        if entry["age"] != age:
            raise CsvFormatError(f"age differs from line {entry['line']} for {sid} at {g}", path, line, "age_years")
        entry["landmarks"][name] = Landmark(name, x, y)
    return [Cephalogram(sid, g, e["age"], e["landmarks"]) for (sid, g), e in groups.items()]


# -- truth table ---------------------------------------------------------------------

def write_truth_csv(truth, path) -> None:
    _write_csv(path, TRUTH_HEADER, ((t.subject_id, GrowthClass(t.label).label, t.delta) for t in truth))


def parse_truth_csv(path) -> list[tuple[str, int, float]]:
    _, rows = _read_csv(path, TRUTH_HEADER)
    out = []
    for line, r in rows:
        try:
            cls = int(GrowthClass.parse(r["class"]))
        except (KeyError, ValueError):
            raise CsvFormatError(f"unknown class {r['class']!r}", path, line, "class") from None
        out.append((r["subject_id"], cls, _float(r["delta"], path, line, "delta")))
    return out


# -- feature matrix ---------------------------------------------------------------------

def write_feature_csv(fm: FeatureMatrix, path) -> None:
    """``subject_id``, feature columns, then ``class`` and ``delta`` when labeled."""
    header = ["subject_id", *fm.columns]
    labeled = fm.labels is not None
    if labeled:
        header += ["class", "delta"]
    rows = []
    for i, sid in enumerate(fm.subject_ids):
        row = [sid, *fm.values[i]]
        if labeled:
            delta = fm.raw_delta[i] if fm.raw_delta is not None else float("nan")
            row += [GrowthClass(int(fm.labels[i])).label, delta]
        rows.append(row)
    _write_csv(path, header, rows)


def parse_feature_csv(path) -> FeatureMatrix:
    header, rows = _read_csv(path, prefix=("subject_id",))
    labeled = header[-2:] == ["class", "delta"]
    cols = header[1:-2] if labeled else header[1:]
    if not cols:
        raise CsvFormatError("no feature columns", path, 1)
    values = np.empty((len(rows), len(cols)))
    labels = np.empty(len(rows), dtype=int)
    deltas = np.empty(len(rows))
    sids = []
    for i, (line, r) in enumerate(rows):
        sids.append(r["subject_id"])
        for j, c in enumerate(cols):
            values[i, j] = _float(r[c], path, line, c)
        if labeled:
            try:
                labels[i] = int(GrowthClass.parse(r["class"]))
            except (KeyError, ValueError):
                raise CsvFormatError(f"unknown class {r['class']!r}", path, line, "class") from None
            # nan marks an unknown delta
            deltas[i] = float(r["delta"]) if r["delta"] else float("nan")
    return FeatureMatrix(values, tuple(cols), tuple(sids),
                         labels=labels if labeled else None, raw_delta=deltas if labeled else None)


# -- augmented set ----------------------------------------------------------------------

def write_augmented_csv(data: LabeledSet, columns: Sequence[str], path) -> None:
    """Feature columns, then ``label`` and ``origin`` (``original`` or ``synthetic``)."""
    if len(columns) != data.points.shape[1]:
        raise ValueError("column count does not match point dimension")
    origin = np.where(data.synthetic, "synthetic", "original")
    rows = ([*data.points[i], GrowthClass(int(data.labels[i])).label, origin[i]] for i in range(len(data.labels)))
    _write_csv(path, [*columns, "label", "origin"], rows)


def parse_augmented_csv(path):
    """Return ``(points, labels, synthetic_mask, columns)``."""
    header, rows = _read_csv(path)
    if header[-2:] != ["label", "origin"] or len(header) < 3:
        raise CsvFormatError("header must end with label,origin", path, 1)
    cols = header[:-2]
    pts = np.empty((len(rows), len(cols)))
    labels = np.empty(len(rows), dtype=int)
    synth = np.empty(len(rows), dtype=bool)
    for i, (line, r) in enumerate(rows):
        for j, c in enumerate(cols):
            pts[i, j] = _float(r[c], path, line, c)
        try:
            labels[i] = int(GrowthClass.parse(r["label"]))
        except (KeyError, ValueError):
            raise CsvFormatError(f"unknown class {r['label']!r}", path, line, "label") from None
        if r["origin"] not in ("original", "synthetic"):
            raise CsvFormatError("origin must be original or synthetic", path, line, "origin")
        synth[i] = r["origin"] == "synthetic"
    return pts, labels, synth, cols


# -- result tables ------------------------------------------------------------------------

def write_sweep_csv(rows: Iterable[dict], path) -> None:
    _write_csv(path, SWEEP_HEADER, ((r["method"], r["factor"], r["mean"], r["sd"]) for r in rows))


def parse_sweep_csv(path) -> list[dict]:
    _, rows = _read_csv(path, SWEEP_HEADER)
    return [{"method": r["method"], "factor": _float(r["factor"], path, line, "factor"),
             "mean": _float(r["mean"], path, line, "mean"), "sd": _float(r["sd"], path, line, "sd")}
            for line, r in rows]


def write_select_csv(rows: Iterable[dict], path) -> None:
    _write_csv(path, SELECT_HEADER, ([r[k] for k in SELECT_HEADER] for r in rows))


def parse_select_csv(path) -> list[dict]:
    _, rows = _read_csv(path, SELECT_HEADER)
    out = []
    for line, r in rows:
        out.append({"stage": _int(r["stage"], path, line, "stage"), "rank": _int(r["rank"], path, line, "rank"),
                    "model": r["model"], "feature": r["feature"], "family": r["family"],
                    "mean": _float(r["mean"], path, line, "mean"), "sd": _float(r["sd"], path, line, "sd")})
    return out


def write_predictions_csv(subject_ids, labels, path) -> None:
    _write_csv(path, PREDICTION_HEADER, ((s, GrowthClass(int(c)).label) for s, c in zip(subject_ids, labels)))


def parse_predictions_csv(path) -> dict[str, int]:
    """Map subject id to class code; the truth CSV is accepted too."""
    header, rows = _read_csv(path, prefix=PREDICTION_HEADER)
    out: dict[str, int] = {}
    for line, r in rows:
        sid = r["subject_id"]
        if sid in out:
            raise CsvFormatError(f"duplicate subject {sid!r}", path, line, "subject_id")
        try:
            out[sid] = int(GrowthClass.parse(r["class"]))
        except (KeyError, ValueError):
            raise CsvFormatError(f"unknown class {r['class']!r}", path, line, "class") from None
    return out


# -- JSON --------------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(obj: dict, path) -> None:
    doc = {"schema": SCHEMA, **_jsonable(obj)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
