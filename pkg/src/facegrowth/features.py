"""Feature families, target categorization and column standardization.

Three families are built from landmark records:

``ceph``
    cephalometric angles and distance ratios,
``proc``
    landmark coordinates after generalized Procrustes alignment of the cohort,
``trans``
    raw landmark coordinates translated so that Sella is at the origin.

Each feature is taken at age 9, at age 12, or as the 12 minus 9 difference.
The subject's age at the 9-year record is always appended as a last column.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    AGE_BOUNDS,
    Cephalogram,
    LandmarkRegistry,
    distance,
    angle_between_lines,
    procrustes_align,
    sn_mp_angle,
    vertex_angle,
)

FAMILIES = ("ceph", "proc", "trans")
TAGS = ("9", "12", "12-9")
AGE_COLUMN = "age"


class FeatureSpecError(ValueError):
    pass


class EmptyCohortError(ValueError):
    pass


class DegenerateDistributionError(ValueError):
    pass


class GrowthClass(enum.IntEnum):
    HORIZONTAL = 0
    MIXED = 1
    VERTICAL = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value) -> "GrowthClass":
        if isinstance(value, str):
            text = value.strip()
            if text.lstrip("-").isdigit():
                return cls(int(text))
            return cls[text.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class FeatureSpec:
    """One feature column: a measurement from a family at an age tag.

    ``definition`` is a plain dict. Cephalometric features use one of::

        {"kind": "line_angle", "lines": [[a, b], [c, d]]}
        {"kind": "vertex_angle", "points": [a, vertex, b]}
        {"kind": "ratio", "pairs": [[a, b], [c, d]]}    # |ab| / |cd|

    Coordinate features (``proc`` and ``trans``) use
    ``{"kind": "coordinate", "landmark": name, "axis": "x" | "y"}``.
    """

    name: str
    family: str
    tag: str
    definition: dict = field(hash=False, compare=True)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FeatureSpecError(f"unknown feature family {self.family!r}")
        if str(self.tag) not in TAGS:
            raise FeatureSpecError(f"unknown feature tag {self.tag!r}")
        object.__setattr__(self, "tag", str(self.tag))
        kind = self.definition.get("kind")
        if self.family == "ceph":
            if kind not in ("line_angle", "vertex_angle", "ratio"):
                raise FeatureSpecError(f"{self.name}: ceph features need an angle or ratio definition")
        elif kind != "coordinate" or self.definition.get("axis") not in ("x", "y"):
            raise FeatureSpecError(f"{self.name}: {self.family} features need a coordinate definition")

    @property
    def label(self) -> str:
        return f"{self.family}:{self.name}({self.tag})"

    @property
    def groups(self) -> tuple[int, ...]:
        return (9, 12) if self.tag == "12-9" else (int(self.tag),)

    def landmarks(self) -> list[str]:
        d = self.definition
        kind = d["kind"]
        if kind == "line_angle":
            return [p for line in d["lines"] for p in line]
        if kind == "vertex_angle":
            return list(d["points"])
        if kind == "ratio":
            return [p for pair in d["pairs"] for p in pair]
        return [d["landmark"]]

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.family, "tag": self.tag, "definition": self.definition}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        try:
            return cls(d["name"], d["family"], str(d["tag"]), dict(d["definition"]))
        except KeyError as exc:
            raise FeatureSpecError(f"feature spec missing field {exc.args[0]!r}") from None


def load_specs(path) -> list[FeatureSpec]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [FeatureSpec.from_dict(d) for d in data]


def dump_specs(specs: Iterable[FeatureSpec], path) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=1), encoding="utf-8")


def _ceph_catalog() -> list[dict]:
    text = resources.files("facegrowth").joinpath("data/ceph_features.json").read_text(encoding="utf-8")
    return json.loads(text)


def ceph_specs(tags: Sequence[str] = TAGS, catalog: list[dict] | None = None) -> list[FeatureSpec]:
    """The 15 shipped cephalometric measurements at every requested tag.

    SN-MP follows its standard definition; SN/PP, AFH:PFH and the remaining
    measurements are conventional placeholders that can be replaced by
    passing a custom ``catalog``.
    """
    catalog = _ceph_catalog() if catalog is None else catalog
    return [FeatureSpec(c["name"], "ceph", t, dict(c["definition"])) for t in tags for c in catalog]


def coordinate_specs(family: str, registry: LandmarkRegistry, tags: Sequence[str] = TAGS) -> list[FeatureSpec]:
    """X and Y of every registry landmark: 2 x len(registry) columns per tag."""
    return [
        FeatureSpec(f"{axis.upper()} {name}", family, t, {"kind": "coordinate", "landmark": name, "axis": axis})
        for t in tags
        for name in registry.names
        for axis in ("x", "y")
    ]


def default_specs(
    registry: LandmarkRegistry | None = None,
    families: Sequence[str] = FAMILIES,
    tags: Sequence[str] = TAGS,
) -> list[FeatureSpec]:
    registry = registry or LandmarkRegistry.default()
    specs: list[FeatureSpec] = []
    for fam in families:
        specs.extend(ceph_specs(tags) if fam == "ceph" else coordinate_specs(fam, registry, tags))
    return specs


def categorize_target(deltas, sd_mode: str = "population"):
    """Split deltas into three growth classes at mean -/+ one SD.

    Values strictly below ``mean - sd`` are horizontal, strictly above
    ``mean + sd`` vertical, everything in between (edges included) mixed.

    Returns
    -------
    labels : ndarray of int
        :class:`GrowthClass` values.
    thresholds : tuple of float
        ``(mean - sd, mean + sd)``.
    """
    d = np.asarray(deltas, dtype=float).ravel()
    if d.size < 2:
        raise DegenerateDistributionError("need at least two deltas to categorize")
    if not np.all(np.isfinite(d)):
        raise DegenerateDistributionError("deltas must be finite")
    ddof = {"population": 0, "sample": 1}[sd_mode]
    mu = float(d.mean())
    sd = float(d.std(ddof=ddof))
    if sd == 0.0:
        raise DegenerateDistributionError("all deltas are equal (zero standard deviation)")
    lo, hi = mu - sd, mu + sd
    labels = np.full(d.shape, int(GrowthClass.MIXED), dtype=int)
    labels[d < lo] = int(GrowthClass.HORIZONTAL)
    labels[d > hi] = int(GrowthClass.VERTICAL)
    return labels, (lo, hi)


def apply_thresholds(deltas, thresholds) -> np.ndarray:
    """Label deltas with already-fitted band edges."""
    d = np.asarray(deltas, dtype=float)
    lo, hi = thresholds
    labels = np.full(d.shape, int(GrowthClass.MIXED), dtype=int)
    labels[d < lo] = int(GrowthClass.HORIZONTAL)
    labels[d > hi] = int(GrowthClass.VERTICAL)
    return labels


@dataclass
class BuildReport:
    dropped_subjects: list[str] = field(default_factory=list)
    reasons: dict[str, str] = field(default_factory=dict)
    n_rows: int = 0
    n_cols: int = 0

    def drop(self, subject_id: str, reason: str) -> None:
        self.dropped_subjects.append(subject_id)
        self.reasons[subject_id] = reason

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "dropped_subjects": list(self.dropped_subjects),
            "reasons": dict(self.reasons),
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
        }


@dataclass(frozen=True)
class FeatureMatrix:
    """Realized feature table: one row per subject, age as the last column."""

    values: np.ndarray
    columns: tuple[str, ...]
    subject_ids: tuple[str, ...]
    specs: tuple[FeatureSpec, ...] = ()
    labels: np.ndarray | None = None
    raw_delta: np.ndarray | None = None
    thresholds: tuple[float, float] | None = None
    report: BuildReport | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.columns) or v.shape[0] != len(self.subject_ids):
            raise ValueError("values shape does not match columns/subject_ids")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=int)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.values.shape[0]

    def column_index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise KeyError(f"no column {column!r}") from None

    def column(self, column: str) -> np.ndarray:
        return self.values[:, self.column_index(column)]

    def family_of(self, column: str) -> str:
        return column.split(":", 1)[0] if ":" in column else column

    def select(self, columns: Sequence[str], include_age: bool = False) -> "FeatureMatrix":
        cols = list(columns)
        if include_age and AGE_COLUMN not in cols:
            cols.append(AGE_COLUMN)
        idx = [self.column_index(c) for c in cols]
        by_label = {s.label: s for s in self.specs}
        return FeatureMatrix(
            self.values[:, idx],
            tuple(cols),
            self.subject_ids,
            tuple(by_label[c] for c in cols if c in by_label),
            self.labels,
            self.raw_delta,
            self.thresholds,
            self.report,
        )

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(
            self.values[rows],
            self.columns,
            tuple(np.asarray(self.subject_ids, dtype=object)[rows]),
            self.specs,
            None if self.labels is None else self.labels[rows],
            None if self.raw_delta is None else np.asarray(self.raw_delta)[rows],
            self.thresholds,
            self.report,
        )


def _measure_ceph(spec: FeatureSpec, c: Cephalogram) -> float:
    d = spec.definition
    kind = d["kind"]
    if kind == "line_angle":
        (a, b), (p, q) = d["lines"]
        return angle_between_lines(c.point(a), c.point(b), c.point(p), c.point(q))
    if kind == "vertex_angle":
        a, v, b = d["points"]
        return vertex_angle(c.point(a), c.point(v), c.point(b))
    (a, b), (p, q) = d["pairs"]
    den = distance(c.point(p), c.point(q))
    if den == 0:
        raise FeatureSpecError(f"{spec.name}: zero-length denominator for subject {c.subject_id}")
    return distance(c.point(a), c.point(b)) / den


def check_specs(specs: Sequence[FeatureSpec], registry: LandmarkRegistry) -> None:
    seen = set()
    for s in specs:
        key = (s.name, s.family, s.tag)
        if key in seen:
            raise FeatureSpecError(f"duplicate feature spec {s.label}")
        seen.add(key)
        for name in s.landmarks():
            if name not in registry:
                raise FeatureSpecError(f"{s.label} references unknown landmark {name!r}")


def build_feature_matrix(
    cohort: Iterable[Cephalogram],
    specs: Sequence[FeatureSpec],
    registry: LandmarkRegistry | None = None,
    *,
    require_target: bool = True,
    size_mode: str = "sum",
    sd_mode: str = "population",
    age_bounds=AGE_BOUNDS,
    procrustes_tol: float = 1e-10,
    procrustes_max_iter: int = 100,
) -> FeatureMatrix:
    """Compute the feature table for a cohort of landmark records.

    Subjects that lack a needed timestamp (9 always, 12 when any feature uses
    it, 18 when ``require_target``), or whose records fail registry or age
    checks, are dropped and listed in ``matrix.report``. Targets are SN/MP(18)
    minus SN/MP(9), banded by :func:`categorize_target` over the kept rows.
    """
    specs = list(specs)
    if not specs:
        raise FeatureSpecError("no feature specs given")
    registry = registry or LandmarkRegistry.default()
    check_specs(specs, registry)

    needed = {9}
    for s in specs:
        needed.update(s.groups)
    if require_target:
        needed.add(18)
    needs_all_landmarks = any(s.family == "proc" for s in specs)

    by_subject: dict[str, dict[int, Cephalogram]] = {}
    for c in cohort:
        recs = by_subject.setdefault(c.subject_id, {})
        if c.age_group in recs:
            raise ValueError(f"duplicate record for subject {c.subject_id} at age {c.age_group}")
        recs[c.age_group] = c

    report = BuildReport()
    kept: list[str] = []
    for sid, recs in by_subject.items():
        missing = sorted(needed - set(recs))
        if missing:
            report.drop(sid, "missing timestamp(s) " + ", ".join(str(g) for g in missing))
            continue
        problems = []
        for g in sorted(needed):
            for p in recs[g].validate(registry, age_bounds):
                problems.append(f"age {g}: {p}")
            if needs_all_landmarks:
                absent = [n for n in registry.names if n not in recs[g].landmarks]
                problems.extend(f"age {g}: missing landmark {n!r}" for n in absent if n not in registry.required)
            for s in specs:
                if g in s.groups:
                    absent = [n for n in s.landmarks() if n not in recs[g].landmarks]
                    problems.extend(f"age {g}: missing landmark {n!r}" for n in absent)
        if problems:
            report.drop(sid, "; ".join(dict.fromkeys(problems)))
            continue
        kept.append(sid)

    if not kept:
        raise EmptyCohortError("no subject has all required records")

    proc_coords: dict[int, dict[str, np.ndarray]] = {}
    for g in sorted({g for s in specs if s.family == "proc" for g in s.groups}):
        shapes = [by_subject[sid][g].coords(registry.names) for sid in kept]
        result = procrustes_align(shapes, tol=procrustes_tol, max_iter=procrustes_max_iter,
                                  size_mode=size_mode, source_ids=kept)
        proc_coords[g] = {sid: sh.coordinates for sid, sh in zip(kept, result.aligned)}

    def value(spec: FeatureSpec, sid: str, g: int) -> float:
        c = by_subject[sid][g]
        if spec.family == "ceph":
            return _measure_ceph(spec, c)
        name = spec.definition["landmark"]
        axis = 0 if spec.definition["axis"] == "x" else 1
        if spec.family == "trans":
            return float(c.point(name)[axis] - c.point("Sella")[axis])
        return float(proc_coords[g][sid][registry.index(name), axis])

    values = np.empty((len(kept), len(specs) + 1))
    for i, sid in enumerate(kept):
        for j, s in enumerate(specs):
            if s.tag == "12-9":
                values[i, j] = value(s, sid, 12) - value(s, sid, 9)
            else:
                values[i, j] = value(s, sid, int(s.tag))
        values[i, -1] = by_subject[sid][9].age_years

    labels = deltas = thresholds = None
    if require_target:
        deltas = np.array([sn_mp_angle(by_subject[sid][18]) - sn_mp_angle(by_subject[sid][9]) for sid in kept])
        labels, thresholds = categorize_target(deltas, sd_mode)

    columns = tuple(s.label for s in specs) + (AGE_COLUMN,)
    report.n_rows, report.n_cols = values.shape
    return FeatureMatrix(values, columns, tuple(kept), tuple(specs), labels, deltas, thresholds, report)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.scale


def standardize_fit(train, eps: float = 1e-12) -> Standardizer:
    """Per-column mean and (population) SD of a training partition.

    Columns whose SD does not exceed ``eps`` get a unit scale, so they map to
    (near) zero instead of blowing up.
    """
    x = train.values if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on an empty partition")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    scale = np.where(sd > eps, sd, 1.0)
    return Standardizer(mean, scale)


def standardize_apply(s: Standardizer, m):
    """Standardize a :class:`FeatureMatrix` (returns a new one) or an array."""
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(s.apply(m.values), m.columns, m.subject_ids, m.specs,
                             m.labels, m.raw_delta, m.thresholds, m.report)
    return s.apply(m)
