"""Landmark containers and 2D shape geometry.

Angles between landmark lines, the Sella-origin transform used for the
"transformed" coordinate features and generalized Procrustes alignment used
for the "Procrustes" coordinate features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "DegenerateGeometryError",
    "MissingLandmarkError",
    "ConvergenceError",
    "LandmarkRegistry",
    "Landmark",
    "Cephalogram",
    "AlignedShape",
    "ProcrustesResult",
    "AGE_GROUPS",
    "AGE_BOUNDS",
    "angle_between_lines",
    "sn_mp_angle",
    "sella_transform",
    "normalize_shape",
    "shape_size",
    "optimal_rotation",
    "procrustes_align",
]

AGE_GROUPS = (9, 12, 18)

# Observed min/max ages per group in the growth-study cohort.
AGE_BOUNDS = {9: (6.00, 10.92), 12: (10.00, 13.75), 18: (15.00, 28.42)}

SIZE_MODES = ("sum", "centroid")


class GeometryError(ValueError):
    pass


class DegenerateGeometryError(GeometryError):
    pass


class MissingLandmarkError(GeometryError, KeyError):
    def __init__(self, name, where=""):
        self.landmark = name
        msg = f"missing landmark {name!r}"
        if where:
            msg += f" in {where}"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class ConvergenceError(GeometryError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class LandmarkRegistry:
    """Ordered list of landmark names with a per-name ``required`` flag."""

    names: tuple[str, ...]
    required: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise GeometryError("duplicate landmark names in registry")
        unknown = set(self.required) - set(self.names)
        if unknown:
            raise GeometryError(f"required names not in registry: {sorted(unknown)}")

    def __contains__(self, name):
        return name in self.names

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingLandmarkError(name, "registry") from None

    @classmethod
    def parse(cls, text: str) -> "LandmarkRegistry":
        names, required = [], set()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, last = line.rpartition(" ")
            if head and last.lower() == "required":
                name = head.strip()
                required.add(name)
            else:
                name = line
            names.append(name)
        return cls(tuple(names), frozenset(required))

    @classmethod
    def from_file(cls, path) -> "LandmarkRegistry":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "LandmarkRegistry":
        text = resources.files("facegrowth").joinpath("data/landmarks.txt").read_text(encoding="utf-8")
        return cls.parse(text)

    def to_text(self) -> str:
        lines = [f"{n} required" if n in self.required else n for n in self.names]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Landmark:
    name: str
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinates for landmark {self.name!r}")

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Cephalogram:
    """One subject at one timestamp: age group, exact age and named landmarks."""

    subject_id: str
    age_group: int
    age_years: float
    landmarks: Mapping[str, Landmark] = field(default_factory=dict)

    def __post_init__(self):
        if self.age_group not in AGE_GROUPS:
            raise GeometryError(f"age group must be one of {AGE_GROUPS}, got {self.age_group!r}")

    @classmethod
    def from_points(cls, subject_id, age_group, age_years, points: Mapping[str, Sequence[float]]):
        lms = {name: Landmark(name, float(p[0]), float(p[1])) for name, p in points.items()}
        return cls(str(subject_id), int(age_group), float(age_years), lms)

    def point(self, name: str) -> np.ndarray:
        try:
            return self.landmarks[name].xy
        except KeyError:
            raise MissingLandmarkError(name, f"subject {self.subject_id} at age {self.age_group}") from None

    def coords(self, names: Iterable[str]) -> np.ndarray:
        """Landmark coordinates as an ``(n, 2)`` array in the given name order."""
        return np.array([self.point(n) for n in names], dtype=float).reshape(-1, 2)

    def validate(self, registry: LandmarkRegistry, bounds=AGE_BOUNDS) -> list[str]:
        """Return a list of problems (empty when the record is usable)."""
        problems = []
        for name in self.landmarks:
            if name not in registry:
                problems.append(f"unknown landmark {name!r}")
        for name in registry.required:
            if name not in self.landmarks:
                problems.append(f"missing landmark {name!r}")
        if bounds is not None and self.age_group in bounds:
            lo, hi = bounds[self.age_group]
            if not lo <= self.age_years <= hi:
                problems.append(f"age {self.age_years} outside [{lo}, {hi}] for group {self.age_group}")
        return problems


@dataclass(frozen=True)
class AlignedShape:
    coordinates: np.ndarray
    source_id: str | None = None

    def __iter__(self):
        return iter(self.coordinates)


def _as_points(coords) -> np.ndarray:
    if isinstance(coords, AlignedShape):
        coords = coords.coordinates
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected an (n, 2) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    return pts


def angle_between_lines(p1, p2, q1, q2) -> float:
    """Unsigned angle in degrees between line p1-p2 and line q1-q2.

    Lines are undirected, so the result lies in [0, 90] and does not depend on
    the order of either line's endpoints.
    """
    u = np.asarray(p2, dtype=float) - np.asarray(p1, dtype=float)
    v = np.asarray(q2, dtype=float) - np.asarray(q1, dtype=float)
    if not np.any(u) or not np.any(v):
        raise DegenerateGeometryError("line endpoints coincide")
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return math.degrees(math.atan2(abs(cross), abs(dot)))


def vertex_angle(a, vertex, b) -> float:
    """Angle a-vertex-b in degrees, in [0, 180]."""
    u = np.asarray(a, dtype=float) - np.asarray(vertex, dtype=float)
    v = np.asarray(b, dtype=float) - np.asarray(vertex, dtype=float)
    if not np.any(u) or not np.any(v):
        raise DegenerateGeometryError("vertex angle arm has zero length")
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return math.degrees(math.atan2(abs(cross), dot))


def distance(a, b) -> float:
    return float(np.hypot(*(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def sn_mp_angle(c: Cephalogram) -> float:
    """SN/MP angle: Sella-Nasion line against the Menton-Gonion Inferior line."""
    s, n = c.point("Sella"), c.point("Nasion")
    me, go = c.point("Menton"), c.point("Gonion Inferior")
    return angle_between_lines(s, n, me, go)


def sella_transform(c: Cephalogram, names: Sequence[str] | None = None) -> AlignedShape:
    """Translate all landmarks so that Sella sits at the origin.

    ``names`` fixes the row order; by default the cephalogram's own order.
    """
    sella = c.point("Sella")
    if names is None:
        names = list(c.landmarks)
    return AlignedShape(c.coords(names) - sella, c.subject_id)


def shape_size(coords, size_mode: str = "sum") -> float:
    """Size of a centred shape: sum of point norms, or centroid size."""
    pts = _as_points(coords)
    norms = np.hypot(pts[:, 0], pts[:, 1])
    if size_mode == "sum":
        return float(norms.sum())
    if size_mode == "centroid":
        return float(np.sqrt(np.sum(norms**2)))
    raise ValueError(f"size_mode must be one of {SIZE_MODES}, got {size_mode!r}")


def normalize_shape(coords, size_mode: str = "sum", source_id=None) -> AlignedShape:
    """Centre a shape on its landmark mean and scale it to unit size.

    Parameters
    ----------
    coords : array-like, shape (n, 2)
    size_mode : {"sum", "centroid"}
        ``"sum"`` makes the distances of all points to the origin add up to one;
        ``"centroid"`` makes the root of the summed squared distances one.
    """
    pts = _as_points(coords)
    if pts.shape[0] < 2:
        raise DegenerateGeometryError("need at least two points to normalize a shape")
    centred = pts - pts.mean(axis=0)
    size = shape_size(centred, size_mode)
    scale = max(np.abs(pts).max(), 1.0)
    if size <= 1e-14 * scale:
        raise DegenerateGeometryError("all points coincide")
    if source_id is None and isinstance(coords, AlignedShape):
        source_id = coords.source_id
    return AlignedShape(centred / size, source_id)


def optimal_rotation(points, target) -> float:
    """Angle (radians) of the rotation R minimising sum ||R p_i - t_i||^2.

    Both configurations are assumed centred. Closed form in 2D: the angle of
    the complex number sum conj(p_i) * t_i.
    """
    p = _as_points(points)
    t = _as_points(target)
    num = np.sum(p[:, 0] * t[:, 1] - p[:, 1] * t[:, 0])
    den = np.sum(p[:, 0] * t[:, 0] + p[:, 1] * t[:, 1])
    return math.atan2(num, den)


def rotate(points, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return _as_points(points) @ rot.T


@dataclass
class ProcrustesResult:
    aligned: list[AlignedShape]
    mean: np.ndarray
    n_iter: int
    converged: bool
    objective_history: list[float]

    def __iter__(self):
        # allows ``aligned, mean = procrustes_align(...)``
        return iter((self.aligned, self.mean))


def _gpa_objective(stack: np.ndarray) -> float:
    mean = stack.mean(axis=0)
    return float(np.sum((stack - mean) ** 2))


def procrustes_align(
    shapes,
    tol: float = 1e-10,
    max_iter: int = 100,
    size_mode: str = "sum",
    source_ids: Sequence[str] | None = None,
) -> ProcrustesResult:
    """Generalized Procrustes alignment of 2D shapes with a common landmark order.

    Every shape is centred and scaled by :func:`normalize_shape`; shapes are
    then repeatedly rotated onto the running mean (first shape as the initial
    reference) until the unit-size mean moves less than ``tol``.

    Returns a :class:`ProcrustesResult`, which also unpacks as
    ``(aligned_shapes, mean_shape)``.

    Raises
    ------
    ConvergenceError
        If the mean is still moving after ``max_iter`` iterations.
    """
    shapes = list(shapes)
    if not shapes:
        raise GeometryError("procrustes_align needs at least one shape")
    if source_ids is None:
        source_ids = [s.source_id if isinstance(s, AlignedShape) else None for s in shapes]
    normed = [normalize_shape(s, size_mode).coordinates for s in shapes]
    n_points = normed[0].shape[0]
    if any(s.shape[0] != n_points for s in normed):
        raise GeometryError("all shapes must have the same number of landmarks")
    stack = np.stack(normed)

    reference = stack[0].copy()
    history: list[float] = []
    residual = math.inf
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        for k in range(len(stack)):
            stack[k] = rotate(stack[k], optimal_rotation(stack[k], reference))
        history.append(_gpa_objective(stack))
        new_ref = stack.mean(axis=0)
        size = shape_size(new_ref, size_mode)
        if size <= 0:
            raise DegenerateGeometryError("mean shape collapsed to a point")
        new_ref = new_ref / size
        residual = float(np.linalg.norm(new_ref - reference))
        reference = new_ref
        if residual < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"Procrustes alignment did not converge in {max_iter} iterations (residual {residual:.3e})",
            residual,
        )
    aligned = [AlignedShape(stack[k], source_ids[k]) for k in range(len(stack))]
    return ProcrustesResult(aligned, reference, n_iter, converged, history)
