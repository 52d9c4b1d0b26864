"""Seeded synthetic longitudinal cohorts with known growth classes.

Each subject gets a personal variant of a template face. Between ages the
face scales up about Sella, non-reference landmarks drift linearly, and the
mandible rotates about Condylion by exactly the angle needed to move SN/MP to
its planned value. The mandible also wanders by an angle-preserving amount at
every visit (a shared shift plus sliding of Menton and Gonion Inferior along
their own line), so landmark positions track the rotation less closely than
SN/MP itself does. Imaging noise (per-collection magnification, per-record
scale jitter, pose, landmarking jitter) is applied last, so SN/MP deltas are
exact whenever the landmarking jitter is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .features import GrowthClass, categorize_target
from .geometry import AGE_BOUNDS, Cephalogram, Landmark, angle_between_lines

# Template positions (mm, x anterior, y superior) at age 9.
TEMPLATE = {
    "Sella": (0.0, 0.0),
    "Nasion": (68.0, 6.0),
    "Post Ethmoid": (30.0, 4.0),
    "Porion": (-22.0, -20.0),
    "Orbitale": (55.0, -18.0),
    "Basion": (-10.0, -42.0),
    "Articulare": (-10.0, -30.0),
    "Condylion": (-8.0, -22.0),
    "Anterior Nasal Spine": (72.0, -42.0),
    "Posterior Nasal Spine": (22.0, -44.0),
    "Point A": (68.0, -50.0),
    "Upper Incisor Tip": (70.0, -72.0),
    "Point B": (62.0, -88.0),
    "Pogonion": (63.0, -98.0),
    "Gnathion": (60.0, -104.0),
    "Menton": (55.0, -108.0),
    "Gonion Posterior": (-6.0, -68.0),
    "Gonion Inferior": (0.0, -76.0),
    "Antegonial Notch": (12.0, -80.0),
    "Pre Gonion": (-7.0, -60.0),
}

MANDIBLE = ("Point B", "Pogonion", "Gnathion", "Menton", "Gonion Posterior",
            "Gonion Inferior", "Antegonial Notch", "Pre Gonion")

# Landmarks defining SN/MP; they receive no independent drift.
SN_MP_POINTS = ("Sella", "Nasion", "Menton", "Gonion Inferior")


class GenerationError(ValueError):
    pass


@dataclass
class CohortConfig:
    """Generator knobs. Age defaults follow the growth-study summary table."""

    n_subjects: int = 639
    age_mean: dict = field(default_factory=lambda: {9: 9.06, 12: 12.07, 18: 17.41})
    age_sd: dict = field(default_factory=lambda: {9: 0.45, 12: 0.39, 18: 1.71})
    age_bounds: dict = field(default_factory=lambda: dict(AGE_BOUNDS))
    mixture: tuple = (0.159, 0.682, 0.159)
    signal_strength: float = 0.6
    delta_mean: float = -1.0        # SN/MP(18-9), degrees
    delta_sd: float = 4.0
    delta12_sd: float = 2.0         # SN/MP(12-9), degrees
    shape_sd: float = 2.0           # between-subject template variation, mm
    drift_sd: float = 0.4           # per-landmark drift, mm per year
    mandible_shift_sd: float = 1.5  # angle-preserving mandible wander per visit, mm
    growth_rate: float = 0.025      # relative size increase per year
    jitter_sd: float = 0.3          # landmarking noise, mm
    scale_jitter: float = 0.04      # per-record scale factor in [1-r, 1+r]
    magnifications: tuple = (1.0, 1.08, 1.13)
    rotation_sd: float = 2.0        # head pose, degrees
    translation_sd: float = 40.0    # image offset, device units
    missing_rate: float = 0.0       # probability a subject loses one record
    seed: int = 0

    def __post_init__(self):
        mix = np.asarray(self.mixture, dtype=float)
        if mix.shape != (3,) or np.any(mix < 0) or not math.isclose(mix.sum(), 1.0, abs_tol=1e-9):
            raise GenerationError("mixture must be three non-negative weights summing to 1")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise GenerationError("signal_strength must lie in [0, 1]")
        knobs = ("delta_sd", "delta12_sd", "shape_sd", "drift_sd", "mandible_shift_sd", "growth_rate", "jitter_sd",
                 "scale_jitter", "rotation_sd", "translation_sd", "missing_rate")
        for k in knobs:
            if getattr(self, k) < 0:
                raise GenerationError(f"{k} must be non-negative")
        if self.n_subjects < 3:
            raise GenerationError("need at least three subjects")
        self.age_mean = {int(k): v for k, v in self.age_mean.items()}
        self.age_sd = {int(k): v for k, v in self.age_sd.items()}
        self.age_bounds = {int(k): tuple(v) for k, v in self.age_bounds.items()}
        self.mixture = tuple(float(m) for m in self.mixture)
        self.magnifications = tuple(float(m) for m in self.magnifications)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("age_mean", "age_sd", "age_bounds"):
            d[k] = {str(g): v for g, v in d[k].items()}
        return d


@dataclass(frozen=True)
class TruthRow:
    subject_id: str
    label: int
    delta: float          # SN/MP(18) - SN/MP(9)
    delta_12_9: float     # SN/MP(12) - SN/MP(9)


@dataclass
class Cohort:
    records: list[Cephalogram]
    truth: list[TruthRow]
    config: CohortConfig

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def class_counts(n: int, mixture) -> np.ndarray:
    """Largest-remainder rounding of ``n * mixture`` (ties to the lower class)."""
    raw = np.asarray(mixture, dtype=float) * n
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def class_deltas(labels: np.ndarray, rng: np.random.Generator, margin: float = 0.1,
                 max_rounds: int = 200) -> np.ndarray:
    """Standardized deltas whose mean -/+ SD banding reproduces ``labels``.

    Mixed values start uniform in (-1 + margin, 1 - margin), extremes at
    magnitudes chosen so the expected SD is one; points are then nudged back
    inside (or outside) their band until the banding is self-consistent.
    """
    labels = np.asarray(labels)
    n = labels.size
    mixed = labels == GrowthClass.MIXED
    low = labels == GrowthClass.HORIZONTAL
    high = labels == GrowthClass.VERTICAL
    n_ext = int(low.sum() + high.sum())
    if n_ext == 0 or mixed.sum() == 0:
        raise GenerationError("mixture leaves a band empty; mean -/+ SD banding cannot reproduce it")

    w = 1.0 - margin
    spread = 0.8
    z = np.empty(n)
    # stratified uniforms keep the realized moments close to the expected ones
    u = (rng.permutation(int(mixed.sum())) + rng.uniform(size=int(mixed.sum()))) / mixed.sum()
    z[mixed] = w * (2.0 * u - 1.0)
    e_mixed = w * w / 3.0
    e_ext = (n - mixed.sum() * e_mixed) / n_ext
    # E[(L + U)^2] = e_ext with U ~ Uniform(0, spread)
    disc = spread**2 - 4.0 * (spread**2 / 3.0 - e_ext)
    base = (-spread + math.sqrt(max(disc, 0.0))) / 2.0
    base = max(base, 1.0 + margin)
    for mask, sign in ((low, -1.0), (high, 1.0)):
        k = int(mask.sum())
        if k:
            v = (rng.permutation(k) + rng.uniform(size=k)) / k
            z[mask] = sign * (base + spread * v)

    for _ in range(max_rounds):
        got, _ = categorize_target(z)
        if np.array_equal(got, labels):
            return (z - z.mean()) / z.std()
        mu, sd = z.mean(), z.std()
        z[mixed] = np.clip(z[mixed], mu - w * sd, mu + w * sd)
        z[low] = np.minimum(z[low], mu - (1.0 + margin) * sd)
        z[high] = np.maximum(z[high], mu + (1.0 + margin) * sd)
    raise GenerationError("could not place deltas consistently with the requested class mixture")


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _sn_mp_orientation(pts: dict) -> float:
    """+1 if increasing the rotation angle of the mandible opens SN/MP."""
    sn = pts["Nasion"] - pts["Sella"]
    mp = pts["Menton"] - pts["Gonion Inferior"]
    cross = sn[0] * mp[1] - sn[1] * mp[0]
    dot = sn @ mp
    # angle_between_lines folds lines; rotating mp by +t changes the folded angle by +sign*t
    return 1.0 if cross * dot > 0 else -1.0


def generate_cohort(cfg: CohortConfig | None = None) -> Cohort:
    """Draw a cohort of 9/12/18-year landmark records plus its truth table."""
    cfg = cfg or CohortConfig()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_subjects
    names = list(TEMPLATE)

    counts = class_counts(n, cfg.mixture)
    labels = np.repeat(np.arange(3), counts)
    labels = labels[rng.permutation(n)]
    z = class_deltas(labels, rng)
    delta18 = cfg.delta_mean + cfg.delta_sd * z
    eps = rng.standard_normal(n)
    rho = cfg.signal_strength
    z12 = rho * z + math.sqrt(1.0 - rho * rho) * eps
    delta12 = cfg.delta12_sd * z12

    template = np.array([TEMPLATE[k] for k in names])
    mand_idx = [names.index(k) for k in MANDIBLE]
    fixed_idx = [names.index(k) for k in SN_MP_POINTS]
    sella_i = names.index("Sella")
    me_i, goi_i = names.index("Menton"), names.index("Gonion Inferior")
    cond_i = names.index("Condylion")

    records: list[Cephalogram] = []
    truth: list[TruthRow] = []
    width = max(4, len(str(n)))
    for i in range(n):
        sid = f"S{i + 1:0{width}d}"
        sub_rng = np.random.default_rng([cfg.seed, i])
        base = template + cfg.shape_sd * sub_rng.standard_normal(template.shape)
        drift = cfg.drift_sd * sub_rng.standard_normal(template.shape)
        drift[fixed_idx] = 0.0
        collection = int(sub_rng.integers(len(cfg.magnifications)))
        ages = {}
        for g in (9, 12, 18):
            lo, hi = cfg.age_bounds[g]
            ages[g] = float(np.clip(cfg.age_mean[g] + cfg.age_sd[g] * sub_rng.standard_normal(), lo, hi))

        pts0 = {k: base[j] for j, k in enumerate(names)}
        if angle_between_lines(pts0["Sella"], pts0["Nasion"], pts0["Menton"], pts0["Gonion Inferior"]) > 80:
            raise GenerationError("template variation produced an implausible SN/MP angle")
        orient = _sn_mp_orientation(pts0)
        planned = {9: 0.0, 12: float(delta12[i]), 18: float(delta18[i])}

        lost = None
        if cfg.missing_rate > 0 and sub_rng.uniform() < cfg.missing_rate:
            lost = int(sub_rng.choice([12, 18]))

        for g in (9, 12, 18):
            years = ages[g] - ages[9]
            shape = base.copy()
            pivot = shape[cond_i]
            rot = _rotation(math.radians(orient * planned[g]))
            shape[mand_idx] = (shape[mand_idx] - pivot) @ rot.T + pivot
            if cfg.mandible_shift_sd > 0:
                w = cfg.mandible_shift_sd * sub_rng.standard_normal(4)
                shape[mand_idx] += w[:2]
                u = shape[me_i] - shape[goi_i]
                u /= np.hypot(*u)
                shape[me_i] += w[2] * u
                shape[goi_i] += w[3] * u
            shape = shape[sella_i] + (shape - shape[sella_i]) * (1.0 + cfg.growth_rate * years)
            shape = shape + drift * years
            # imaging: magnification and scale jitter about the image origin, pose, offset
            scale = cfg.magnifications[collection]
            if cfg.scale_jitter > 0:
                scale *= 1.0 + sub_rng.uniform(-cfg.scale_jitter, cfg.scale_jitter)
            pose = _rotation(math.radians(cfg.rotation_sd * sub_rng.standard_normal()))
            offset = cfg.translation_sd * sub_rng.standard_normal(2)
            shape = scale * shape @ pose.T + offset
            if cfg.jitter_sd > 0:
                shape = shape + cfg.jitter_sd * sub_rng.standard_normal(shape.shape)
            if g == lost:
                continue
            lms = {k: Landmark(k, float(shape[j, 0]), float(shape[j, 1])) for j, k in enumerate(names)}
            records.append(Cephalogram(sid, g, round(ages[g], 2), lms))
        truth.append(TruthRow(sid, int(labels[i]), float(delta18[i]), float(delta12[i])))
    return Cohort(records, truth, cfg)
