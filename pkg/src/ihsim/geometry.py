"""Cylindrical obstacle fields and line-of-sight blockage.

Obstacles are vertical cylinders whose centres follow a homogeneous Poisson
point process. The density follows from the obstacle cover ratio (the
expected fraction of ground area covered by obstacle footprints) and the
radius distribution, which is uniform on ``[radius_min, radius_max]``.

A link is blocked when any footprint disk touches the 2-D projection of the
link segment and the cylinder is taller than the segment at the crossing.
Under a PPP the number of such disks is Poisson with mean
``density * E[capsule area]`` which gives the closed-form LoS probability
used by :func:`p_los_analytic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

OCR_MAX = 0.9


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if self.z < 0:
            raise ValidationError(f"z must be >= 0, got {self.z}", ["z"])

    def distance(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class ObstacleSpec:
    """Obstacle process parameters.

    ``area`` is the (width, depth) of the sampling rectangle, centred on the
    origin (the WPT). ``endcap`` selects whether the analytic LoS formula
    counts disks that cover a link end point (the default, consistent with
    :func:`is_blocked`) or only the swept rectangle.
    """

    ocr: float = 0.3
    radius_min: float = 0.3
    radius_max: float = 0.6
    height_min: float = 5.0
    height_max: float = 25.0
    area: tuple[float, float] = (50.0, 50.0)
    terminal_height: float = 1.5
    endcap: bool = True

    def __post_init__(self):
        bad = []
        if not (0.0 <= self.ocr <= OCR_MAX) or math.isnan(self.ocr):
            bad.append("ocr")
        if not (0.0 < self.radius_min <= self.radius_max):
            bad.append("radius_min" if self.radius_min <= 0 else "radius_max")
        if not (0.0 < self.height_min <= self.height_max):
            bad.append("height_min" if self.height_min <= 0 else "height_max")
        if len(self.area) != 2 or min(self.area) <= 0:
            bad.append("area")
        if self.terminal_height < 0:
            bad.append("terminal_height")
        if bad:
            raise ValidationError(f"invalid obstacle spec fields: {', '.join(bad)}", bad)

    @property
    def mean_radius(self) -> float:
        return 0.5 * (self.radius_min + self.radius_max)

    @property
    def mean_radius_sq(self) -> float:
        a, b = self.radius_min, self.radius_max
        if a == b:
            return a * a
        return (b**3 - a**3) / (3.0 * (b - a))

    @property
    def total_area(self) -> float:
        return self.area[0] * self.area[1]


@dataclass
class ObstacleField:
    """One realisation of the obstacle process.

    Stored column-wise; ``obstacles`` gives the row view.
    """

    x: np.ndarray
    y: np.ndarray
    radius: np.ndarray
    height: np.ndarray
    density: float
    area: tuple[float, float] = (50.0, 50.0)

    @classmethod
    def empty(cls, area=(50.0, 50.0)) -> "ObstacleField":
        z = np.zeros(0)
        return cls(z, z.copy(), z.copy(), z.copy(), 0.0, area)

    @classmethod
    def from_obstacles(cls, obstacles, density=0.0, area=(50.0, 50.0)) -> "ObstacleField":
        arr = np.asarray(obstacles, dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], density, area)

    @property
    def obstacles(self) -> list[tuple[float, float, float, float]]:
        return [
            (float(a), float(b), float(c), float(d))
            for a, b, c, d in zip(self.x, self.y, self.radius, self.height)
        ]

    def __len__(self) -> int:
        return len(self.x)


def density_from_ocr(spec: ObstacleSpec) -> float:
    """Obstacles per m^2 giving an expected covered fraction of ``spec.ocr``."""
    return spec.ocr / (math.pi * spec.mean_radius_sq)


def sample_field(spec: ObstacleSpec, rng: np.random.Generator) -> ObstacleField:
    lam = density_from_ocr(spec)
    w, d = spec.area
    n = int(rng.poisson(lam * w * d))
    x = rng.uniform(-w / 2, w / 2, n)
    y = rng.uniform(-d / 2, d / 2, n)
    r = rng.uniform(spec.radius_min, spec.radius_max, n)
    h = rng.uniform(spec.height_min, spec.height_max, n)
    return ObstacleField(x, y, r, h, lam, tuple(spec.area))


def segment_hits(a, b, cx, cy, radius, height) -> np.ndarray:
    """Per-obstacle blockage of segment ``a``-``b`` (arrays broadcast).

    ``a`` and ``b`` are (x, y, z) triples. Returns a boolean array shaped like
    ``cx``.
    """
    ax, ay, az = a
    bx, by, bz = b
    vx, vy = bx - ax, by - ay
    wx, wy = ax - cx, ay - cy
    vv = vx * vx + vy * vy
    cc = wx * wx + wy * wy - radius * radius
    if vv == 0.0:
        # segment is a vertical line or a point: disk must contain it
        return (cc <= 0.0) & (height > min(az, bz))
    bh = vx * wx + vy * wy
    disc = bh * bh - vv * cc
    ok = disc >= 0.0
    root = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.clip((-bh - root) / vv, 0.0, 1.0)
    t1 = np.clip((-bh + root) / vv, 0.0, 1.0)
    inside = ok & ((-bh + root) >= 0.0) & ((-bh - root) <= vv)
    z_low = np.minimum(az + (bz - az) * t0, az + (bz - az) * t1)
    return inside & (height > z_low)


def is_blocked(field: ObstacleField, a: Point3, b: Point3) -> bool:
    if len(field) == 0:
        return False
    lo, hi = sorted([(a.x, a.y, a.z), (b.x, b.y, b.z)])
    hits = segment_hits(lo, hi, field.x, field.y, field.radius, field.height)
    return bool(hits.any())


def p_los_analytic(spec: ObstacleSpec, d: float) -> float:
    """Void probability of the capsule swept by a random disk along the link."""
    if d < 0:
        raise ValidationError(f"distance must be >= 0, got {d}", ["d"])
    lam = density_from_ocr(spec)
    area = 2.0 * spec.mean_radius * d
    if spec.endcap:
        area += math.pi * spec.mean_radius_sq
    return min(1.0, max(0.0, math.exp(-lam * area)))


@dataclass(frozen=True)
class LosEstimate:
    p: float
    se: float
    trials: int
    los_count: int = field(default=0)


def binomial_se(successes: int, trials: int) -> float:
    # Plug-in (s + 1/2)/(n + 1) keeps the SE positive at p_hat in {0, 1}.
    p = (successes + 0.5) / (trials + 1.0)
    return math.sqrt(p * (1.0 - p) / trials)


def p_los_empirical(
    spec: ObstacleSpec, d: float, trials: int, rng: np.random.Generator
) -> LosEstimate:
    """Monte Carlo LoS probability for a centred link of length ``d``.

    Only obstacles whose centres fall in the window that can reach the link
    (the link's bounding box grown by ``radius_max``, clipped to the area)
    are sampled. A PPP restricted to a sub-region is a PPP of the same
    density, so this is distributionally identical to sampling the full area
    and running :func:`is_blocked`, just cheaper.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1", ["trials"])
    if d < 0:
        raise ValidationError(f"distance must be >= 0, got {d}", ["d"])
    lam = density_from_ocr(spec)
    if lam == 0.0:
        return LosEstimate(1.0, binomial_se(trials, trials), trials, trials)
    w, dep = spec.area
    rm = spec.radius_max
    x0, x1 = max(-w / 2, -d / 2 - rm), min(w / 2, d / 2 + rm)
    y0, y1 = max(-dep / 2, -rm), min(dep / 2, rm)
    counts = rng.poisson(lam * (x1 - x0) * (y1 - y0), size=trials)
    n = int(counts.sum())
    cx = rng.uniform(x0, x1, n)
    cy = rng.uniform(y0, y1, n)
    r = rng.uniform(spec.radius_min, spec.radius_max, n)
    h = rng.uniform(spec.height_min, spec.height_max, n)
    th = spec.terminal_height
    hits = segment_hits((-d / 2, 0.0, th), (d / 2, 0.0, th), cx, cy, r, h)
    owner = np.repeat(np.arange(trials), counts)
    blocked = np.bincount(owner[hits], minlength=trials) > 0
    los = int(trials - blocked.sum())
    return LosEstimate(los / trials, binomial_se(los, trials), trials, los)
