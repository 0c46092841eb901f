"""
Rate regions in the nonnegative (R1, R2) quadrant.

A region is stored as a list of halfspaces c1*R1 + c2*R2 <= bound,
implicitly intersected with R1 >= 0 and R2 >= 0. Every bound produced
by the toolkit arrives as an inequality, so halfspaces are the native
form; vertices are derived on demand.

Geometric operations consumed by the rest of the toolkit:
- frontier: sampled Pareto boundary
- union_hull: convex hull of a union of regions (time sharing)
- contains: vertex-wise containment with slack tolerance
- max_gap: per-user additive gap, smallest g with (outer - (g, g)) inside inner
- max_ratio: multiplicative gap, smallest c with outer / c inside inner
"""

import io
import csv
import json
import math
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

try:
    from scipy.spatial import QhullError
except ImportError:  # scipy < 1.11
    from scipy.spatial.qhull import QhullError


logger = logging.getLogger(__name__)

# Feasibility and collinearity tolerances for floating-point geometry
_ROUNDOFF = 1e-12
_FEASIBILITY = 1e-9

# Above this many halfspaces, vertices come from qhull instead of pairwise intersection
_PAIRWISE_LIMIT = 96

DEFAULT_CONTAINMENT_TOL = 1e-9
DEFAULT_ACCURACY = 1e-6


class RegionError(ValueError):
    """Raised for malformed, unbounded or inconsistent rate regions."""


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class RatePoint:
    """A rate pair (R1, R2) in bits per channel use."""
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < -_FEASIBILITY or self.r2 < -_FEASIBILITY:
            raise RegionError(f"rate point ({self.r1}, {self.r2}) leaves the quadrant")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.r1, self.r2)


@dataclass(frozen=True)
class Halfspace:
    """The constraint c1*R1 + c2*R2 <= bound."""
    c1: float
    c2: float
    bound: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.c1, self.c2, self.bound)):
            raise RegionError(f"halfspace has non-finite entries: {self}")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise RegionError("halfspace needs a nonzero coefficient")

    @property
    def scale(self) -> float:
        return max(abs(self.c1), abs(self.c2))

    def normalized(self) -> "Halfspace":
        """Rescale so that max(|c1|, |c2|) = 1."""
        s = self.scale
        return Halfspace(self.c1 / s, self.c2 / s, self.bound / s)

    def slack(self, r1: float, r2: float) -> float:
        """Normalized slack; negative means violated."""
        return (self.bound - self.c1 * r1 - self.c2 * r2) / self.scale

    def to_dict(self, digits: Optional[int] = None) -> Dict[str, float]:
        return {
            "c1": _round_sig(self.c1, digits),
            "c2": _round_sig(self.c2, digits),
            "bound": _round_sig(self.bound, digits),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Halfspace":
        try:
            return cls(float(data["c1"]), float(data["c2"]), float(data["bound"]))
        except KeyError as e:
            raise RegionError(f"halfspace missing field {e.args[0]!r}")
        except (TypeError, ValueError) as e:
            raise RegionError(f"halfspace has a non-numeric field: {e}")


class RateRegion:
    """
    Bounded convex region of the nonnegative quadrant containing the origin.

    Immutable. Vertices are computed lazily and cached; regions built by
    union_hull carry their hull polygon as the cache.
    """

    __slots__ = ("_halfspaces", "_vertices")

    def __init__(self, halfspaces: Iterable[Halfspace]):
        cleaned = []
        for h in halfspaces:
            if not isinstance(h, Halfspace):
                raise RegionError(f"expected Halfspace, got {type(h).__name__}")
            if h.bound < 0.0:
                if h.bound < -_FEASIBILITY * max(1.0, h.scale):
                    raise RegionError(f"region must contain the origin; {h} excludes it")
                h = Halfspace(h.c1, h.c2, 0.0)
            cleaned.append(h)
        object.__setattr__(self, "_halfspaces", tuple(cleaned))
        object.__setattr__(self, "_vertices", None)

    def __setattr__(self, name, value):
        raise AttributeError("RateRegion is immutable")

    @property
    def halfspaces(self) -> Tuple[Halfspace, ...]:
        return self._halfspaces

    def __eq__(self, other) -> bool:
        return isinstance(other, RateRegion) and self._halfspaces == other._halfspaces

    def __hash__(self) -> int:
        return hash(self._halfspaces)

    def __repr__(self) -> str:
        terms = ", ".join(_describe(h) for h in self._halfspaces)
        return f"RateRegion({{{terms}}})"

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def box(cls, r1_max: float, r2_max: float) -> "RateRegion":
        return cls([Halfspace(1.0, 0.0, r1_max), Halfspace(0.0, 1.0, r2_max)])

    @classmethod
    def from_bounds(cls, r1_max: float, sum_max: float,
                    r2_max: Optional[float] = None) -> "RateRegion":
        """{R1 <= r1_max, R1 + R2 <= sum_max[, R2 <= r2_max]}."""
        halfspaces = [Halfspace(1.0, 0.0, r1_max), Halfspace(1.0, 1.0, sum_max)]
        if r2_max is not None:
            halfspaces.append(Halfspace(0.0, 1.0, r2_max))
        return cls(halfspaces)

    @classmethod
    def origin(cls) -> "RateRegion":
        return cls.box(0.0, 0.0)

    @classmethod
    def _from_polygon(cls, polygon: np.ndarray) -> "RateRegion":
        """Region whose vertices are the given counter-clockwise polygon."""
        region = cls(_polygon_halfspaces(polygon))
        object.__setattr__(region, "_vertices", np.array(polygon, dtype=float).reshape(-1, 2))
        return region

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    def _arrays(self, with_quadrant: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        rows = [(h.c1, h.c2) for h in self._halfspaces]
        bounds = [h.bound for h in self._halfspaces]
        if with_quadrant:
            rows += [(-1.0, 0.0), (0.0, -1.0)]
            bounds += [0.0, 0.0]
        return np.array(rows, dtype=float).reshape(-1, 2), np.array(bounds, dtype=float)

    def is_bounded(self) -> bool:
        """True when no nonzero direction in the quadrant is a recession direction."""
        normals, _ = self._arrays(with_quadrant=False)
        candidates = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        for c1, c2 in normals:
            for d in (np.array([-c2, c1]), np.array([c2, -c1])):
                if d[0] >= 0.0 and d[1] >= 0.0 and (d[0] > 0.0 or d[1] > 0.0):
                    candidates.append(d / np.max(d))
        for d in candidates:
            if normals.size == 0 or np.all(normals @ d <= _ROUNDOFF):
                return False
        return True

    def _vertex_array(self) -> np.ndarray:
        if self._vertices is None:
            if not self.is_bounded():
                raise RegionError("unbounded region")
            object.__setattr__(self, "_vertices", _compute_vertices(*self._arrays()))
        return self._vertices

    def vertices(self) -> List[RatePoint]:
        """Vertices in counter-clockwise order."""
        return [RatePoint(max(0.0, x), max(0.0, y)) for x, y in self._vertex_array()]

    def max_r1(self) -> float:
        return float(max(0.0, self._vertex_array()[:, 0].max()))

    def max_r2(self) -> float:
        return float(max(0.0, self._vertex_array()[:, 1].max()))

    def max_sum_rate(self) -> float:
        return float(max(0.0, self._vertex_array().sum(axis=1).max()))

    def is_origin(self, tol: float = _ROUNDOFF) -> bool:
        return bool(np.all(np.abs(self._vertex_array()) <= tol))

    def scaled(self, factor: float) -> "RateRegion":
        """The region factor * self."""
        if factor <= 0.0:
            raise RegionError("scale factor must be positive")
        region = RateRegion(Halfspace(h.c1, h.c2, h.bound * factor) for h in self._halfspaces)
        if self._vertices is not None:
            object.__setattr__(region, "_vertices", self._vertices * factor)
        return region

    def max_violation(self, points: np.ndarray) -> float:
        """Largest normalized constraint violation over the given points (<= 0 when all inside)."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if points.size == 0:
            return -math.inf
        normals, bounds = self._arrays()
        scale = np.max(np.abs(normals), axis=1)
        slack = (bounds[None, :] - points @ normals.T) / scale[None, :]
        return float(-slack.min())

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self, digits: Optional[int] = None) -> Dict[str, Any]:
        return {"halfspaces": [h.to_dict(digits) for h in self._halfspaces]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RateRegion":
        if not isinstance(data, dict) or "halfspaces" not in data:
            raise RegionError("region JSON needs a 'halfspaces' list")
        items = data["halfspaces"]
        if not isinstance(items, list):
            raise RegionError("'halfspaces' must be a list")
        halfspaces = []
        for index, item in enumerate(items):
            try:
                halfspaces.append(Halfspace.from_dict(item))
            except RegionError as e:
                raise RegionError(f"halfspaces[{index}]: {e}")
        return cls(halfspaces)

    def to_json(self, digits: Optional[int] = 12) -> str:
        return json.dumps(self.to_dict(digits), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RateRegion":
        return cls.from_dict(json.loads(text))


# ============================================================================
# OPERATIONS
# ============================================================================

def frontier(region: RateRegion, resolution: int) -> List[RatePoint]:
    """
    Sample the Pareto frontier at `resolution` points, sweeping R1 from 0
    to its maximum. Points come sorted by increasing r1.
    """
    if resolution < 2:
        raise RegionError("frontier resolution must be at least 2")
    if not region.is_bounded():
        raise RegionError("unbounded region")

    r1 = np.linspace(0.0, region.max_r1(), resolution)
    normals, bounds = region._arrays(with_quadrant=False)
    caps = normals[:, 1] > _ROUNDOFF
    if not np.any(caps):
        raise RegionError("unbounded region")
    ceilings = (bounds[caps][None, :] - np.outer(r1, normals[caps, 0])) / normals[caps, 1][None, :]
    r2 = np.maximum(ceilings.min(axis=1), 0.0)
    return [RatePoint(float(x), float(y)) for x, y in zip(r1, r2)]


def union_hull(regions: Sequence[RateRegion]) -> RateRegion:
    """Convex hull of the union of regions, re-expressed as halfspaces."""
    if not regions:
        raise RegionError("union_hull needs at least one region")
    stacks = [r._vertex_array() for r in regions]
    stacks.append(np.zeros((1, 2)))
    polygon = _convex_hull(np.vstack(stacks))
    return RateRegion._from_polygon(polygon)


def hull_of_points(points: Iterable[Tuple[float, float]]) -> RateRegion:
    """Smallest region (down to the origin) containing the given rate points."""
    pts = np.array(list(points), dtype=float).reshape(-1, 2)
    if np.any(pts < -_FEASIBILITY):
        raise RegionError("rate points must be nonnegative")
    pts = np.maximum(pts, 0.0)
    # Down-closure: a rate pair is achievable together with its projections on the axes
    stacked = np.vstack([pts, np.column_stack([pts[:, 0], np.zeros(len(pts))]),
                         np.column_stack([np.zeros(len(pts)), pts[:, 1]]), np.zeros((1, 2))])
    return RateRegion._from_polygon(_convex_hull(stacked))


def contains(outer: RateRegion, inner: RateRegion, tol: float = 0.0) -> bool:
    """True iff every vertex of inner satisfies every halfspace of outer with slack >= -tol."""
    if tol < 0.0:
        raise RegionError("tolerance must be nonnegative")
    vertices = inner._vertex_array()
    return outer.max_violation(vertices) <= tol + _roundoff(outer, vertices)


def equivalent(a: RateRegion, b: RateRegion, tol: float = DEFAULT_CONTAINMENT_TOL) -> bool:
    """Mutual containment within tol."""
    return contains(a, b, tol) and contains(b, a, tol)


def max_gap(outer: RateRegion, inner: RateRegion,
            accuracy: float = DEFAULT_ACCURACY,
            tol: float = DEFAULT_CONTAINMENT_TOL) -> float:
    """
    Smallest g >= 0 such that (outer - (g, g)) intersected with the quadrant
    lies inside inner, found by bisection to the given accuracy.
    """
    if not contains(outer, inner, tol):
        raise RegionError("inner exceeds outer")

    polygon = outer._vertex_array()

    def fits(g: float) -> bool:
        shifted = _clip_to_quadrant(polygon - g)
        if len(shifted) == 0:
            return True
        return inner.max_violation(shifted) <= tol + _roundoff(inner, shifted)

    if fits(0.0):
        return 0.0

    lo, hi = 0.0, float(max(polygon[:, 0].max(), polygon[:, 1].max()))
    while hi - lo > accuracy / 10.0:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


def max_ratio(outer: RateRegion, inner: RateRegion,
              accuracy: float = DEFAULT_ACCURACY,
              tol: float = DEFAULT_CONTAINMENT_TOL) -> float:
    """
    Smallest c >= 1 such that outer / c lies inside inner (bisection).
    Returns math.inf when inner is the origin and outer is not, or when no
    finite scaling fits (inner without interior against outer with one).
    """
    if not contains(outer, inner, tol):
        raise RegionError("inner exceeds outer")

    polygon = outer._vertex_array()
    if inner.is_origin():
        return 1.0 if outer.is_origin() else math.inf

    def fits(c: float) -> bool:
        scaled = polygon / c
        return inner.max_violation(scaled) <= tol + _roundoff(inner, scaled)

    if fits(1.0):
        return 1.0

    hi = 2.0
    while not fits(hi):
        hi *= 2.0
        if hi > 1e12:
            logger.debug("max_ratio: no finite scaling fits, returning inf")
            return math.inf
    lo = max(1.0, hi / 2.0)
    while hi - lo > accuracy / 10.0:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


def frontier_to_csv(points: Sequence[RatePoint], digits: int = 12) -> str:
    """Frontier CSV with header r1,r2."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["r1", "r2"])
    for p in points:
        writer.writerow([format_number(p.r1, digits), format_number(p.r2, digits)])
    return buffer.getvalue()


def format_number(value: float, digits: int = 12) -> str:
    """Fixed significant-digit rendering used by every emitted file."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.{digits}g}"
    return "0" if text == "-0" else text


# ============================================================================
# INTERNALS
# ============================================================================

def _round_sig(value: float, digits: Optional[int]) -> float:
    if digits is None:
        return float(value)
    rounded = float(f"{value:.{digits}g}")
    return 0.0 if rounded == 0.0 else rounded


def _describe(h: Halfspace) -> str:
    terms = []
    for coeff, name in ((h.c1, "R1"), (h.c2, "R2")):
        if coeff == 0.0:
            continue
        terms.append(name if coeff == 1.0 else f"{coeff:g}*{name}")
    return f"{' + '.join(terms)} <= {h.bound:g}"


def _roundoff(region: RateRegion, points: np.ndarray) -> float:
    magnitude = max(1.0, float(np.max(np.abs(points))) if np.size(points) else 1.0)
    for h in region.halfspaces:
        magnitude = max(magnitude, abs(h.bound) / h.scale)
    return _ROUNDOFF * magnitude


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _turns_left(o, a, b, tol: float) -> bool:
    """True when a lies more than tol outside the chord o-b."""
    return _cross(o, a, b) > tol * math.hypot(b[0] - o[0], b[1] - o[1])


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """
    Monotone-chain hull, counter-clockwise, collinear and duplicate points dropped.

    A point is dropped only when it lies within _ROUNDOFF * scale of the chord
    joining its neighbours, so dense samples of a curved frontier keep their vertices.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    ordered = [tuple(p) for p in pts[order]]
    scale = max(1.0, float(np.max(np.abs(pts))))
    tol = _ROUNDOFF * scale

    lower: List[Tuple[float, float]] = []
    for p in ordered:
        while len(lower) >= 2 and not _turns_left(lower[-2], lower[-1], p, tol):
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(ordered):
        while len(upper) >= 2 and not _turns_left(upper[-2], upper[-1], p, tol):
            upper.pop()
        upper.append(p)

    hull = lower[:-1] + upper[:-1]
    if not hull:
        hull = [ordered[0]]

    # near-duplicate endpoints survive the chain when all points coincide
    merged = [hull[0]]
    for p in hull[1:]:
        if max(abs(p[0] - merged[-1][0]), abs(p[1] - merged[-1][1])) > _ROUNDOFF * scale:
            merged.append(p)
    if len(merged) > 1 and max(abs(merged[0][0] - merged[-1][0]),
                               abs(merged[0][1] - merged[-1][1])) <= _ROUNDOFF * scale:
        merged.pop()
    return np.array(merged, dtype=float)


def _polygon_halfspaces(polygon: np.ndarray) -> List[Halfspace]:
    """Halfspaces of a counter-clockwise polygon containing the origin, axis edges omitted."""
    poly = np.asarray(polygon, dtype=float).reshape(-1, 2)
    scale = max(1.0, float(np.max(np.abs(poly)))) if len(poly) else 1.0
    eps = _ROUNDOFF * scale

    if len(poly) <= 1:
        return [Halfspace(1.0, 0.0, 0.0), Halfspace(0.0, 1.0, 0.0)]

    if len(poly) == 2:
        far = poly[np.argmax(np.abs(poly).sum(axis=1))]
        x, y = max(0.0, far[0]), max(0.0, far[1])
        if y <= eps:
            return [Halfspace(1.0, 0.0, x), Halfspace(0.0, 1.0, 0.0)]
        if x <= eps:
            return [Halfspace(1.0, 0.0, 0.0), Halfspace(0.0, 1.0, y)]
        norm = max(x, y)
        return [
            Halfspace(x / norm, y / norm, (x * x + y * y) / norm),
            Halfspace(-y / norm, x / norm, 0.0),
            Halfspace(y / norm, -x / norm, 0.0),
        ]

    halfspaces = []
    for k in range(len(poly)):
        p, q = poly[k], poly[(k + 1) % len(poly)]
        if (abs(p[0]) <= eps and abs(q[0]) <= eps) or (abs(p[1]) <= eps and abs(q[1]) <= eps):
            continue
        n1, n2 = q[1] - p[1], -(q[0] - p[0])
        norm = max(abs(n1), abs(n2))
        if norm <= eps:
            continue
        n1, n2 = n1 / norm + 0.0, n2 / norm + 0.0
        halfspaces.append(Halfspace(n1, n2, n1 * p[0] + n2 * p[1]))
    return halfspaces


def _compute_vertices(normals: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Vertices of {normals @ x <= bounds} as a counter-clockwise polygon."""
    if len(bounds) > _PAIRWISE_LIMIT:
        points = _vertices_by_qhull(normals, bounds)
        if points is not None:
            return _convex_hull(points)
        logger.debug(f"qhull path unavailable for {len(bounds)} halfspaces, using pairwise intersection")
    return _convex_hull(_vertices_pairwise(normals, bounds))


def _vertices_pairwise(normals: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(len(bounds), k=1)
    a, b = normals[i], normals[j]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    size = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    ok = np.abs(det) > _ROUNDOFF * size
    if not np.any(ok):
        return np.zeros((0, 2))
    a, b, det = a[ok], b[ok], det[ok]
    bi, bj = bounds[i][ok], bounds[j][ok]
    x = (bi * b[:, 1] - a[:, 1] * bj) / det
    y = (a[:, 0] * bj - bi * b[:, 0]) / det
    candidates = np.column_stack([x, y])

    scale = np.max(np.abs(normals), axis=1)
    slack = (bounds[None, :] - candidates @ normals.T) / scale[None, :]
    magnitude = max(1.0, float(np.max(np.abs(bounds / scale))))
    feasible = np.all(slack >= -_FEASIBILITY * magnitude, axis=1)
    return candidates[feasible]


def _vertices_by_qhull(normals: np.ndarray, bounds: np.ndarray) -> Optional[np.ndarray]:
    center = _chebyshev_center(normals, bounds)
    if center is None:
        return None
    try:
        intersection = HalfspaceIntersection(np.column_stack([normals, -bounds]), center)
    except QhullError as e:
        logger.debug(f"HalfspaceIntersection failed: {e}")
        return None
    points = intersection.intersections
    return points[np.all(np.isfinite(points), axis=1)]


def _chebyshev_center(normals: np.ndarray, bounds: np.ndarray) -> Optional[np.ndarray]:
    """Centre of the largest inscribed disc, or None when the region is flat."""
    norms = np.linalg.norm(normals, axis=1)
    result = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=np.column_stack([normals, norms]),
        b_ub=bounds,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    if not result.success or result.x[2] <= _FEASIBILITY:
        return None
    return np.array(result.x[:2])


def _clip_to_quadrant(polygon: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to R1 >= 0, R2 >= 0."""
    pts = [np.asarray(p, dtype=float) for p in polygon]
    for axis in (0, 1):
        if not pts:
            break
        clipped = []
        for k in range(len(pts)):
            cur, nxt = pts[k], pts[(k + 1) % len(pts)]
            cur_in, nxt_in = cur[axis] >= 0.0, nxt[axis] >= 0.0
            if cur_in:
                clipped.append(cur)
            if cur_in != nxt_in:
                t = cur[axis] / (cur[axis] - nxt[axis])
                point = cur + t * (nxt - cur)
                point[axis] = 0.0
                clipped.append(point)
        pts = clipped
    return np.array(pts, dtype=float).reshape(-1, 2)
