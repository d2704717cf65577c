"""Julia set approximation for finitely generated rational semigroups.

The Julia set is approximated by a random backward orbit from a repelling
fixed point of one generator: backward orbits equidistribute toward a
measure supported on the whole Julia set, which is all a distance oracle
needs.  Points live on the sphere and every distance here is chordal,
computed as Euclidean distance between stereographic embeddings in R^3.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import IndeterminateValue, NonConvergence, NoRepellingFixedPoint
from .rational import (
    INF,
    CHART_LIMIT,
    MultiMap,
    Polynomial,
    RationalMap,
    SpherePoint,
    chordal_distance,
    poly_roots,
    preimages_batch,
    rmap_critical_points,
    rmap_derivative_norm,
    rmap_eval,
    rmap_preimages,
)

__all__ = [
    "SeedPoint",
    "ConditionReport",
    "JuliaCloud",
    "SphereIndex",
    "repelling_fixed_point",
    "build_julia_cloud",
    "cloud_distance",
    "check_separation",
    "check_expansion",
    "save_cloud",
    "load_cloud",
]

BURN_IN = 20
MAX_RETRIES = 10


def embed(points: np.ndarray, at_inf: np.ndarray) -> np.ndarray:
    """Stereographic embedding C ∪ {∞} -> unit sphere in R^3.

    z maps to (2 Re z, 2 Im z, |z|^2 - 1)/(|z|^2 + 1), infinity to the north
    pole; chordal distance on the sphere equals Euclidean distance here.
    """
    x = np.zeros((len(points), 3))
    r2 = points.real**2 + points.imag**2
    w = 1.0 / (1.0 + r2)
    x[:, 0] = 2.0 * points.real * w
    x[:, 1] = 2.0 * points.imag * w
    x[:, 2] = (r2 - 1.0) * w
    x[at_inf] = (0.0, 0.0, 1.0)
    return x


def embed_one(p: SpherePoint) -> np.ndarray:
    arr = np.array([p.value], dtype=np.complex128)
    return embed(arr, np.array([p.at_infinity]))[0]


class SphereIndex:
    """Uniform spatial hash over the embedded sphere for exact NN queries.

    Cells are cubes of side `cell` tiling [-1, 1]^3; a expanding-shell scan
    stops as soon as the best distance found is <= r * cell after scanning
    shell r, which guarantees exactness (any unscanned point is farther).
    The north-pole cell doubles as the bucket for points at infinity.
    """

    def __init__(self, xyz: np.ndarray, cell: float | None = None):
        n = len(xyz)
        if cell is None:
            # aim for a handful of points per occupied cell
            cell = max(math.sqrt(50.0 / max(n, 1)), 1e-3)
        self.cell = cell
        self.xyz = xyz
        keys = np.floor((xyz + 1.0) / cell).astype(np.int64)
        cells: dict[tuple[int, int, int], list[int]] = {}
        for i, k in enumerate(map(tuple, keys)):
            cells.setdefault(k, []).append(i)
        self._cells = {k: np.asarray(v) for k, v in cells.items()}
        self._max_ring = int(math.ceil(2.0 / cell)) + 2

    def _scan_cell(self, key, p, skip, best):
        members = self._cells.get(key)
        if members is None:
            return best
        d2 = ((self.xyz[members] - p) ** 2).sum(axis=1)
        if skip >= 0:
            d2 = np.where(members == skip, np.inf, d2)
        j = int(np.argmin(d2))
        if d2[j] < best[0]:
            return (float(d2[j]), int(members[j]))
        return best

    def nearest(self, p: np.ndarray, skip: int = -1) -> tuple[float, int]:
        """(distance, index) of the nearest stored point to p (R^3)."""
        h = self.cell
        cx, cy, cz = (int(math.floor((p[i] + 1.0) / h)) for i in range(3))
        best = (np.inf, -1)
        for r in range(self._max_ring + 1):
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    if max(abs(dx), abs(dy)) == r:
                        dzs = range(-r, r + 1)
                    else:
                        dzs = (-r, r)
                    for dz in dzs:
                        best = self._scan_cell((cx + dx, cy + dy, cz + dz), p, skip, best)
            if best[1] >= 0 and math.sqrt(best[0]) <= r * h:
                break
        return math.sqrt(best[0]), best[1]


@dataclass(frozen=True)
class SeedPoint:
    """Starting point for backward iteration, with how it was obtained."""

    point: SpherePoint
    provenance: str = "user-supplied"


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a numerical condition check (evidence, not proof)."""

    kind: str  # separation | expansion | hyperbolicity
    passed: bool
    margin: float
    details: str


@dataclass
class JuliaCloud:
    """Backward-orbit point cloud with a spatial index and resolution ε."""

    points: list[SpherePoint]
    cell_size: float
    index: SphereIndex = field(repr=False)


def repelling_fixed_point(f: RationalMap, map_index: int | None = None) -> SeedPoint:
    """Fixed point of f with the largest spherical multiplier norm > 1.

    Ties in the norm (relative 1e-9) break toward smallest |z|, then
    smallest arg; infinity counts as a candidate when f fixes it.
    """
    if f.degree < 2:
        raise NoRepellingFixedPoint("need degree >= 2")
    q = f.num - Polynomial([0.0, 1.0]) * f.den
    candidates: list[SpherePoint] = []
    if not q.is_zero:
        candidates.extend(SpherePoint.of(r) for r in poly_roots(q))
    if f.num.degree > f.den.degree:
        candidates.append(INF)

    scored = []
    for z in candidates:
        norm = rmap_derivative_norm(f, z)
        if norm > 1.0 + 1e-9:
            scored.append((norm, z))
    if not scored:
        raise NoRepellingFixedPoint("all fixed points have multiplier norm <= 1")

    top = max(s[0] for s in scored)
    tied = [z for norm, z in scored if norm >= top * (1.0 - 1e-9)]

    def rank(z: SpherePoint):
        if z.at_infinity:
            return (math.inf, 0.0)
        return (abs(z.value), math.atan2(z.value.imag, z.value.real))

    best = min(tied, key=rank)
    assert chordal_distance(rmap_eval(f, best), best) < 1e-9
    tag = "repelling-fixed-point" if map_index is None else f"repelling-fixed-point[{map_index}]"
    return SeedPoint(best, tag)


def build_julia_cloud(
    mm: MultiMap, seed: SeedPoint, target_count: int, rng_seed: int
) -> JuliaCloud:
    """Random backward orbit from the seed; points recorded after burn-in.

    At every step one generator index and one preimage branch are drawn
    uniformly.  Root-finder failures skip the step and redraw, up to
    MAX_RETRIES consecutive times.  Bit-identical for equal rng_seed.
    """
    rng = random.Random(rng_seed)
    k = len(mm.maps)
    z = seed.point
    collected: list[SpherePoint] = []
    steps = 0
    failures = 0
    while len(collected) < target_count:
        i = rng.randrange(k)
        try:
            branches = rmap_preimages(mm.maps[i], z)
        except (NonConvergence, IndeterminateValue):
            failures += 1
            if failures >= MAX_RETRIES:
                raise
            continue
        failures = 0
        z = branches[rng.randrange(len(branches))]
        steps += 1
        if steps > BURN_IN:
            collected.append(z)
    return _assemble_cloud(collected)


def _assemble_cloud(points: list[SpherePoint]) -> JuliaCloud:
    vals = np.array([p.value for p in points], dtype=np.complex128)
    inf = np.array([p.at_infinity for p in points])
    index = SphereIndex(embed(vals, inf))
    nn = np.array([index.nearest(index.xyz[i], skip=i)[0] for i in range(len(points))])
    eps = float(np.percentile(nn, 99.0))
    return JuliaCloud(points=points, cell_size=eps, index=index)


def cloud_distance(cloud: JuliaCloud, z: SpherePoint) -> float:
    """Chordal distance from z to the nearest cloud point (exact)."""
    return cloud.index.nearest(embed_one(z))[0]


def _preimage_set(f: RationalMap, cloud: JuliaCloud) -> tuple[np.ndarray, np.ndarray]:
    vals = np.array([p.value for p in cloud.points], dtype=np.complex128)
    inf = np.array([p.at_infinity for p in cloud.points])
    roots, roots_inf = preimages_batch(f, vals, inf)
    return roots.ravel(), roots_inf.ravel()


def _min_set_distance(a: np.ndarray, b: np.ndarray, block: int = 1024) -> float:
    """Smallest Euclidean distance between two R^3 point sets (blocked)."""
    bb = (b * b).sum(axis=1)
    best = math.inf
    for s in range(0, len(a), block):
        ab = a[s : s + block]
        d2 = (ab * ab).sum(axis=1)[:, None] + bb[None, :] - 2.0 * (ab @ b.T)
        m = float(d2.min())
        if m < best:
            best = m
    return math.sqrt(max(best, 0.0))


def check_separation(mm: MultiMap, cloud: JuliaCloud) -> ConditionReport:
    """Do the generator preimages of J(G) stay pairwise disjoint?

    margin = min over generator pairs of the smallest chordal distance
    between their preimage clouds; passes when margin > 4ε.  A single
    generator passes vacuously with margin +inf.
    """
    k = len(mm.maps)
    if k < 2:
        return ConditionReport("separation", True, math.inf, "single generator: no pairs to separate")
    sets = [_preimage_set(f, cloud) for f in mm.maps]
    embeds = [embed(vals, inf) for vals, inf in sets]
    margin = math.inf
    for j in range(1, k):
        for i in range(j):
            margin = min(margin, _min_set_distance(embeds[i], embeds[j]))
    threshold = 4.0 * cloud.cell_size
    return ConditionReport(
        "separation",
        margin > threshold,
        margin,
        f"min pairwise preimage distance {margin:.6g} vs 4*eps = {threshold:.6g}",
    )


def check_expansion(
    mm: MultiMap,
    cloud: JuliaCloud,
    depth: int,
    samples: int,
    rng_seed: int = 0,
) -> ConditionReport:
    """Sampled evidence that the multi-map expands along fibers.

    (a) derivative growth: along random backward branches of length
        `depth` the per-step geometric mean of the spherical derivative
        norm must exceed 1 (margin: min mean growth - 1);
    (b) postcritical separation: forward orbits of every finite critical
        value under random words keep cloud_distance > 4ε after the first
        3 steps, unless they have escaped to infinity.
    Both are required to pass.
    """
    rng = random.Random(rng_seed)
    k = len(mm.maps)
    n = len(cloud.points)
    threshold = 4.0 * cloud.cell_size

    # (a) backward branch growth
    min_growth = math.inf
    b = 0
    while b < samples:
        z = cloud.points[rng.randrange(n)]
        log_sum = 0.0
        failed = False
        for _ in range(depth):
            i = rng.randrange(k)
            try:
                branches = rmap_preimages(mm.maps[i], z)
            except (NonConvergence, IndeterminateValue):
                failed = True
                break
            z = branches[rng.randrange(len(branches))]
            norm = rmap_derivative_norm(mm.maps[i], z)
            log_sum += math.log(norm) if norm > 0 else -math.inf
        if failed:
            continue
        growth = math.exp(log_sum / depth)
        min_growth = min(min_growth, growth)
        b += 1
    growth_margin = min_growth - 1.0
    pass_a = growth_margin > 0

    # (b) postcritical orbits vs the cloud
    crit_values: list[SpherePoint] = []
    for f in mm.maps:
        for c in rmap_critical_points(f):
            v = rmap_eval(f, c)
            if not v.at_infinity and all(
                chordal_distance(v, w) > 1e-12 for w in crit_values
            ):
                crit_values.append(v)
    min_post = math.inf
    for v in crit_values:
        for _ in range(samples):
            z = v
            for step in range(1, depth + 1):
                word_letter = rng.randrange(k)
                z = rmap_eval(mm.maps[word_letter], z)
                if z.at_infinity or abs(z.value) > CHART_LIMIT:
                    break  # escaped: this orbit is clear of the Julia set
                if step > 3:
                    min_post = min(min_post, cloud_distance(cloud, z))
    pass_b = min_post > threshold  # vacuously true when nothing was checked
    post_margin = min_post - threshold

    passed = pass_a and pass_b
    if not pass_a:
        margin = growth_margin
    elif not pass_b:
        margin = post_margin
    else:
        margin = growth_margin
    details = (
        f"min branch growth {min_growth:.6g} over {samples} branches of depth {depth}; "
        f"postcritical min distance {min_post:.6g} vs 4*eps = {threshold:.6g} "
        f"({len(crit_values)} finite critical values)"
    )
    return ConditionReport("expansion", passed, margin, details)


# ---------------------------------------------------------------------------
# CSV export/import


def save_cloud(cloud: JuliaCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "at_infinity"])
        for p in cloud.points:
            w.writerow([f"{p.value.real:.17g}", f"{p.value.imag:.17g}", int(p.at_infinity)])


def load_cloud(path) -> JuliaCloud:
    points: list[SpherePoint] = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:3] != ["re", "im", "at_infinity"]:
            raise ValueError(f"unexpected cloud CSV header: {header}")
        for row in r:
            if bool(int(row[2])):
                points.append(INF)
            else:
                points.append(SpherePoint(complex(float(row[0]), float(row[1]))))
    if not points:
        raise ValueError("empty cloud file")
    return _assemble_cloud(points)
