"""Random dynamics of the averaged system: the devil's-coliseum field.

T(z) is the probability that the random orbit from z (generator i drawn
with probability pᵢ each step, i.i.d.) tends to infinity.  Two routes
compute it on a pixel grid: direct Monte Carlo over trajectories, and
value iteration of the averaging operator φ ↦ Σ pᵢ φ∘fᵢ with escape/trap
boundary conditions.  On top of the field: pointwise Hölder exponent
estimation by log-log oscillation fits, and the entropy-over-degrees
bound for the left spectrum endpoint with a Monte Carlo Green term.
"""
from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    ConfigError,
    DegenerateFit,
    InvalidEscapeRadius,
    NonConvergence,
    NotPolynomial,
    OutOfRange,
)
from .rational import MultiMap, SpherePoint, rmap_critical_points, rmap_eval

__all__ = [
    "PixelField",
    "TrapRegion",
    "HolderRow",
    "HolderReport",
    "estimate_escape_radius",
    "validate_escape_radius",
    "coliseum_monte_carlo",
    "coliseum_fixed_point",
    "holder_exponent",
    "holder_survey",
    "alpha_minus_bound",
    "save_field",
    "load_field",
    "save_field_png",
    "write_holder_csv",
]

WELL_FITTED_R2 = 0.9
HOLDER_SENTINEL = math.inf


@dataclass(frozen=True)
class TrapRegion:
    """Disk around a finite attractor; orbits entering it count as captured."""

    center: SpherePoint
    radius: float
    label: str = ""


@dataclass
class PixelField:
    """Scalar field on a pixel grid over window [x0,x1]×[y0,y1].

    values has shape (H, W), row i holding the scanline at
    y = y0 + (i + 0.5)·(y1−y0)/H — bottom row first.
    """

    window: tuple[float, float, float, float]
    resolution: tuple[int, int]
    values: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def pixel_centers(self) -> np.ndarray:
        x0, x1, y0, y1 = self.window
        W, H = self.resolution
        xs = x0 + (np.arange(W) + 0.5) * (x1 - x0) / W
        ys = y0 + (np.arange(H) + 0.5) * (y1 - y0) / H
        return (xs[None, :] + 1j * ys[:, None]).ravel()


def _grid_centers(window, resolution) -> np.ndarray:
    x0, x1, y0, y1 = window
    W, H = resolution
    xs = x0 + (np.arange(W) + 0.5) * (x1 - x0) / W
    ys = y0 + (np.arange(H) + 0.5) * (y1 - y0) / H
    return (xs[None, :] + 1j * ys[:, None]).ravel()


# ---------------------------------------------------------------------------
# escape radius


def _min_growth_on_circle(f, r: float, n: int = 64) -> float:
    z = r * np.exp(2j * np.pi * (np.arange(n) + 0.37) / n)
    from ._kernels import horner_many

    w = horner_many(np.asarray(f.num.coeffs), z)
    return float((np.abs(w) / np.abs(z)).min())


def _doubles_at(mm: MultiMap, r: float) -> bool:
    return all(
        _min_growth_on_circle(f, s) >= 2.0 * (1.0 - 1e-9)
        for f in mm.maps
        for s in (r, 1.5 * r, 2.0 * r, 4.0 * r)
    )


def _require_polynomials(mm: MultiMap) -> None:
    for f in mm.maps:
        if not f.is_polynomial or f.degree < 2:
            raise NotPolynomial("all generators must be polynomials of degree >= 2")


def estimate_escape_radius(mm: MultiMap) -> float:
    """Smallest sampled radius ≥ 2 with |fᵢ(z)| ≥ 2|z| beyond it, all i."""
    _require_polynomials(mm)
    r = 2.0
    while not _doubles_at(mm, r):
        r *= 1.25
        if r > 1e9:
            raise InvalidEscapeRadius("no doubling radius below 1e9")
    return r


def validate_escape_radius(mm: MultiMap, escape_radius: float) -> None:
    if escape_radius < 2.0:
        raise InvalidEscapeRadius(f"escape radius {escape_radius} < 2")
    if not _doubles_at(mm, escape_radius):
        raise InvalidEscapeRadius(
            f"|f(z)| >= 2|z| fails on sampled circles at escape radius {escape_radius}"
        )


# ---------------------------------------------------------------------------
# Monte Carlo trajectories (numba, counter-based substreams)

U64 = np.uint64
_GOLD = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)


@njit(cache=True)
def _mix64(x):
    x = (x ^ (x >> U64(30))) * _MIX1
    x = (x ^ (x >> U64(27))) * _MIX2
    return x ^ (x >> U64(31))


@njit(cache=True)
def _stream_state(seed, pixel, sample, attempt):
    h = _mix64(U64(seed) + _GOLD * (U64(pixel) + U64(1)))
    h = _mix64(h + _GOLD * (U64(sample) + U64(1)))
    return _mix64(h + _GOLD * (U64(attempt) + U64(1)))


@njit(cache=True)
def _next_u01(state):
    state = state + _GOLD
    x = _mix64(state)
    return state, (x >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _mc_kernel(C, cum, centers, samples, R2, trap_c, trap_r2, seed, max_steps):
    """Mean escape score per pixel. Streams keyed by (seed,pixel,sample,attempt),
    so any partition of the pixel loop reproduces identical results."""
    npix = centers.shape[0]
    k = C.shape[0]
    dtop = C.shape[1] - 1
    ntrap = trap_c.shape[0]
    vals = np.empty(npix)
    flagged = 0
    for p in range(npix):
        acc = 0.0
        for s in range(samples):
            score = 0.5
            resolved = False
            for attempt in range(4):
                st = _stream_state(seed, p, s, attempt)
                z = centers[p]
                for _ in range(max_steps):
                    a2 = z.real * z.real + z.imag * z.imag
                    if a2 > R2:
                        score = 1.0
                        resolved = True
                        break
                    hit = False
                    for t in range(ntrap):
                        dzr = z.real - trap_c[t].real
                        dzi = z.imag - trap_c[t].imag
                        if dzr * dzr + dzi * dzi < trap_r2[t]:
                            hit = True
                            break
                    if hit:
                        score = 0.0
                        resolved = True
                        break
                    st, u = _next_u01(st)
                    i = 0
                    while i < k - 1 and u >= cum[i]:
                        i += 1
                    w = C[i, dtop]
                    for tt in range(dtop - 1, -1, -1):
                        w = w * z + C[i, tt]
                    z = w
                if resolved:
                    break
            if not resolved:
                flagged += 1
            acc += score
        vals[p] = acc / samples
    return vals, flagged


def _coeff_matrix(mm: MultiMap) -> np.ndarray:
    dmax = max(f.num.degree for f in mm.maps)
    C = np.zeros((len(mm.maps), dmax + 1), dtype=np.complex128)
    for i, f in enumerate(mm.maps):
        C[i, : f.num.degree + 1] = f.num.coeffs
    return C


def _trap_arrays(traps) -> tuple[np.ndarray, np.ndarray]:
    cs, r2 = [], []
    for t in traps or ():
        if t.center.at_infinity:
            raise ConfigError(
                "traps must be finite disks; capture at infinity is the escape radius"
            )
        if t.radius <= 0:
            raise ConfigError("trap radius must be positive")
        cs.append(t.center.value)
        r2.append(t.radius**2)
    return (
        np.asarray(cs, dtype=np.complex128),
        np.asarray(r2, dtype=float),
    )


def _check_window_resolution(window, resolution) -> None:
    x0, x1, y0, y1 = window
    W, H = resolution
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"degenerate window {window}")
    if not (1 <= W <= 8192 and 1 <= H <= 8192):
        raise ConfigError(f"resolution {resolution} outside [1, 8192]")


def coliseum_monte_carlo(
    mm: MultiMap,
    probs,
    window,
    resolution,
    samples: int,
    escape_radius: float,
    traps,
    rng_seed: int,
) -> PixelField:
    """Monte Carlo estimate of the escape-probability field.

    Per pixel center, `samples` trajectories: score 1 on first leaving
    |z| ≤ escape_radius, 0 on first entering a trap disk; undecided
    trajectories are redrawn up to 3 times and then scored 0.5 and
    flagged (count in meta).  Exactly reproducible from rng_seed at any
    pixel partition.
    """
    _require_polynomials(mm)
    validate_escape_radius(mm, escape_radius)
    _check_window_resolution(window, resolution)
    probs = [float(p) for p in probs]
    if len(probs) != len(mm.maps) or abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError("probabilities must match map count and sum to 1")
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    cum = np.cumsum(probs)
    trap_c, trap_r2 = _trap_arrays(traps)
    centers = _grid_centers(window, resolution)
    max_steps = 10 * math.ceil(math.log2(max(samples, 2))) + 200
    vals, flagged = _mc_kernel(
        _coeff_matrix(mm), cum, centers, samples,
        float(escape_radius) ** 2, trap_c, trap_r2, int(rng_seed), max_steps,
    )
    W, H = resolution
    meta = {
        "mode": "monte-carlo",
        "samples": int(samples),
        "flagged": int(flagged),
        "escape_radius": float(escape_radius),
        "rng_seed": int(rng_seed),
        "max_steps": int(max_steps),
        "n_maps": len(mm.maps),
        "noise_floor": 1.0 / math.sqrt(samples),
    }
    return PixelField(tuple(window), (W, H), vals.reshape(H, W), meta)


def coliseum_fixed_point(
    mm: MultiMap,
    probs,
    window,
    resolution,
    traps,
    tol: float = 1e-6,
    max_iters: int = 20000,
    escape_radius: float | None = None,
) -> PixelField:
    """The same field as the unique fixed point of φ ↦ Σ pᵢ φ∘fᵢ.

    Value iteration with T = 1 beyond the escape radius and T = 0 on
    trap disks, bilinear interpolation for map images between grid
    nodes, off-window reads clamped to the window edge.  Stops when the
    sup-norm change drops below tol; the final change is recorded as the
    residual in meta.
    """
    _require_polynomials(mm)
    if escape_radius is None:
        escape_radius = estimate_escape_radius(mm)
    else:
        validate_escape_radius(mm, escape_radius)
    _check_window_resolution(window, resolution)
    probs = [float(p) for p in probs]
    if len(probs) != len(mm.maps) or abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError("probabilities must match map count and sum to 1")
    trap_c, trap_r2 = _trap_arrays(traps)
    x0, x1, y0, y1 = window
    W, H = resolution
    centers = _grid_centers(window, resolution)
    R2 = float(escape_radius) ** 2

    def classify(z: np.ndarray):
        esc = (z.real**2 + z.imag**2) > R2
        trap = np.zeros(z.shape, dtype=bool)
        for c, r2 in zip(trap_c, trap_r2):
            trap |= np.abs(z - c) ** 2 < r2
        return esc, trap & ~esc

    # fixed (Dirichlet) pixels of the output grid
    esc_fix, trap_fix = classify(centers)

    # gather codes: for each map, where does each pixel center land
    dx = (x1 - x0) / W
    dy = (y1 - y0) / H
    plans = []
    from ._kernels import horner_many

    for f, p in zip(mm.maps, probs):
        img = horner_many(np.asarray(f.num.coeffs), centers)
        esc, trap = classify(img)
        interior = ~esc & ~trap
        gx = np.clip((img.real - x0) / dx - 0.5, 0.0, W - 1.0)
        gy = np.clip((img.imag - y0) / dy - 0.5, 0.0, H - 1.0)
        ix = np.minimum(gx.astype(np.int64), W - 2) if W > 1 else np.zeros(len(gx), np.int64)
        iy = np.minimum(gy.astype(np.int64), H - 2) if H > 1 else np.zeros(len(gy), np.int64)
        fx = gx - ix
        fy = gy - iy
        idx = iy * W + ix
        wts = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy])
        plans.append((p, esc.astype(float), interior, idx, wts))

    T = np.where(esc_fix, 1.0, 0.0)
    T[trap_fix] = 0.0
    offs = np.array([0, 1, W, W + 1]) if (W > 1 and H > 1) else None
    resid = math.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        Tn = np.zeros_like(T)
        for p, esc_val, interior, idx, wts in plans:
            contrib = esc_val.copy()
            if offs is not None:
                gathered = (
                    T[idx] * wts[0] + T[idx + 1] * wts[1] + T[idx + W] * wts[2] + T[idx + W + 1] * wts[3]
                )
            else:
                gathered = T[idx]
            contrib[interior] = gathered[interior]
            Tn += p * contrib
        Tn[esc_fix] = 1.0
        Tn[trap_fix] = 0.0
        resid = float(np.abs(Tn - T).max())
        T = Tn
        if resid < tol:
            break
    else:
        raise NonConvergence(f"no fixed point after {max_iters} iterations (residual {resid:.3g})")

    meta = {
        "mode": "fixed-point",
        "tol": float(tol),
        "iterations": iters,
        "residual": resid,
        "escape_radius": float(escape_radius),
        "n_maps": len(mm.maps),
        "noise_floor": 2.0 * float(tol),
    }
    return PixelField(tuple(window), (W, H), T.reshape(H, W), meta)


# ---------------------------------------------------------------------------
# pointwise Hölder exponents


def _chordal_to_grid(field: PixelField, z: complex) -> np.ndarray:
    centers = field.pixel_centers()
    num = 2.0 * np.abs(centers - z)
    den = np.sqrt((1.0 + np.abs(centers) ** 2) * (1.0 + abs(z) ** 2))
    return (num / den).reshape(field.values.shape)


def holder_exponent(field: PixelField, z: SpherePoint, radii) -> tuple[float, float]:
    """(slope, R²) of log Q(z, r) vs log r over the given chordal radii.

    Q(z, r) is the max oscillation |ρ(y) − ρ(z)| over pixels within
    chordal distance r.  Radii should be a geometric sequence inside
    [2×pixel pitch, window/4] (in the local planar scale); at least 5.
    Returns (+inf, 1.0) when every Q sits below the field's noise floor;
    raises DegenerateFit when at least half (but not all) do.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 5 or any(r <= 0 for r in radii) or sorted(radii) != radii:
        raise ConfigError("need >= 5 positive increasing radii")
    if z.at_infinity:
        raise OutOfRange("sample point at infinity is outside the window")
    x0, x1, y0, y1 = field.window
    zc = z.value
    if not (x0 <= zc.real <= x1 and y0 <= zc.imag <= y1):
        raise OutOfRange(f"sample point {zc} outside window {field.window}")

    dists = _chordal_to_grid(field, zc)
    j = np.unravel_index(int(np.argmin(dists)), dists.shape)
    rho_z = field.values[j]
    osc = np.abs(field.values - rho_z)
    floor = float(field.meta.get("noise_floor", 0.0))

    qs = np.array([float(osc[dists <= r].max()) if (dists <= r).any() else 0.0 for r in radii])
    above = qs > floor
    if not above.any():
        return HOLDER_SENTINEL, 1.0
    if (~above).sum() * 2 >= len(radii):
        raise DegenerateFit(
            f"{int((~above).sum())} of {len(radii)} radii below noise floor {floor:.3g}"
        )
    lr = np.log(np.asarray(radii)[above])
    lq = np.log(qs[above])
    slope, intercept = np.polyfit(lr, lq, 1)
    pred = slope * lr + intercept
    ss_res = float(((lq - pred) ** 2).sum())
    ss_tot = float(((lq - lq.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


@dataclass(frozen=True)
class HolderRow:
    z: SpherePoint
    exponent: float
    fit_r2: float
    radii_used: int


@dataclass
class HolderReport:
    """Per-point Hölder fits with an empirical [min, max] exponent summary."""

    rows: list[HolderRow]
    summary: dict
    skipped: int
    note: str = ""


def holder_survey(
    field: PixelField,
    cloud,
    n_points: int,
    radii,
    rng_seed: int,
    spectrum=None,
) -> HolderReport:
    """Fit exponents at a seeded uniform sample of cloud points.

    Points outside the window (or at infinity) are skipped and counted;
    rows with all-quiet oscillation carry the +inf sentinel and are
    excluded from the min/max summary, which uses well-fitted rows only
    (R² > 0.9).  When a spectrum table is supplied, the summary carries
    the endpoint-comparison flags with 0.1 slack.
    """
    rng = random.Random(rng_seed)
    pts = cloud.points
    idxs = list(range(len(pts)))
    if n_points < len(idxs):
        idxs = rng.sample(idxs, n_points)
    rows: list[HolderRow] = []
    skipped = 0
    radii = [float(r) for r in radii]
    for i in idxs:
        z = pts[i]
        try:
            slope, r2 = holder_exponent(field, z, radii)
        except (OutOfRange, DegenerateFit):
            skipped += 1
            continue
        used = len(radii) if math.isfinite(slope) else 0
        rows.append(HolderRow(z, slope, r2, used))
    fitted = [
        r.exponent
        for r in rows
        if r.fit_r2 > WELL_FITTED_R2 and math.isfinite(r.exponent) and r.exponent >= 0
    ]
    summary: dict = {
        "n_rows": len(rows),
        "n_well_fitted": len(fitted),
        "min_exponent": min(fitted) if fitted else math.nan,
        "max_exponent": max(fitted) if fitted else math.nan,
    }
    note = ""
    if field.meta.get("n_maps", 0) == 1:
        note = "single-map case: averaged-system analysis inapplicable"
    if spectrum is not None and fitted:
        slack = 0.1
        summary["alpha_minus_hat"] = spectrum.alpha_minus
        summary["alpha_plus_hat"] = spectrum.alpha_plus
        summary["min_ge_alpha_minus"] = bool(summary["min_exponent"] >= spectrum.alpha_minus - slack)
        summary["max_le_alpha_plus"] = bool(summary["max_exponent"] <= spectrum.alpha_plus + slack)
    return HolderReport(rows, summary, skipped, note)


# ---------------------------------------------------------------------------
# the entropy / (log-degree + Green) bound


def alpha_minus_bound(
    mm: MultiMap,
    probs,
    n_sequences: int,
    seq_len: int,
    rng_seed: int,
) -> float:
    """(−Σ pᵢ log pᵢ) / (Σ pᵢ log deg fᵢ + Green term).

    The Green term averages, over random generator sequences, the sum of
    normalized potentials of the first map's finite critical points: for
    an orbit first exceeding the escape radius at step m, the estimate
    is log|z_m| divided by the product of the degrees applied so far;
    non-escaping critical orbits contribute zero.
    """
    _require_polynomials(mm)
    probs = [float(p) for p in probs]
    if len(probs) != len(mm.maps) or abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError("probabilities must match map count and sum to 1")
    entropy = max(-sum(p * math.log(p) for p in probs), 0.0)
    log_deg = sum(p * math.log(d) for p, d in zip(probs, mm.degrees))
    R = estimate_escape_radius(mm)

    crit_cache = [
        [c for c in rmap_critical_points(f) if not c.at_infinity] for f in mm.maps
    ]
    rng = random.Random(rng_seed)
    cum = np.cumsum(probs)
    total = 0.0
    for _ in range(n_sequences):
        seq = [int(np.searchsorted(cum, rng.random(), side="right")) for _ in range(seq_len)]
        seq = [min(s, len(probs) - 1) for s in seq]
        green = 0.0
        for c in crit_cache[seq[0]]:
            z = c
            deg_prod = 1.0
            for m in range(seq_len):
                f = mm.maps[seq[m]]
                deg_prod *= f.degree
                z = rmap_eval(f, z)
                if z.at_infinity or abs(z.value) > R:
                    mag = math.inf if z.at_infinity else abs(z.value)
                    green += max(math.log(mag), 0.0) / deg_prod if math.isfinite(mag) else 0.0
                    break
        total += green
    green_term = total / max(n_sequences, 1)
    return entropy / (log_deg + green_term)


# ---------------------------------------------------------------------------
# file formats


def save_field(field_: PixelField, path) -> None:
    """JSON header line, then row-major little-endian float32 values."""
    header = json.dumps(
        {
            "window": list(field_.window),
            "resolution": list(field_.resolution),
            "meta": field_.meta,
        },
        sort_keys=True,
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(field_.values, dtype="<f4").tobytes())


def load_field(path) -> PixelField:
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    info = json.loads(header.decode("utf-8"))
    W, H = info["resolution"]
    vals = np.frombuffer(blob, dtype="<f4")
    if len(vals) != W * H:
        raise ValueError(f"grid payload has {len(vals)} floats, expected {W*H}")
    return PixelField(
        tuple(info["window"]), (W, H), vals.reshape(H, W).astype(float), info["meta"]
    )


def save_field_png(field_: PixelField, path) -> None:
    """8-bit grayscale preview; image rows run top-down (y flipped)."""
    from PIL import Image

    img = np.clip(np.round(field_.values * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img[::-1], mode="L").save(path)


def write_holder_csv(report: HolderReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "exponent", "r2", "n_radii"])
        for r in report.rows:
            w.writerow(
                [
                    f"{r.z.value.real:.17g}",
                    f"{r.z.value.imag:.17g}",
                    f"{r.exponent:.17g}",
                    f"{r.fit_r2:.17g}",
                    r.radii_used,
                ]
            )
