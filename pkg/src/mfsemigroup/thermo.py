"""Topological pressure on preimage trees and the free energy t(β).

Pressure of βψ̃ + uζ̃ over the skew product is estimated from Birkhoff
sums down complete preimage trees of a base point: with Λ_m the sum of
exp(βA + uB) over depth-m leaves (A, B the accumulated ψ and ζ sums),
the estimator is log Λ_{n+1} − log Λ_n.  The free energy t(β) is the
root in u of that estimate; t(0) is the critical exponent.

Leaf tables never store words: the tree has a constant branching factor
D = Σ deg fᵢ, so a leaf index decodes to its word by repeated divmod.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import horner_many, lse_affine
from .errors import (
    BracketFailure,
    ConfigError,
    NodeBudgetExceeded,
    NotMonotone,
)
from .rational import (
    INF,
    MultiMap,
    RationalMap,
    SpherePoint,
    preimages_batch,
    rmap_derivative_norm,
)

__all__ = [
    "NODE_BUDGET",
    "HolderFamily",
    "LeafTable",
    "FreeEnergyTable",
    "auto_depth",
    "build_leaf_tables",
    "pressure_estimate",
    "free_energy",
    "free_energy_table",
    "gamma_root",
    "write_free_energy_csv",
]

NODE_BUDGET = 20_000_000
BISECT_TOL = 1e-8
U_BOUND = 100.0
EXPAND_CHUNK = 1_000_000  # parents per batched preimage call


@dataclass(frozen=True)
class HolderFamily:
    """Family of fiber potentials ψ = (ψ₀, …, ψ_{k-1}), one per generator.

    kinds:
      constant  — ψᵢ ≡ values[i]
      log_prob  — ψᵢ ≡ log values[i] for a probability vector
      log_deriv — ψᵢ(z) = -log‖fᵢ'(z)‖ (the geometric potential ζ itself)
      scalar    — ψᵢ ≡ values[0] for every i (Lyapunov analysis uses -1)
    """

    kind: str
    values: tuple[float, ...] = ()

    @classmethod
    def constant(cls, cs) -> "HolderFamily":
        return cls("constant", tuple(float(c) for c in cs))

    @classmethod
    def log_prob(cls, ps) -> "HolderFamily":
        ps = tuple(float(p) for p in ps)
        if not ps or any(not (0.0 < p < 1.0) for p in ps):
            raise ConfigError("probabilities must lie strictly in (0, 1)")
        if abs(sum(ps) - 1.0) > 1e-9:
            raise ConfigError(f"probabilities sum to {sum(ps)!r}, not 1")
        return cls("log_prob", ps)

    @classmethod
    def log_deriv(cls) -> "HolderFamily":
        return cls("log_deriv")

    @classmethod
    def scalar(cls, c: float = -1.0) -> "HolderFamily":
        return cls("scalar", (float(c),))

    def evaluate(self, mm: MultiMap, i: int, point: SpherePoint) -> float:
        """ψᵢ at a single point."""
        if self.kind == "constant":
            return self.values[i]
        if self.kind == "log_prob":
            return math.log(self.values[i])
        if self.kind == "scalar":
            return self.values[0]
        if self.kind == "log_deriv":
            return -_safe_log(rmap_derivative_norm(mm.maps[i], point))
        raise ConfigError(f"unknown potential kind {self.kind!r}")

    def increments(
        self, mm: MultiMap, i: int, pts: np.ndarray, at_inf: np.ndarray, zeta: np.ndarray
    ) -> np.ndarray:
        """Vectorized ψᵢ over leaf points (zeta passed to avoid recomputing)."""
        if self.kind == "constant":
            return np.full(pts.shape, self.values[i])
        if self.kind == "log_prob":
            return np.full(pts.shape, math.log(self.values[i]))
        if self.kind == "scalar":
            return np.full(pts.shape, self.values[0])
        if self.kind == "log_deriv":
            return zeta.copy()
        raise ConfigError(f"unknown potential kind {self.kind!r}")


def _safe_log(x: float) -> float:
    return math.log(max(x, 1e-300))


@dataclass
class LeafTable:
    """Complete preimage tree level: leaf points with Birkhoff sums A, B.

    Leaf j's word (w₁, …, w_depth) is recovered from the index alone:
    successive divmod by D = Σ deg fᵢ yields offsets whose degree-range
    gives each letter, most recently prepended letter first.
    """

    depth: int
    base: SpherePoint
    degrees: tuple[int, ...]
    points: np.ndarray = field(repr=False)
    at_inf: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    # previous level's sums, kept on the coarser table for gap diagnostics
    prev_A: np.ndarray | None = field(default=None, repr=False)
    prev_B: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.A)

    def word(self, j: int) -> tuple[int, ...]:
        if not 0 <= j < len(self):
            raise IndexError(f"leaf index {j} out of range")
        D = sum(self.degrees)
        letters = []
        for _ in range(self.depth):
            j, o = divmod(j, D)
            for i, d in enumerate(self.degrees):
                if o < d:
                    letters.append(i)
                    break
                o -= d
        return tuple(letters)

    def leaf_point(self, j: int) -> SpherePoint:
        if self.at_inf[j]:
            return INF
        return SpherePoint(complex(self.points[j]))


def auto_depth(mm: MultiMap, budget: int = NODE_BUDGET) -> int:
    """Largest depth n ≥ 1 with D^(n+1) leaves inside the node budget."""
    D = sum(mm.degrees)
    n = 1
    while D ** (n + 2) <= budget:
        n += 1
    if D ** (n + 1) > budget:
        raise NodeBudgetExceeded(f"even depth 1 needs {D**2} leaves > budget {budget}")
    return n


def _zeta_increments(f: RationalMap, pts: np.ndarray, at_inf: np.ndarray) -> np.ndarray:
    """ζ(y) = -log‖f'(y)‖ for an array of (mostly finite) points."""
    w = horner_many(np.asarray(f.wronskian.coeffs), pts)
    nm = horner_many(np.asarray(f.num.coeffs), pts)
    dn = horner_many(np.asarray(f.den.coeffs), pts)
    r2 = pts.real**2 + pts.imag**2
    norm = np.abs(w) * (1.0 + r2) / (nm.real**2 + nm.imag**2 + dn.real**2 + dn.imag**2)
    out = -np.log(np.maximum(norm, 1e-300))
    if at_inf.any():
        for j in np.nonzero(at_inf)[0]:
            out[j] = -_safe_log(rmap_derivative_norm(f, INF))
    return out


def build_leaf_tables(
    mm: MultiMap, psi: HolderFamily, base: SpherePoint, depth: int
) -> tuple[LeafTable, LeafTable]:
    """Expand the complete preimage tree of `base` to depths n and n+1.

    Returns the (depth, depth+1) pair the pressure estimator consumes.
    The coarser table keeps the depth-1 sums alongside, so truncation
    gap diagnostics need no rebuild.
    """
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    if psi.kind in ("constant", "log_prob") and len(psi.values) != len(mm.maps):
        raise ConfigError("potential family length does not match map count")
    degrees = mm.degrees
    D = sum(degrees)
    if D ** (depth + 1) > NODE_BUDGET:
        raise NodeBudgetExceeded(
            f"depth {depth} needs {D**(depth+1)} leaves > budget {NODE_BUDGET}"
        )
    offsets = np.concatenate([[0], np.cumsum(degrees)])

    pts = np.array([base.value], dtype=np.complex128)
    inf = np.array([base.at_infinity])
    A = np.zeros(1)
    B = np.zeros(1)
    snapshots: dict[int, tuple] = {}
    for level in range(1, depth + 2):
        M = len(pts)
        n_child = M * D
        cpts = np.empty(n_child, dtype=np.complex128)
        cinf = np.empty(n_child, dtype=bool)
        cA = np.empty(n_child)
        cB = np.empty(n_child)
        for s in range(0, M, EXPAND_CHUNK):
            e = min(s + EXPAND_CHUNK, M)
            blk_p = cpts[s * D : e * D].reshape(e - s, D)
            blk_i = cinf[s * D : e * D].reshape(e - s, D)
            blk_A = cA[s * D : e * D].reshape(e - s, D)
            blk_B = cB[s * D : e * D].reshape(e - s, D)
            for i, f in enumerate(mm.maps):
                lo, hi = offsets[i], offsets[i + 1]
                roots, rinf = preimages_batch(f, pts[s:e], inf[s:e])
                zeta = _zeta_increments(f, roots.ravel(), rinf.ravel()).reshape(roots.shape)
                ainc = psi.increments(mm, i, roots.ravel(), rinf.ravel(), zeta.ravel())
                blk_p[:, lo:hi] = roots
                blk_i[:, lo:hi] = rinf
                blk_A[:, lo:hi] = A[s:e, None] + ainc.reshape(roots.shape)
                blk_B[:, lo:hi] = B[s:e, None] + zeta
        if level >= depth - 1:
            snapshots[level] = (cpts, cinf, cA, cB)
        pts, inf, A, B = cpts, cinf, cA, cB

    if depth == 1:
        prev_A, prev_B = np.zeros(1), np.zeros(1)
    else:
        _, _, prev_A, prev_B = snapshots[depth - 1]
    p_lo, i_lo, a_lo, b_lo = snapshots[depth]
    p_hi, i_hi, a_hi, b_hi = snapshots[depth + 1]
    coarse = LeafTable(depth, base, degrees, p_lo, i_lo, a_lo, b_lo, prev_A, prev_B)
    fine = LeafTable(depth + 1, base, degrees, p_hi, i_hi, a_hi, b_hi)
    return coarse, fine


def pressure_estimate(
    tables: tuple[LeafTable, LeafTable], beta: float, u: float
) -> float:
    """log Λ_{n+1} − log Λ_n with Λ_m = Σ_{depth-m leaves} exp(βA + uB)."""
    lo, hi = tables
    return lse_affine(hi.A, hi.B, beta, u) - lse_affine(lo.A, lo.B, beta, u)


def _bisect_decreasing(evaluate, init: float, tol: float, bound: float):
    """Root of a decreasing function by bracket expansion + bisection.

    Returns (root, |f| at the last midpoint) — the residual the table
    builder reports.  BracketFailure if no sign change inside ±bound.
    """
    init = float(init)
    f_init = evaluate(init)
    if f_init == 0.0:
        return init, 0.0
    step = 0.25
    if f_init > 0.0:  # root is to the right
        lo, hi = init, init + step
        while True:
            if hi > bound:
                raise BracketFailure(f"no sign change in [{init}, {bound}]")
            if evaluate(hi) < 0.0:
                break
            lo, step = hi, step * 2.0
            hi = lo + step
    else:  # root is to the left
        lo, hi = init - step, init
        while True:
            if lo < -bound:
                raise BracketFailure(f"no sign change in [{-bound}, {init}]")
            if evaluate(lo) > 0.0:
                break
            hi, step = lo, step * 2.0
            lo = hi - step
    # invariant: evaluate(lo) > 0 > evaluate(hi), lo < hi
    resid = abs(f_init)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = evaluate(mid)
        resid = abs(fm)
        if fm == 0.0:
            return mid, 0.0
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), resid


def free_energy(
    mm: MultiMap,
    psi: HolderFamily,
    beta: float,
    tables: tuple[LeafTable, LeafTable],
    tol: float = BISECT_TOL,
    u_init: float | None = None,
) -> float:
    """t(β): the root in u of the pressure estimate at this β.

    Assumes the expansion check passed, so pressure is strictly
    decreasing in u and the root is unique.  `u_init` centers the
    bracket search (the table builder warm-starts from the previous β).
    """
    del mm, psi  # identity of the system is already baked into the tables
    init = 0.0 if u_init is None else float(u_init)
    root, _ = _bisect_decreasing(
        lambda u: pressure_estimate(tables, beta, u), init, tol, U_BOUND
    )
    return root


@dataclass
class FreeEnergyTable:
    """t(β) on a grid, with per-β bisection residuals and depth-gap diagnostics."""

    betas: np.ndarray
    t_values: np.ndarray
    residuals: np.ndarray
    gaps: np.ndarray
    depth: int
    base: SpherePoint
    family: HolderFamily
    tol: float


def free_energy_table(
    mm: MultiMap,
    psi: HolderFamily,
    beta_grid,
    depth: int,
    base: SpherePoint | None = None,
    tol: float = BISECT_TOL,
) -> FreeEnergyTable:
    """Solve t(β) across a β grid on shared leaf tables.

    The base point defaults to a repelling fixed point of the first
    generator.  Each β records the bisection residual |P̂| at the last
    midpoint and the truncation gap |P̂_{n+1,n} − P̂_{n,n-1}| at (β, t(β)).
    Raises NotMonotone if a 5-point probe finds pressure not strictly
    decreasing in u.
    """
    betas = np.asarray(beta_grid, dtype=float)
    if betas.ndim != 1 or len(betas) < 2 or not np.all(np.diff(betas) > 0):
        raise ConfigError("beta grid must be strictly increasing with >= 2 points")
    if base is None:
        from .julia import repelling_fixed_point

        base = repelling_fixed_point(mm.maps[0]).point
    tables = build_leaf_tables(mm, psi, base, depth)
    coarse = tables[0]
    pair_down = None
    if coarse.prev_A is not None:
        prev = LeafTable(
            coarse.depth - 1, base, coarse.degrees,
            np.empty(0, dtype=np.complex128), np.empty(0, dtype=bool),
            coarse.prev_A, coarse.prev_B,
        )
        pair_down = (prev, coarse)

    t_vals = np.empty_like(betas)
    resid = np.empty_like(betas)
    gaps = np.empty_like(betas)
    u_prev: float | None = None
    for j, beta in enumerate(betas):
        root, r = _bisect_decreasing(
            lambda u: pressure_estimate(tables, beta, u),
            0.0 if u_prev is None else u_prev,
            tol,
            U_BOUND,
        )
        t_vals[j], resid[j] = root, r
        u_prev = root
        if pair_down is not None:
            gaps[j] = abs(
                pressure_estimate(tables, beta, root)
                - pressure_estimate(pair_down, beta, root)
            )
        else:
            gaps[j] = np.nan

    # pressure must be strictly decreasing in u (expansion sanity probe)
    t0 = t_vals[int(np.argmin(np.abs(betas)))]
    b0 = betas[int(np.argmin(np.abs(betas)))]
    probe = [pressure_estimate(tables, b0, t0 + du) for du in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    if not all(probe[i] > probe[i + 1] for i in range(4)):
        raise NotMonotone("pressure is not strictly decreasing in u at the probe points")

    return FreeEnergyTable(betas, t_vals, resid, gaps, depth, base, psi, tol)


def gamma_root(
    mm: MultiMap,
    psi: HolderFamily,
    tables: tuple[LeafTable, LeafTable],
    tol: float = BISECT_TOL,
) -> float:
    """The β solving P̂(βψ̃) = 0 at u = 0 (the γ of the linearized model).

    Requires ψ̃ of one strict sign along the tree (otherwise pressure in
    β need not be monotone): checked on the finer table's A sums.
    """
    del mm, psi
    scale = max(1.0, float(np.abs(tables[1].A).max()))
    pos = bool((tables[1].A > 1e-12 * scale).any())
    neg = bool((tables[1].A < -1e-12 * scale).any())
    if pos and neg:
        raise NotMonotone("potential sums change sign; no monotone pressure in beta")
    sign = -1.0 if pos else 1.0  # flip so the bisection sees a decreasing function
    root, _ = _bisect_decreasing(
        lambda b: sign * pressure_estimate(tables, b, 0.0), 0.0, tol, U_BOUND
    )
    return root


def write_free_energy_csv(table: FreeEnergyTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "t", "residual", "gap"])
        for b, t, r, g in zip(table.betas, table.t_values, table.residuals, table.gaps):
            w.writerow([f"{b:.17g}", f"{t:.17g}", f"{r:.17g}", f"{g:.17g}"])
