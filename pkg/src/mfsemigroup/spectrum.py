"""Multifractal spectrum from the free energy: s(α) via Legendre duality.

The parametric route differentiates t(β) numerically (α = −t') and sets
s = βα + t; the direct route evaluates the conjugate on the grid.  Both
carry the scalar summary (δ, γ, α₀, α±) plus a triviality/rigidity
analysis for the degenerate linear-t case.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridTooCoarse, OutOfRange
from .rational import MultiMap, SpherePoint
from .thermo import FreeEnergyTable, HolderFamily, build_leaf_tables, free_energy_table, gamma_root

__all__ = [
    "SpectrumTable",
    "RigidityReport",
    "alpha_of_beta",
    "spectrum_parametric",
    "legendre_direct",
    "lyapunov_spectrum",
    "rigidity_test",
    "write_spectrum_csv",
    "write_spectrum_svg",
]

TRIVIAL_ALPHA_SPREAD = 1e-3
TRIVIAL_LIN_RESIDUAL = 1e-4
RIGID_LAMBDA_TOL = 1e-2


def alpha_of_beta(table: FreeEnergyTable) -> np.ndarray:
    """α(β) = −t'(β) by central differences (one-sided 2nd order at ends)."""
    betas, t = table.betas, table.t_values
    n = len(betas)
    if n < 5:
        raise GridTooCoarse(f"need >= 5 beta points to differentiate, got {n}")
    a = np.empty(n)
    a[1:-1] = -(t[2:] - t[:-2]) / (betas[2:] - betas[:-2])
    # 2nd-order one-sided differences on (possibly) nonuniform spacing
    for j, (i0, i1, i2) in ((0, (0, 1, 2)), (n - 1, (n - 1, n - 2, n - 3))):
        h1 = betas[i1] - betas[i0]
        h2 = betas[i2] - betas[i0]
        # derivative of the quadratic through the three points, at i0
        d = (t[i1] - t[i0]) * h2 / (h1 * (h2 - h1)) - (t[i2] - t[i0]) * h1 / (
            h2 * (h2 - h1)
        )
        a[j] = -d
    return a


@dataclass
class SpectrumTable:
    """Parametric spectrum rows plus the scalar summary of the run."""

    betas: np.ndarray
    alphas: np.ndarray
    s_values: np.ndarray
    t_values: np.ndarray
    alpha_plus: float   # α at the left end of the β grid (largest α)
    alpha_minus: float  # α at the right end (smallest α)
    alpha_zero: float   # α at the grid point nearest β = 0
    delta: float        # t at that point: the critical exponent
    gamma: float
    lin_residual: float  # max |t − δ(1 − β/γ)| over the grid
    trivial: bool


def _estimate_gamma(betas: np.ndarray, t: np.ndarray, delta: float) -> float:
    """γ from the zero crossing of t on the grid, else a least-squares slope."""
    sign = np.sign(t)
    for j in range(len(t) - 1):
        if sign[j] > 0 >= sign[j + 1]:
            b0, b1, t0, t1 = betas[j], betas[j + 1], t[j], t[j + 1]
            return float(b0 + t0 * (b1 - b0) / (t0 - t1))
    slope = float(np.polyfit(betas, t, 1)[0])
    if slope == 0.0 or delta == 0.0:
        return math.nan
    return -delta / slope


def spectrum_parametric(table: FreeEnergyTable, gamma: float | None = None) -> SpectrumTable:
    """Spectrum rows (α, s) with s = βα + t, plus scalars.

    γ is taken from the caller when supplied (the precise pressure root);
    otherwise it is estimated from the zero crossing of t on the grid.
    Triviality requires both a collapsed α range and a linear t.
    """
    betas, t = table.betas, table.t_values
    alphas = alpha_of_beta(table)
    s = betas * alphas + t
    j0 = int(np.argmin(np.abs(betas)))
    delta = float(t[j0])
    g = float(gamma) if gamma is not None else _estimate_gamma(betas, t, delta)
    if math.isfinite(g) and g != 0.0:
        lin_res = float(np.max(np.abs(t - delta * (1.0 - betas / g))))
    else:
        lin_res = math.inf
    spread = float(alphas[0] - alphas[-1])
    trivial = spread < TRIVIAL_ALPHA_SPREAD and lin_res < TRIVIAL_LIN_RESIDUAL
    # α is mathematically nonincreasing in β, but a flat (rigid) spectrum
    # leaves only difference-quotient roundoff in these endpoints; pin the
    # ordering α₋ ≤ α₀ ≤ α₊ so downstream interval logic stays valid.
    alpha_plus = float(max(alphas[0], alphas[-1]))
    alpha_minus = float(min(alphas[0], alphas[-1]))
    alpha_zero = float(min(max(alphas[j0], alpha_minus), alpha_plus))
    return SpectrumTable(
        betas=betas,
        alphas=alphas,
        s_values=s,
        t_values=t,
        alpha_plus=alpha_plus,
        alpha_minus=alpha_minus,
        alpha_zero=alpha_zero,
        delta=delta,
        gamma=g,
        lin_residual=lin_res,
        trivial=trivial,
    )


def legendre_direct(table: FreeEnergyTable, alpha: float) -> float:
    """s(α) = min over the β grid of t(β) + βα (the conjugate, directly).

    Raises OutOfRange when the minimum sits at a grid endpoint: the true
    infimum then lies outside the sampled β range and the grid value
    would silently underestimate s.
    """
    vals = table.t_values + table.betas * float(alpha)
    j = int(np.argmin(vals))
    if j == 0 or j == len(vals) - 1:
        raise OutOfRange(
            f"conjugate minimum attained at grid endpoint beta = {table.betas[j]}; "
            "alpha is outside the spectrum range this grid resolves"
        )
    return float(vals[j])


def lyapunov_spectrum(
    mm: MultiMap,
    depth: int,
    beta_grid,
    base: SpherePoint | None = None,
) -> SpectrumTable:
    """Spectrum of Lyapunov levels: the potential family fixed at ψ ≡ −1.

    α values are then reciprocals of Lyapunov exponents; for a single
    power map the spectrum collapses to the point 1/log d.
    """
    psi = HolderFamily.scalar(-1.0)
    ft = free_energy_table(mm, psi, beta_grid, depth, base=base)
    if base is None:
        from .julia import repelling_fixed_point

        base = repelling_fixed_point(mm.maps[0]).point
    tables = build_leaf_tables(mm, psi, base, min(depth, 4))  # γ is depth-exact here
    g = gamma_root(mm, psi, tables)
    return spectrum_parametric(ft, gamma=g)


@dataclass
class RigidityReport:
    """Outcome of the linear-spectrum (rigidity) analysis."""

    verdict: str  # trivial | nontrivial | inconclusive
    lambda_hat: float
    lambda_values: tuple[float, ...]
    lambda_spread: float
    lin_residual: float
    details: str


def _is_power_map(f) -> bool:
    if f.den.degree != 0:
        return False
    coeffs = f.num.coeffs
    return all(abs(c) < 1e-12 for c in coeffs[:-1]) and abs(coeffs[-1]) > 0


def rigidity_test(
    mm: MultiMap,
    c,
    table: FreeEnergyTable,
    gamma: float,
    delta: float,
) -> RigidityReport:
    """Is the spectrum of the constant family c degenerate (one point)?

    Triviality holds exactly when log deg fᵢ = λ·cᵢ for a single λ and
    the system is (conjugate to) power maps; numerically we require the
    per-map ratios log dᵢ / cᵢ to collapse, t(β) to be linear, and the
    generators to be syntactic power maps.  A large linearity residual
    certifies nontriviality; anything between is inconclusive (no search
    over Möbius conjugacies is attempted).
    """
    cs = tuple(float(x) for x in c)
    if len(cs) != len(mm.maps):
        raise ConfigError("constant family length does not match map count")
    if any(x == 0.0 for x in cs):
        raise ConfigError("rigidity ratios need nonzero constants")
    logd = np.log([float(d) for d in mm.degrees])
    lam = logd / np.asarray(cs)
    lam_hat = float(np.dot(cs, logd) / np.dot(cs, cs))  # LSQ fit through origin
    spread = float(lam.max() - lam.min())
    if math.isfinite(gamma) and gamma != 0.0:
        lin_res = float(
            np.max(np.abs(table.t_values - delta * (1.0 - table.betas / gamma)))
        )
    else:
        lin_res = math.inf
    syntactic = all(_is_power_map(f) for f in mm.maps)

    if spread < RIGID_LAMBDA_TOL and lin_res < TRIVIAL_LIN_RESIDUAL and syntactic:
        verdict = "trivial"
    elif lin_res > 10.0 * TRIVIAL_LIN_RESIDUAL:
        verdict = "nontrivial"
    else:
        verdict = "inconclusive"
    details = (
        f"per-map ratios log(deg)/c = {[f'{v:.6f}' for v in lam]}, spread {spread:.3g}; "
        f"t-linearity residual {lin_res:.3g}; "
        f"power-map generators: {syntactic}; Moebius conjugacy search not attempted"
    )
    return RigidityReport(verdict, lam_hat, tuple(float(v) for v in lam), spread, lin_res, details)


# ---------------------------------------------------------------------------
# exports


def write_spectrum_csv(spec: SpectrumTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "alpha", "s", "t"])
        for b, a, s, t in zip(spec.betas, spec.alphas, spec.s_values, spec.t_values):
            w.writerow([f"{b:.17g}", f"{a:.17g}", f"{s:.17g}", f"{t:.17g}"])


def write_spectrum_svg(spec: SpectrumTable, path, width: int = 640, height: int = 480) -> None:
    """Standalone SVG of the (α, s) curve with axes and the apex marked."""
    a = np.asarray(spec.alphas)
    s = np.asarray(spec.s_values)
    pad = 60
    a_lo, a_hi = float(a.min()), float(a.max())
    s_lo, s_hi = min(0.0, float(s.min())), float(s.max())
    if a_hi - a_lo < 1e-12:
        a_lo, a_hi = a_lo - 0.5, a_hi + 0.5
    if s_hi - s_lo < 1e-12:
        s_hi = s_lo + 1.0

    def X(x):
        return pad + (x - a_lo) / (a_hi - a_lo) * (width - 2 * pad)

    def Y(y):
        return height - pad - (y - s_lo) / (s_hi - s_lo) * (height - 2 * pad)

    pts = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in zip(a, s))
    ticks = []
    for k in range(5):
        av = a_lo + k * (a_hi - a_lo) / 4
        sv = s_lo + k * (s_hi - s_lo) / 4
        ticks.append(
            f'<line x1="{X(av):.1f}" y1="{height-pad}" x2="{X(av):.1f}" y2="{height-pad+5}" stroke="#333"/>'
            f'<text x="{X(av):.1f}" y="{height-pad+18}" font-size="11" text-anchor="middle">{av:.3f}</text>'
            f'<line x1="{pad-5}" y1="{Y(sv):.1f}" x2="{pad}" y2="{Y(sv):.1f}" stroke="#333"/>'
            f'<text x="{pad-8}" y="{Y(sv)+4:.1f}" font-size="11" text-anchor="end">{sv:.3f}</text>'
        )
    apex_x, apex_y = X(spec.alpha_zero), Y(spec.delta)
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect width="{width}" height="{height}" fill="white"/>
<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="#333"/>
<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="#333"/>
{''.join(ticks)}
<text x="{width//2}" y="{height-15}" font-size="13" text-anchor="middle">alpha</text>
<text x="18" y="{height//2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {height//2})">s(alpha)</text>
<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.8"/>
<circle cx="{apex_x:.1f}" cy="{apex_y:.1f}" r="3.5" fill="#d62728"/>
<text x="{apex_x+8:.1f}" y="{apex_y-8:.1f}" font-size="12">apex (alpha0={spec.alpha_zero:.4f}, delta={spec.delta:.4f})</text>
</svg>
"""
    with open(path, "w") as fh:
        fh.write(svg)
