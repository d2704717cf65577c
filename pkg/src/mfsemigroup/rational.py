"""Rational-map arithmetic on the Riemann sphere.

Maps are numerator/denominator polynomial pairs with complex coefficients
(ascending powers).  Everything degree-sensitive (preimages, critical
points) keeps the bookkeeping exact by counting the preimages that escape
to infinity when the working polynomial drops degree, so a degree-d map
always reports d preimages and 2d-2 critical points with multiplicity.

Points near or at infinity are handled in the w = 1/z chart; the chordal
metric is used throughout, which is what the spherical derivative norm
``|f'(z)| (1+|z|^2) / (1+|f(z)|^2)`` is adapted to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoefficientOverflow,
    IndeterminateValue,
    InvalidMap,
    NonConvergence,
)

# |z| beyond this is evaluated in the 1/z chart to keep Horner away from overflow
CHART_LIMIT = 1e8
# residual tolerance for root acceptance, relative to max coefficient magnitude
ROOT_RESIDUAL_RTOL = 1e-12
# num/den roots closer than this violate the coprimality invariant
COPRIMALITY_TOL = 1e-9
# guards for rmap_compose
COMPOSE_COEFF_BOUND = 1e100
COMPOSE_DEGREE_BOUND = 256

_ROOT_MAX_ITER = 200


# ---------------------------------------------------------------------------
# points on the sphere


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere: a finite complex value or infinity."""

    value: complex = 0j
    at_infinity: bool = False

    @classmethod
    def of(cls, z: complex) -> "SpherePoint":
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return INF
        return cls(z)

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "SpherePoint(inf)" if self.at_infinity else f"SpherePoint({self.value!r})"


INF = SpherePoint(0j, True)


def chordal_distance(z: SpherePoint, w: SpherePoint) -> float:
    """Chordal distance on the sphere; range [0, 2], 2 at antipodes."""
    if z.at_infinity and w.at_infinity:
        return 0.0
    if z.at_infinity:
        z, w = w, z
    az2 = abs(z.value) ** 2
    if w.at_infinity:
        return 2.0 / math.sqrt(1.0 + az2)
    aw2 = abs(w.value) ** 2
    return 2.0 * abs(z.value - w.value) / math.sqrt((1.0 + az2) * (1.0 + aw2))


# ---------------------------------------------------------------------------
# polynomials


def _trim(coeffs: Sequence[complex]) -> tuple[complex, ...]:
    cs = [complex(c) for c in coeffs]
    while len(cs) > 1 and cs[-1] == 0:
        cs.pop()
    if not cs:
        cs = [0j]
    return tuple(cs)


@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial, coefficients ascending, trailing zeros trimmed."""

    coeffs: tuple[complex, ...]

    def __init__(self, coeffs: Iterable[complex]):
        object.__setattr__(self, "coeffs", _trim(list(coeffs)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0j,)

    def __call__(self, z: complex) -> complex:
        return poly_eval(self, z)

    def deriv(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0j])
        return Polynomial([k * c for k, c in enumerate(self.coeffs)][1:])

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return Polynomial([(a[k] if k < len(a) else 0j) + (b[k] if k < len(b) else 0j) for k in range(n)])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.is_zero or other.is_zero:
            return Polynomial([0j])
        return Polynomial(np.convolve(np.array(self.coeffs), np.array(other.coeffs)).tolist())

    def scale(self, a: complex) -> "Polynomial":
        return Polynomial([a * c for c in self.coeffs])

    def reversed(self, length: int | None = None) -> "Polynomial":
        """Coefficients of w^(length-1) * p(1/w); pads with zeros up to `length`."""
        n = length if length is not None else len(self.coeffs)
        if n < len(self.coeffs):
            raise ValueError("reversal length below polynomial length")
        padded = list(self.coeffs) + [0j] * (n - len(self.coeffs))
        return Polynomial(padded[::-1])


def poly_eval(p: Polynomial, z: complex) -> complex:
    """Horner evaluation at a finite point."""
    acc = 0j
    for c in reversed(p.coeffs):
        acc = acc * z + c
    return acc


def _abs_eval(coeffs: Sequence[complex], r: float) -> float:
    """sum |a_k| r^k — magnitude scale of a Horner evaluation at |z| = r."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * r + abs(c)
    return acc


def _effective_degree(coeffs: Sequence[complex], rel_tol: float = ROOT_RESIDUAL_RTOL) -> int:
    """Degree after dropping leading coefficients that are zero to tolerance."""
    scale = max(abs(c) for c in coeffs)
    if scale == 0.0:
        return 0
    d = len(coeffs) - 1
    while d > 0 and abs(coeffs[d]) <= rel_tol * scale:
        d -= 1
    return d


def poly_roots(p: Polynomial, max_iter: int = _ROOT_MAX_ITER) -> list[complex]:
    """All deg(p) roots with multiplicity.

    Weierstrass (Durand-Kerner) simultaneous iteration from a perturbed
    circle, then a guarded Newton polish.  Residuals are accepted when
    |p(root)| <= 1e-12 * max|coeff| * max(1,|root|)^deg; root clusters are
    returned as-is (no merging), so multiple roots appear as tight clusters.
    """
    d = p.degree
    if d < 1:
        raise ValueError("poly_roots needs degree >= 1")
    a = np.array(p.coeffs, dtype=np.complex128)
    if d == 1:
        return [-a[0] / a[1]]

    scale = float(np.max(np.abs(a)))
    # perturbed-circle initializations; a couple of fallback radii/phases
    lead = abs(a[-1])
    r_geo = (abs(a[0]) / lead) ** (1.0 / d) if a[0] != 0 else 0.0
    r_cau = 1.0 + float(np.max(np.abs(a[:-1]))) / lead
    inits = [max(r_geo, 0.5), 0.5 * r_cau, max(2.0 * r_geo, 2.0)]
    phases = [0.4, 1.1, 2.3]

    best = None
    for attempt, (r0, ph) in enumerate(zip(inits, phases)):
        w = r0 * np.exp(1j * (2.0 * np.pi * np.arange(d) / d + ph)) + 1e-3 * (attempt + 1)
        _dk_iterate(a, w, max_iter)
        _newton_polish(a, w)
        res = np.abs(_horner_vec(a, w))
        tol = ROOT_RESIDUAL_RTOL * scale * np.maximum(1.0, np.abs(w)) ** d
        if np.all(res <= tol):
            return [complex(x) for x in w]
        if best is None or float(np.max(res / tol)) < best[0]:
            best = (float(np.max(res / tol)), w.copy())
    raise NonConvergence(
        f"root residual {best[0]:.3e}x tolerance after {max_iter} iterations (degree {d})"
    )


def _horner_vec(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(w)
    for c in a[::-1]:
        acc = acc * w + c
    return acc


def _dk_iterate(a: np.ndarray, w: np.ndarray, max_iter: int) -> bool:
    d = len(a) - 1
    lead = a[-1]
    for _ in range(max_iter):
        pw = _horner_vec(a, w)
        diff = w[:, None] - w[None, :]
        np.fill_diagonal(diff, 1.0)
        denom = lead * np.prod(diff, axis=1)
        # guard exact collisions between iterates
        bad = denom == 0
        if np.any(bad):
            w[bad] += 1e-8 * (1 + np.abs(w[bad]))
            continue
        step = pw / denom
        w -= step
        if float(np.max(np.abs(step))) < 1e-15 * (1.0 + float(np.max(np.abs(w)))):
            return True
    return False


def _newton_polish(a: np.ndarray, w: np.ndarray, steps: int = 3) -> None:
    da = a[1:] * np.arange(1, len(a))
    for _ in range(steps):
        pw = _horner_vec(a, w)
        dpw = _horner_vec(da, w)
        ok = dpw != 0
        cand = w.copy()
        cand[ok] = w[ok] - pw[ok] / dpw[ok]
        better = np.abs(_horner_vec(a, cand)) <= np.abs(pw)
        w[better] = cand[better]


# ---------------------------------------------------------------------------
# rational maps


@dataclass(frozen=True)
class RationalMap:
    """f = num/den with coprime numerator and denominator.

    The constructor normalizes the leading denominator coefficient to 1 and
    rejects maps whose num/den share a root to within 1e-9 — common factors
    in user input are treated as a modeling error, not silently cancelled.
    """

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial([1.0]))
    _unchecked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        num, den = self.num, self.den
        if den.is_zero:
            raise InvalidMap("denominator is identically zero")
        # canonical scaling: monic denominator
        lead = den.coeffs[-1]
        if lead != 1:
            object.__setattr__(self, "num", num.scale(1.0 / lead))
            object.__setattr__(self, "den", den.scale(1.0 / lead))
        if self._unchecked:
            return
        if self.num.is_zero:
            raise InvalidMap("map is identically zero")
        if self.degree < 1:
            raise InvalidMap("constant maps are not allowed (degree must be >= 1)")
        if self.num.degree >= 1 and self.den.degree >= 1:
            rn = poly_roots(self.num)
            rd = poly_roots(self.den)
            gap = min(abs(x - y) for x in rn for y in rd)
            if gap <= COPRIMALITY_TOL:
                raise InvalidMap(
                    f"num and den share a root to within {gap:.2e} (not coprime)"
                )

    @property
    def degree(self) -> int:
        return max(self.num.degree, self.den.degree)

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    @cached_property
    def wronskian(self) -> Polynomial:
        return self.num.deriv() * self.den - self.num * self.den.deriv()

    @cached_property
    def reversed_chart(self) -> "RationalMap":
        """The map w -> 1/f(1/w) as a RationalMap (used for points near infinity)."""
        n = self.degree + 1
        num_rev = self.num.reversed(n)
        den_rev = self.den.reversed(n)
        return RationalMap(den_rev, num_rev, _unchecked=True)

    def __call__(self, z: SpherePoint) -> SpherePoint:
        return rmap_eval(self, z)


@dataclass(frozen=True)
class MultiMap:
    """Indexed family of rational-map generators (f_0, ..., f_{k-1})."""

    maps: tuple[RationalMap, ...]

    def __init__(self, maps: Iterable[RationalMap]):
        ms = tuple(maps)
        if not ms:
            raise InvalidMap("MultiMap needs at least one generator")
        if len(ms) == 1 and ms[0].degree == 1:
            raise InvalidMap("exceptional multi-map: a single Moebius generator")
        object.__setattr__(self, "maps", ms)

    def __len__(self) -> int:
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    def __getitem__(self, i: int) -> RationalMap:
        return self.maps[i]

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(f.degree for f in self.maps)


def _eval_finite(f: RationalMap, z: complex) -> SpherePoint:
    n = poly_eval(f.num, z)
    d = poly_eval(f.den, z)
    r = abs(z)
    n_scale = _abs_eval(f.num.coeffs, r)
    d_scale = _abs_eval(f.den.coeffs, r)
    n_zero = abs(n) <= 1e-12 * n_scale
    d_zero = abs(d) <= 1e-12 * d_scale
    if n_zero and d_zero and f.den.degree >= 1:
        raise IndeterminateValue(f"num and den both vanish near z = {z!r}")
    if d == 0:
        return INF
    return SpherePoint.of(n / d)


def rmap_eval(f: RationalMap, z: SpherePoint) -> SpherePoint:
    """Evaluate f at a sphere point, switching to the 1/z chart for |z| > 1e8."""
    if z.at_infinity or abs(z.value) > CHART_LIMIT:
        g = f.reversed_chart
        w = 0j if z.at_infinity else 1.0 / z.value
        img = _eval_finite(g, w)
        if img.at_infinity:
            return SpherePoint(0j)
        if img.value == 0:
            return INF
        return SpherePoint.of(1.0 / img.value)
    return _eval_finite(f, z.value)


def rmap_derivative_norm(f: RationalMap, z: SpherePoint) -> float:
    """Spherical derivative norm ||f'(z)|| (0 exactly at critical points).

    Finite chart: |W(z)| (1+|z|^2) / (|num(z)|^2 + |den(z)|^2) with
    W = num' den - num den', which stays finite at poles; near/at infinity
    the same formula is applied to the 1/z chart map (the chordal metric is
    invariant under z -> 1/z, so the norm is chart-independent).
    """
    if z.at_infinity or abs(z.value) > CHART_LIMIT:
        g = f.reversed_chart
        w = 0j if z.at_infinity else 1.0 / z.value
        return _derivative_norm_finite(g, w)
    return _derivative_norm_finite(f, z.value)


def _derivative_norm_finite(f: RationalMap, z: complex) -> float:
    wz = poly_eval(f.wronskian, z)
    n = poly_eval(f.num, z)
    d = poly_eval(f.den, z)
    denom = abs(n) ** 2 + abs(d) ** 2
    if denom == 0.0:
        # both vanish only at an indeterminate point; report 0 rather than raise
        return 0.0
    return abs(wz) * (1.0 + abs(z) ** 2) / denom


def rmap_preimages(f: RationalMap, z: SpherePoint) -> list[SpherePoint]:
    """All deg(f) solutions of f(w) = z, with multiplicity.

    Finite targets solve num(w) - z*den(w) = 0; targets at infinity solve
    den(w) = 0.  Preimages at infinity are counted through the degree drop
    of the working polynomial.  Root clusters within 1e-7 are kept as
    separate entries.
    """
    d = f.degree
    if z.at_infinity:
        q = list(f.den.coeffs) + [0j] * (d + 1 - len(f.den.coeffs))
    else:
        zc = z.value
        if abs(zc) > CHART_LIMIT:
            # preimages of z under f are preimages of 1/z under 1/f = den/num
            inv = RationalMap(f.den, f.num, _unchecked=True)
            return rmap_preimages(inv, SpherePoint.of(1.0 / zc))
        nc = list(f.num.coeffs) + [0j] * (d + 1 - len(f.num.coeffs))
        dc = list(f.den.coeffs) + [0j] * (d + 1 - len(f.den.coeffs))
        q = [a - zc * b for a, b in zip(nc, dc)]
    e = _effective_degree(q)
    trimmed = Polynomial(q[: e + 1])
    if trimmed.is_zero:
        raise IndeterminateValue("working polynomial vanished identically")
    out: list[SpherePoint] = []
    if e >= 1:
        out.extend(SpherePoint.of(r) for r in poly_roots(trimmed))
    out.extend([INF] * (d - e))
    return out


def rmap_compose(f: RationalMap, g: RationalMap) -> RationalMap:
    """f∘g (g applied first); degree multiplies; coefficients by substitution."""
    if f.degree * g.degree > COMPOSE_DEGREE_BOUND:
        raise CoefficientOverflow(
            f"composition degree {f.degree * g.degree} exceeds bound {COMPOSE_DEGREE_BOUND}"
        )
    m = max(f.num.degree, f.den.degree)
    np_, dp_ = g.num, g.den
    # powers of num(g), den(g)
    n_pows = [Polynomial([1.0])]
    d_pows = [Polynomial([1.0])]
    for _ in range(m):
        n_pows.append(n_pows[-1] * np_)
        d_pows.append(d_pows[-1] * dp_)

    def subst(p: Polynomial) -> Polynomial:
        acc = Polynomial([0j])
        for k in range(m + 1):
            c = p.coeffs[k] if k < len(p.coeffs) else 0j
            if c == 0:
                continue
            acc = acc + (n_pows[k] * d_pows[m - k]).scale(c)
        return acc

    num_new = subst(f.num)
    den_new = subst(f.den)
    top = max(max(abs(c) for c in num_new.coeffs), max(abs(c) for c in den_new.coeffs))
    if not math.isfinite(top) or top > COMPOSE_COEFF_BOUND:
        raise CoefficientOverflow(f"composed coefficient magnitude {top:.3e} exceeds bound")
    return RationalMap(num_new, den_new, _unchecked=True)


def rmap_critical_points(f: RationalMap) -> list[SpherePoint]:
    """Critical points with multiplicity; always 2*deg - 2 entries.

    Finite ones are the Wronskian roots; whatever the Wronskian's degree
    drop leaves over (relative to 2d-2) sits at infinity — for a polynomial
    of degree d that yields infinity with multiplicity d-1.
    """
    d = f.degree
    if d < 2:
        raise InvalidMap("critical points need degree >= 2")
    w = f.wronskian
    coeffs = list(w.coeffs) + [0j] * (2 * d - 1 - len(w.coeffs))
    e = _effective_degree(coeffs)
    out: list[SpherePoint] = []
    if e >= 1:
        out.extend(SpherePoint.of(r) for r in poly_roots(Polynomial(coeffs[: e + 1])))
    out.extend([INF] * (2 * d - 2 - e))
    return out


def preimages_batch(
    f: RationalMap, zs: np.ndarray, at_inf: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """All d preimages for many target points at once.

    Parameters
    ----------
    zs : (M,) complex128 target values (entries with at_inf set are ignored).
    at_inf : (M,) bool marking targets at infinity.

    Returns
    -------
    (roots, roots_at_inf) : (M, d) complex128 and (M, d) bool.

    Rows the vectorized solver cannot certify (degree drop at the leading
    coefficient, residual-test failure, targets at or beyond the chart
    limit) are recomputed through :func:`rmap_preimages`, so infinity
    bookkeeping agrees with the scalar path everywhere.
    """
    from ._kernels import batched_roots

    zs = np.ascontiguousarray(zs, dtype=np.complex128)
    at_inf = np.asarray(at_inf, dtype=bool)
    M = zs.shape[0]
    d = f.degree
    roots = np.zeros((M, d), dtype=np.complex128)
    roots_inf = np.zeros((M, d), dtype=bool)
    if M == 0:
        return roots, roots_inf

    npad = np.zeros(d + 1, dtype=np.complex128)
    npad[: f.num.degree + 1] = f.num.coeffs
    dpad = np.zeros(d + 1, dtype=np.complex128)
    dpad[: f.den.degree + 1] = f.den.coeffs

    finite = ~at_inf & (np.abs(zs) <= CHART_LIMIT) & np.isfinite(zs)
    zfill = np.where(finite, zs, 0.0)
    C = npad[None, :] - zfill[:, None] * dpad[None, :]
    scale = np.abs(C).max(axis=1)
    fast = finite & (scale > 0) & (np.abs(C[:, d]) > 1e-9 * scale)

    idx = np.nonzero(fast)[0]
    slow = np.nonzero(~fast)[0].tolist()
    if idx.size:
        W, ok = batched_roots(C[idx])
        roots[idx[ok]] = W[ok]
        slow.extend(idx[~ok].tolist())
    for i in slow:
        target = INF if at_inf[i] else SpherePoint.of(complex(zs[i]))
        for j, y in enumerate(rmap_preimages(f, target)):
            if y.at_infinity:
                roots_inf[i, j] = True
            else:
                roots[i, j] = y.value
    return roots, roots_inf


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _coeff_to_json(c: complex) -> list[float]:
    return [c.real, c.imag]


def poly_to_json(p: Polynomial) -> list[list[float]]:
    return [_coeff_to_json(c) for c in p.coeffs]


def poly_from_json(data: Sequence) -> Polynomial:
    coeffs = []
    for item in data:
        if isinstance(item, (int, float)):
            coeffs.append(complex(item))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            coeffs.append(complex(float(item[0]), float(item[1])))
        else:
            raise ValueError(f"bad coefficient entry {item!r}: expected number or [re, im]")
    if not coeffs:
        raise ValueError("empty coefficient list")
    return Polynomial(coeffs)


def rmap_to_json(f: RationalMap) -> dict:
    out = {"num": poly_to_json(f.num)}
    if f.den.degree > 0 or f.den.coeffs[0] != 1:
        out["den"] = poly_to_json(f.den)
    return out


def rmap_from_json(data: dict) -> RationalMap:
    if not isinstance(data, dict) or "num" not in data:
        raise ValueError("rational map JSON needs a 'num' key")
    unknown = set(data) - {"num", "den"}
    if unknown:
        raise ValueError(f"unknown keys in rational map JSON: {sorted(unknown)}")
    num = poly_from_json(data["num"])
    den = poly_from_json(data.get("den", [1.0]))
    return RationalMap(num, den)
