"""Numba-accelerated numerical kernels shared by the heavier modules.

Everything in here is deliberately sequential and allocation-free in the
hot loops so results are bit-reproducible across runs and machines with
the same BLAS-free instruction stream.
"""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "lse_affine",
    "batched_roots",
    "horner_many",
]


@njit(cache=True)
def lse_affine(A, B, beta, u):
    """log(sum(exp(beta*A + u*B))) without materialising the exponent array.

    Two passes: max, then shifted exponential sum.  Inputs are float64
    1-d arrays of equal length (not checked here; callers own that).
    """
    n = A.shape[0]
    m = -np.inf
    for i in range(n):
        x = beta * A[i] + u * B[i]
        if x > m:
            m = x
    if m == -np.inf:
        return -np.inf
    s = 0.0
    for i in range(n):
        x = beta * A[i] + u * B[i]
        s += np.exp(x - m)
    return m + np.log(s)


@njit(cache=True)
def _dk_sweep(C, W, max_iter, rtol, ok):
    """Durand-Kerner with Gauss-Seidel updates, then Newton polish.

    C : (M, d+1) complex coefficients, lowest degree first, C[:, d] != 0.
    W : (M, d) root iterates, modified in place.
    ok: (M,) bool, set per row when every root passes a backward-error test.
    """
    M, n = C.shape
    d = n - 1
    for m in range(M):
        for _ in range(max_iter):
            moved = 0.0
            scale = 0.0
            for i in range(d):
                w = W[m, i]
                p = C[m, d]
                for t in range(d - 1, -1, -1):
                    p = p * w + C[m, t]
                den = C[m, d]
                for j in range(d):
                    if j != i:
                        dz = w - W[m, j]
                        if dz == 0:
                            dz = 1e-12 + 1e-12j
                        den = den * dz
                step = p / den
                W[m, i] = w - step
                sa = abs(step.real) + abs(step.imag)
                if sa > moved:
                    moved = sa
                wa = abs(W[m, i].real) + abs(W[m, i].imag)
                if wa > scale:
                    scale = wa
            if moved < 1e-14 * (1.0 + scale):
                break
        # Newton polish: cheap insurance against DK stagnation near clusters.
        for i in range(d):
            w = W[m, i]
            for _ in range(3):
                p = C[m, d]
                dp = 0.0 + 0.0j
                for t in range(d - 1, -1, -1):
                    dp = dp * w + p
                    p = p * w + C[m, t]
                if dp == 0:
                    break
                step = p / dp
                if abs(step.real) + abs(step.imag) > 1.0 + abs(w.real) + abs(w.imag):
                    break
                w = w - step
            W[m, i] = w
        # Backward-error acceptance: |q(w)| <= rtol * sum |c_k| |w|^k.
        good = True
        for i in range(d):
            w = W[m, i]
            p = C[m, d]
            aw = abs(w)
            s = abs(C[m, d])
            for t in range(d - 1, -1, -1):
                p = p * w + C[m, t]
                s = s * aw + abs(C[m, t])
            if abs(p) > rtol * s + 1e-300:
                good = False
                break
        ok[m] = good


def batched_roots(C, max_iter=80, rtol=1e-10):
    """Roots of many same-degree polynomials at once.

    Parameters
    ----------
    C : (M, d+1) complex128 array, coefficients lowest degree first.
        Every row must have a genuinely nonzero leading coefficient;
        degenerate rows belong on the scalar code path.

    Returns
    -------
    W : (M, d) complex128 roots (unordered within a row).
    ok : (M,) bool, False where the iteration failed its residual test.
    """
    C = np.ascontiguousarray(C, dtype=np.complex128)
    M, n = C.shape
    d = n - 1
    if d < 1:
        raise ValueError("degree must be >= 1")
    if d == 1:
        W = (-C[:, 0] / C[:, 1])[:, None]
        return W, np.ones(M, dtype=bool)

    lead = np.abs(C[:, d])
    with np.errstate(divide="ignore", invalid="ignore"):
        r_geo = (np.abs(C[:, 0]) / lead) ** (1.0 / d)
    r_geo = np.where(np.isfinite(r_geo) & (r_geo > 0), r_geo, 1.0)
    ok = np.zeros(M, dtype=bool)
    W = np.empty((M, d), dtype=np.complex128)
    phases = np.exp(1j * (2.0 * np.pi * (np.arange(d) + 0.25) / d + 0.4))
    for attempt in range(2):
        todo = ~ok
        if not todo.any():
            break
        r = np.clip(r_geo[todo], 1e-6, 1e6) * (1.0 + attempt) + 0.5 * attempt
        W[todo] = r[:, None] * phases[None, :] * np.exp(1j * 0.7 * attempt)
        Wt = np.ascontiguousarray(W[todo])
        okt = np.zeros(Wt.shape[0], dtype=bool)
        _dk_sweep(C[todo], Wt, max_iter * (1 + attempt), rtol, okt)
        W[todo] = Wt
        ok[todo] = okt
    return W, ok


def horner_many(coeffs, z):
    """Evaluate one polynomial (lowest degree first) at an array of points."""
    acc = np.full_like(z, coeffs[-1], dtype=np.complex128)
    for c in coeffs[-2::-1]:
        acc *= z
        acc += c
    return acc
