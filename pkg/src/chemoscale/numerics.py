"""Shared numerical kernels: stable special functions, log-weighted sums, panel quadrature.

Weights in this package can span hundreds of orders of magnitude (steep
exponential profiles), so every weighted reduction goes through a factored
max-log rescaling instead of evaluating the weight directly.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

__all__ = [
    "bernoulli_weight",
    "log_weighted_sum",
    "gauss_panels",
    "TridiagonalSPD",
    "tridiag_solve",
]


def bernoulli_weight(x: np.ndarray | float) -> np.ndarray:
    """B(x) = x / (e^x - 1), the exponential-fitting flux weight.

    Stable for all float inputs: series near 0, factored form for large |x|.
    B(0) = 1, B(x) -> 0 as x -> +inf, B(x) ~ -x as x -> -inf.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = np.abs(arr) < 1e-5
    # series: x/(e^x-1) = 1 - x/2 + x^2/12 - ...
    xs = arr[small]
    out[small] = 1.0 - xs / 2.0 + xs * xs / 12.0
    xb = arr[~small]
    # x>0: factored x*e^{-x}/(1-e^{-x}) never overflows; x<0: expm1(x) in (-1,0)
    res = np.where(
        xb > 0,
        xb * np.exp(-np.abs(xb)) / (-np.expm1(-np.abs(xb))),
        xb / np.expm1(np.where(xb < 0, xb, -1.0)),
    )
    out[~small] = res
    return float(out[0]) if scalar else out


def log_weighted_sum(values: np.ndarray, log_w: np.ndarray, measure: np.ndarray) -> float:
    """sum_i values_i * exp(log_w_i) * measure_i with max-log factoring.

    Returns a plain float; safe when exp(log_w) would over- or underflow as
    long as the *ratios* of weights are representable.
    """
    values = np.asarray(values, dtype=float)
    log_w = np.asarray(log_w, dtype=float)
    if values.size == 0:
        return 0.0
    shift = float(np.max(log_w))
    if not np.isfinite(shift):
        if shift == -np.inf:
            return 0.0
        raise ValueError("non-finite log-weight")
    return float(np.exp(shift) * np.sum(values * np.exp(log_w - shift) * measure))


def gauss_panels(edges: np.ndarray, order: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over the panels defined by edges.

    Returns flat arrays (nodes, weights) covering [edges[0], edges[-1]].
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("edges must be a 1-D array with at least two entries")
    x, w = np.polynomial.legendre.leggauss(order)
    a = edges[:-1][:, None]
    h = np.diff(edges)[:, None]
    nodes = a + (x[None, :] + 1.0) * 0.5 * h
    weights = w[None, :] * 0.5 * h
    return nodes.ravel(), weights.ravel()


class TridiagonalSPD:
    """Cholesky-factored symmetric positive definite tridiagonal solve.

    Built from (diag, off) of the symmetric matrix; solve() is reusable,
    which matters inside time loops with a fixed step matrix.
    """

    def __init__(self, diag: np.ndarray, off: np.ndarray):
        n = diag.size
        ab = np.zeros((2, n))
        ab[0, 1:] = off
        ab[1, :] = diag
        self._cb = cholesky_banded(ab, lower=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self._cb, False), rhs)


def tridiag_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """One-shot general tridiagonal solve (lower/upper are length n-1)."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs)
