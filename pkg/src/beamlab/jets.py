"""Tiny jet arithmetic: arrays of x-derivatives [f, f', f'', ...] on a grid.

A jet of order m is an ndarray of shape (m+1, nx).  Products and exponentials
propagate derivatives exactly (Leibniz / the recurrence (e^l)' = l' e^l), so
every x-derivative the identity verifiers need is analytic rather than a
finite-difference stencil.
"""

from __future__ import annotations

from math import comb

import numpy as np


def jet_from_poly(coeffs, x: np.ndarray, order: int) -> np.ndarray:
    """Jet of a polynomial sum_i coeffs[i] x^i."""
    c = np.asarray(coeffs, dtype=complex)
    out = np.empty((order + 1, x.size), dtype=complex)
    for j in range(order + 1):
        out[j] = np.polynomial.polynomial.polyval(x, c)
        c = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
    return out


def jet_const(value, x: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros((order + 1, x.size), dtype=complex)
    out[0] = value
    return out


def jet_mul(a: np.ndarray, b: np.ndarray, order: int | None = None) -> np.ndarray:
    """Leibniz product of two jets."""
    m = min(a.shape[0], b.shape[0]) - 1 if order is None else order
    nx = a.shape[1]
    out = np.zeros((m + 1, nx), dtype=np.result_type(a, b, np.complex128))
    for j in range(m + 1):
        acc = out[j]
        for i in range(j + 1):
            acc += comb(j, i) * a[i] * b[j - i]
    return out


def jet_shift(a: np.ndarray, k: int, order: int | None = None) -> np.ndarray:
    """Jet of the k-th derivative: drops the first k rows."""
    out = a[k:]
    if order is not None:
        if out.shape[0] < order + 1:
            raise ValueError("source jet too short for requested shift/order")
        out = out[:order + 1]
    return out


def jet_exp(l: np.ndarray) -> np.ndarray:
    """Jet of e^l via f^{(k)} = sum_j C(k-1, j) l^{(k-j)} f^{(j)}."""
    m = l.shape[0] - 1
    out = np.empty_like(l, dtype=np.result_type(l, np.complex128))
    out[0] = np.exp(l[0])
    for k in range(1, m + 1):
        acc = np.zeros_like(out[0])
        for j in range(k):
            acc += comb(k - 1, j) * l[k - j] * out[j]
        out[k] = acc
    return out


def jet_abs2(a: np.ndarray, order: int | None = None) -> np.ndarray:
    """Jet of |f|^2 = f conj(f)."""
    return jet_mul(a, np.conj(a), order)
