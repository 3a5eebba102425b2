"""Coefficient algebra of the weight-conjugated fourth-order operator.

With u = theta y, theta = e^l, the conjugated equation reads

    theta (i dy + y_xxxx dt) = i du + (A0 u + A1 u_x + A2 u_xx + A3 u_xxx
                                       + u_xxxx) dt

and the A-coefficients split as A3 = C3, A2 = B2 + C2, A1 = B1 + C1,
A0 = B0 + C0 + D0 into the symmetric/antisymmetric families used by the
pointwise identity, with B0 pinned by B0 = C1x/2 - B2xx/2 + C3xxx/2 (the
choice that kills the (conj(u) du - u d conj(u)) term).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import jet_mul, jet_shift
from .weights import WeightEval


@dataclass(frozen=True)
class CoefficientBundle:
    """Conjugated-operator coefficients at the points of a WeightEval."""

    A0: np.ndarray   # complex
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    D0: np.ndarray   # complex


def conjugated_coefficients(w: WeightEval) -> CoefficientBundle:
    lx, lxx, lxxx, lxxxx, lt = w.lx, w.lxx, w.lxxx, w.lxxxx, w.lt
    A0 = lx**4 + 4.0 * lx * lxxx - lxxxx - 6.0 * lx**2 * lxx + 3.0 * lxx**2 \
        - 1j * lt
    A1 = -4.0 * lx**3 + 12.0 * lx * lxx - 4.0 * lxxx
    A2 = 6.0 * lx**2 - 6.0 * lxx
    A3 = -4.0 * lx
    B1 = 8.0 * lx * lxx - 4.0 * lxxx
    B2 = -6.0 * lxx
    C0 = lx**4 + 2.0 * lx * lxxx - 2.0 * lxxxx + lxx**2
    C1 = -4.0 * lx**3 + 4.0 * lx * lxx
    C2 = 6.0 * lx**2
    C3 = -4.0 * lx
    D0 = -1j * lt
    B0 = -6.0 * lx**2 * lxx + 2.0 * lxx**2 + 2.0 * lx * lxxx + lxxxx
    return CoefficientBundle(A0=A0, A1=A1, A2=A2, A3=A3, B0=B0, B1=B1, B2=B2,
                             C0=C0, C1=C1, C2=C2, C3=C3, D0=D0)


def recombination_residuals(w: WeightEval) -> dict:
    """Relative residuals of the exact recombination identities.

    Checks A3=C3, A2=B2+C2, A1=B1+C1, A0=B0+C0+D0 and the defining relation
    B0 = C1x/2 - B2xx/2 + C3xxx/2, the latter with the x-derivatives expanded
    from their own closed forms.
    """
    b = conjugated_coefficients(w)
    lx, lxx, lxxx, lxxxx = w.lx, w.lxx, w.lxxx, w.lxxxx
    C1x = -12.0 * lx**2 * lxx + 4.0 * lxx**2 + 4.0 * lx * lxxx
    B2xx = -6.0 * lxxxx
    C3xxx = -4.0 * lxxxx
    B0_alt = 0.5 * C1x - 0.5 * B2xx + 0.5 * C3xxx

    def rel(lhs, rhs):
        scale = np.maximum(np.abs(lhs) + np.abs(rhs), 1.0)
        return float(np.max(np.abs(lhs - rhs) / scale))

    return {
        "A3_C3": rel(b.A3, b.C3),
        "A2_B2C2": rel(b.A2, b.B2 + b.C2),
        "A1_B1C1": rel(b.A1, b.B1 + b.C1),
        "A0_B0C0D0": rel(b.A0, b.B0 + b.C0 + b.D0),
        "B0_halfderivs": rel(b.B0, B0_alt),
        "B2_C3x": rel(b.B2, 1.5 * (-4.0 * lxx)),
    }


# coefficient jets for the identity verifier ---------------------------------

def coefficient_jets(weight, x: np.ndarray, t: float, order: int = 4) -> dict:
    """x-jets of B0,B1,B2,C0..C3 plus the time-derivative scalars P_t, C3_t, D0.

    `weight` must provide l_jets(x, t, order+4) and lt_jets(x, t, 3); the
    closed forms above are combined with jet arithmetic so every derivative
    is analytic.
    """
    L = weight.l_jets(x, t, order + 4).astype(complex)
    L = L.reshape(L.shape[0], -1)
    Lt = weight.lt_jets(x, t, 3).astype(complex)

    def lj(k):          # jet of the k-th x-derivative of l, at `order`
        return jet_shift(L, k, order)

    l1, l2, l3, l4 = lj(1), lj(2), lj(3), lj(4)
    sq1 = jet_mul(l1, l1)
    B0 = -6.0 * jet_mul(sq1, l2) + 2.0 * jet_mul(l2, l2) + 2.0 * jet_mul(l1, l3) + l4
    B1 = 8.0 * jet_mul(l1, l2) - 4.0 * l3
    B2 = -6.0 * l2
    C0 = jet_mul(sq1, sq1) + 2.0 * jet_mul(l1, l3) - 2.0 * l4 + jet_mul(l2, l2)
    C1 = -4.0 * jet_mul(sq1, l1) + 4.0 * jet_mul(l1, l2)
    C2 = 6.0 * sq1
    C3 = -4.0 * l1
    # P = C1 - B2x + C3xx = C1 + 2 l_xxx and its time derivative
    P = C1[0] + 2.0 * L[3]
    lxt, lxxt, lxxxt = Lt[1], Lt[2], Lt[3]
    C1t = -12.0 * L[1]**2 * lxt + 4.0 * (lxt * L[2] + L[1] * lxxt)
    B2xt = -6.0 * lxxxt
    C3xxt = -4.0 * lxxxt
    Pt = C1t - B2xt + C3xxt
    return {
        "B0": B0, "B1": B1, "B2": B2, "C0": C0, "C1": C1, "C2": C2, "C3": C3,
        "P": P, "Pt": Pt, "C3t": -4.0 * lxt, "D0": -1j * Lt[0],
    }
