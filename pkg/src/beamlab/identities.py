"""Discrete verifiers for the pointwise stochastic identities.

Two identities are checked on space-time grids:

  * the conjugated-operator identity for theta(i dy + y_xxxx dt) against
    2|I1|^2 dt plus bulk, divergence, exact-differential and Ito-correction
    terms (the machine behind the Carleman estimates), and
  * the two multiplier identities A conj(y)_x (i dy + y_xxxx dt) + c.c. and
    A conj(y)_xxx (...) + c.c. behind the hidden-regularity trace bounds.

Discrete evaluation policy (uniform across both):

  * every field and coefficient is analytic on the grid (jet arithmetic, no
    finite differences in x);
  * first-order differential slots (dy, du, du_x) are realized differences
    between consecutive grid times; for u = theta y the slot expands once by
    the product rule, du -> theta^n dy + y^n d theta, so the noise increment
    always carries the left-endpoint weight (otherwise the cross term
    d theta * dW would pollute pathwise convergence);
  * quadratic covariations use the exact substitution du dv -> n_u n_v dt
    with the supplied martingale parts;
  * exact differentials d[...] of coefficient-weighted bilinears expand by
    the compensated discrete product rule: realized differences for each
    factor plus the covariation compensator;
  * plain dt integrands are evaluated at the left endpoint.

For smooth inputs the per-step residual divided by dt is O(dt) (pure time-
differencing error); all stochastic bookkeeping cancels exactly, so a field
g(x) w(t) under a time-independent weight reproduces the identity to
rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conjugation import coefficient_jets
from .jets import jet_abs2, jet_exp, jet_from_poly, jet_mul, jet_shift


@dataclass(frozen=True)
class FieldTerm:
    """One separable term p(x) * q(t) or p(x) * w(t) of a test field."""

    px: tuple
    qt: object = None    # callable t -> complex, or None for the Brownian factor


class SemimartingaleField:
    """Test field y = sum of separable terms with known decomposition.

    Terms with qt=None ride on the driving path w(t); they make up the
    martingale part n(x) of dy = m dt + n dw.  Deterministic terms carry a
    smooth time factor q(t).
    """

    def __init__(self, terms: list[FieldTerm]):
        self.terms = list(terms)

    def value_jets(self, x: np.ndarray, t: float, w: float, order: int) -> np.ndarray:
        out = np.zeros((order + 1, x.size), dtype=complex)
        for term in self.terms:
            fac = w if term.qt is None else term.qt(t)
            if fac != 0.0:
                out += jet_from_poly(term.px, x, order) * fac
        return out

    def mart_jets(self, x: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros((order + 1, x.size), dtype=complex)
        for term in self.terms:
            if term.qt is None:
                out += jet_from_poly(term.px, x, order)
        return out


def _antisym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a conj(b) - b conj(a) at matching jet orders (elementwise rows)."""
    return a * np.conj(b) - b * np.conj(a)


def _jet_antisym(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Jet of a conj(b) - b conj(a)."""
    return jet_mul(a, np.conj(b), order) - jet_mul(b, np.conj(a), order)


def identity_residual(field: SemimartingaleField, weight, x: np.ndarray,
                      t0: float, t1: float, n_steps: int,
                      increments: np.ndarray | None = None) -> dict:
    """Residual field of the conjugated-operator identity, scaled by 1/dt.

    `weight` provides l_jets(x, t, order) to order 8 and lt_jets to order 3
    (synthetic weights in tests; the production weights expose the same API).
    `increments` is one realized path (n_steps,) or None for a deterministic
    run.
    """
    x = np.asarray(x, dtype=float)
    dt = (t1 - t0) / n_steps
    inc = np.zeros(n_steps) if increments is None else np.asarray(increments)
    w_vals = np.concatenate([[0.0], np.cumsum(inc)])
    res = np.empty((n_steps, x.size))

    def state(n):
        t = t0 + n * dt
        cj = coefficient_jets(weight, x, t, order=4)
        theta = jet_exp(weight.l_jets(x, t, 4).astype(complex))
        Y = field.value_jets(x, t, w_vals[n], 4)
        U = jet_mul(theta, Y)
        NU = jet_mul(theta, field.mart_jets(x, 4))
        return {"t": t, "cj": cj, "theta": theta, "Y": Y, "U": U, "NU": NU}

    scale = 0.0
    cur = state(0)
    for n in range(n_steps):
        nxt = state(n + 1)
        cj, U, NU, Y = cur["cj"], cur["U"], cur["NU"], cur["Y"]
        dU = jet_mul(cur["theta"], nxt["Y"] - Y) \
            + jet_mul(Y, nxt["theta"] - cur["theta"])
        dY0 = nxt["Y"][0] - Y[0]
        B0, B1, B2 = cj["B0"], cj["B1"], cj["B2"]
        C0, C1, C2, C3 = cj["C0"], cj["C1"], cj["C2"], cj["C3"]
        P, Pt, C3t, D0 = cj["P"], cj["Pt"], cj["C3t"], cj["D0"]

        I1 = B0[0] * U[0] + C1[0] * U[1] + B2[0] * U[2] + C3[0] * U[3]
        lhs = cur["theta"][0] * ((1j * dY0 + Y[4] * dt) * np.conj(I1)
                                 + (-1j * np.conj(dY0) + np.conj(Y[4]) * dt) * I1)

        W = [jet_abs2(jet_shift(U, j)) for j in range(4)]

        # bulk coefficients of |u|^2 .. |u_xxx|^2
        S0 = (B0[4] + jet_mul(B0, C2)[2] - jet_mul(B0, B1)[1]
              + 2.0 * jet_mul(B0, C0)[0] + B0[0] * (D0 + np.conj(D0))
              - jet_mul(C0, C1)[1] + jet_mul(B2, C0)[2] - jet_mul(C0, C3)[3])
        S1 = (-4.0 * B0[2] - 2.0 * jet_mul(B0, C2)[0] - C1[3]
              - jet_mul(C1, C2)[1] + 2.0 * jet_mul(B1, C1)[0]
              - jet_mul(B1, B2)[1] - 2.0 * jet_mul(B2, C0)[0]
              + jet_mul(B1, C3)[2] + 3.0 * jet_mul(C0, C3)[1])
        S2 = (2.0 * B0[0] + 3.0 * C1[1] + B2[2] + 2.0 * jet_mul(B2, C2)[0]
              - jet_mul(C2, C3)[1] - 2.0 * jet_mul(B1, C3)[0])
        S3 = -2.0 * B2[0] - C3[1]
        bulk = (W[0][0] * S0 + W[1][0] * S1 + W[2][0] * S2 + W[3][0] * S3) * dt

        # divergence groups {.}_x .. {.}_xxxx
        T1dt = (8.0 * jet_mul(jet_shift(B0, 1), W[1], 1)
                - 4.0 * jet_mul(jet_shift(B0, 3), W[0], 1)
                - 2.0 * jet_mul(jet_shift(jet_mul(B0, C2), 1), W[0], 1)
                + jet_mul(jet_mul(B0, B1), W[0], 1)
                + 3.0 * jet_mul(jet_shift(C1, 2), W[1], 1)
                - 3.0 * jet_mul(C1, W[2], 1)
                + jet_mul(jet_mul(C1, C2), W[1], 1)
                + jet_mul(jet_mul(C0, C1), W[0], 1)
                - 2.0 * jet_mul(jet_shift(B2, 1), W[2], 1)
                + jet_mul(jet_mul(B1, B2), W[1], 1)
                - 2.0 * jet_mul(jet_shift(jet_mul(B2, C0), 1), W[0], 1)
                + jet_mul(C3, W[3], 1)
                + jet_mul(jet_mul(C2, C3), W[2], 1)
                - 2.0 * jet_mul(jet_shift(jet_mul(B1, C3), 1), W[1], 1)
                + 3.0 * jet_mul(jet_shift(jet_mul(C0, C3), 2), W[0], 1)
                - 3.0 * jet_mul(jet_mul(C0, C3), W[1], 1))
        ud_cu = jet_mul(U, np.conj(dU), 1)               # u * d(conj u)
        cu_du = jet_mul(np.conj(U), dU, 1)               # conj(u) * du
        ux_dcu = jet_mul(jet_shift(U, 1), np.conj(dU), 1)
        cux_du = jet_mul(np.conj(jet_shift(U, 1)), dU, 1)
        uxx_dcu = jet_mul(jet_shift(U, 2), np.conj(dU), 1)
        cuxx_du = jet_mul(np.conj(jet_shift(U, 2)), dU, 1)
        ux_dcux = jet_mul(jet_shift(U, 1), np.conj(jet_shift(dU, 1)), 1)
        cux_dux = jet_mul(np.conj(jet_shift(U, 1)), jet_shift(dU, 1), 1)
        T1d = ((-0.5j) * jet_mul(C1, ud_cu - cu_du, 1)
               + (-1j) * jet_mul(B2, ux_dcu - cux_du, 1)
               + 0.5j * jet_mul(jet_shift(B2, 1), ud_cu - cu_du, 1)
               + (-1j) * jet_mul(C3, uxx_dcu - cuxx_du, 1)
               + 1j * jet_mul(jet_shift(C3, 1), ux_dcu - cux_du, 1)
               + (-0.5j) * jet_mul(jet_shift(C3, 2), ud_cu - cu_du, 1)
               + 0.5j * jet_mul(C3, ux_dcux - cux_dux, 1))
        T2 = (6.0 * jet_mul(jet_shift(B0, 2), W[0], 2)
              - 4.0 * jet_mul(B0, W[1], 2)
              + jet_mul(jet_mul(B0, C2), W[0], 2)
              - 3.0 * jet_mul(jet_shift(C1, 1), W[1], 2)
              + jet_mul(B2, W[2], 2)
              + jet_mul(jet_mul(B2, C0), W[0], 2)
              + jet_mul(jet_mul(B1, C3), W[1], 2)
              - 3.0 * jet_mul(jet_shift(jet_mul(C0, C3), 1), W[0], 2))
        T3 = -4.0 * jet_mul(jet_shift(B0, 1), W[0], 3) + jet_mul(C1, W[1], 3) \
            + jet_mul(jet_mul(C0, C3), W[0], 3)
        T4 = jet_mul(B0, W[0], 4)
        div = (T1dt[1] + T2[2] + T3[3] + T4[4]) * dt + T1d[1]

        # dM by the compensated product rule, coefficient differences realized
        V1 = _antisym(U[0], U[1])
        V2 = _antisym(U[1], U[2])
        dV1 = (U[0] * np.conj(dU[1]) + np.conj(U[1]) * dU[0]
               - U[1] * np.conj(dU[0]) - np.conj(U[0]) * dU[1]
               + _antisym(NU[0], NU[1]) * dt)
        dV2 = (U[1] * np.conj(dU[2]) + np.conj(U[2]) * dU[1]
               - U[2] * np.conj(dU[1]) - np.conj(U[1]) * dU[2]
               + _antisym(NU[1], NU[2]) * dt)
        cj1 = nxt["cj"]
        dM = 0.5j * ((cj1["P"] - P) * V1 + P * dV1
                     - (cj1["C3"][0] - C3[0]) * V2 - C3[0] * dV2)

        # first-differential slots (vanish for the pinned B0 and B2 = 3 C3_x / 2)
        h1 = 1j * (B0[0] - 0.5 * C1[1] + 0.5 * B2[2] - 0.5 * C3[3])
        h2 = 1j * (1.5 * C3[1] - B2[0])
        slot8 = ((np.conj(U[0]) * dU[0] - U[0] * np.conj(dU[0])) * h1
                 + (np.conj(U[1]) * dU[1] - U[1] * np.conj(dU[1])) * h2)

        # Ito-correction slots: du d(conj u_x) etc. by the exact rule
        slot9 = (_antisym(NU[0], NU[1]) * (-0.5j) * P
                 + _antisym(NU[1], NU[2]) * 0.5j * C3[0]) * dt

        slot10 = (U[0] * np.conj(U[1]) * (-0.5j * Pt + C1[0] * D0)
                  + U[1] * np.conj(U[0]) * (0.5j * Pt + C1[0] * np.conj(D0))
                  + _antisym(U[1], U[2]) * 0.5j * C3t
                  + B2[0] * D0 * U[0] * np.conj(U[2])
                  + B2[0] * np.conj(D0) * U[2] * np.conj(U[0])
                  + C3[0] * D0 * U[0] * np.conj(U[3])
                  + C3[0] * np.conj(D0) * U[3] * np.conj(U[0])) * dt

        rhs = 2.0 * np.abs(I1) ** 2 * dt + bulk + div + dM + slot8 + slot9 + slot10
        res[n] = np.abs(lhs - rhs) / dt
        scale = max(scale, float(np.max(np.abs(lhs))) / dt)
        cur = nxt

    return {"residual": res, "max_residual": float(np.max(res)), "dt": dt,
            "scale": scale}


def multiplier_identity_residual(field: SemimartingaleField, A_coeffs, x: np.ndarray,
                                 t0: float, t1: float, n_steps: int,
                                 increments: np.ndarray | None = None,
                                 A_time=None) -> dict:
    """Residuals of the two multiplier identities for a real multiplier.

    The multiplier is A(x) (polynomial coefficients), optionally times a
    polynomial time factor `A_time` (coefficients in t).  Returns per-step
    residual fields (scaled by 1/dt) and max norms for the first-order
    (A conj(y)_x ...) and third-order (A conj(y)_xxx ...) identities.
    """
    x = np.asarray(x, dtype=float)
    dt = (t1 - t0) / n_steps
    inc = np.zeros(n_steps) if increments is None else np.asarray(increments)
    w_vals = np.concatenate([[0.0], np.cumsum(inc)])
    Ax = jet_from_poly(A_coeffs, x, 4)
    qt = np.asarray([1.0] if A_time is None else A_time, dtype=float)
    dqt = np.polynomial.polynomial.polyder(qt) if qt.size > 1 else np.zeros(1)

    def A_of(t):
        return Ax * np.polynomial.polynomial.polyval(t, qt)

    def At_of(t):
        return Ax * np.polynomial.polynomial.polyval(t, dqt)

    N = field.mart_jets(x, 4)
    res1 = np.empty((n_steps, x.size))
    res2 = np.empty((n_steps, x.size))

    Ycur = field.value_jets(x, t0, 0.0, 4)
    for n in range(n_steps):
        t_cur = t0 + n * dt
        t_next = t0 + (n + 1) * dt
        A, At = A_of(t_cur), At_of(t_cur)
        dA = A_of(t_next) - A
        Ynext = field.value_jets(x, t_next, w_vals[n + 1], 4)
        Y, dY = Ycur, Ynext - Ycur
        W1 = jet_abs2(jet_shift(Y, 1))
        W2 = jet_abs2(jet_shift(Y, 2))
        W3 = jet_abs2(jet_shift(Y, 3))
        Ly = 1j * dY[0] + Y[4] * dt
        cLy = -1j * np.conj(dY[0]) + np.conj(Y[4]) * dt

        # first identity: multiplier on conj(y)_x
        lhs1 = A[0] * (np.conj(Y[1]) * Ly + Y[1] * cLy)
        div1 = (-0.5j) * jet_mul(A, jet_mul(Y, np.conj(dY), 1)
                                 - jet_mul(np.conj(Y), dY, 1), 1)[1]
        V1y = _antisym(Y[0], Y[1])
        dV1 = (Y[0] * np.conj(dY[1]) + np.conj(Y[1]) * dY[0]
               - Y[1] * np.conj(dY[0]) - np.conj(Y[0]) * dY[1]
               + _antisym(N[0], N[1]) * dt)
        dterm1 = 0.5j * (dA[0] * V1y + A[0] * dV1)
        cov1 = 0.5 * (-1j * A[0]) * _antisym(N[0], N[1]) * dt
        xslot1 = 0.5 * (-1j * A[1]) * (np.conj(Y[0]) * dY[0] - Y[0] * np.conj(dY[0]))
        tslot1 = 0.5 * (-1j * At[0]) * V1y * dt
        poly1 = (jet_mul(A, W1)[3]
                 - 3.0 * jet_mul(jet_shift(A, 1), W1, 2)[2]
                 + (3.0 * jet_mul(jet_shift(A, 2), W1, 1)
                    - 3.0 * jet_mul(A, W2, 1))[1]
                 - A[3] * W1[0] + 3.0 * A[1] * W2[0]) * dt
        rhs1 = div1 + dterm1 + cov1 + xslot1 + tslot1 + poly1
        res1[n] = np.abs(lhs1 - rhs1) / dt

        # second identity: multiplier on conj(y)_xxx
        lhs2 = A[0] * (np.conj(Y[3]) * Ly + Y[3] * cLy)
        J2 = ((-1j) * jet_mul(A, jet_mul(jet_shift(Y, 2), np.conj(dY), 1)
                              - jet_mul(np.conj(jet_shift(Y, 2)), dY, 1), 1)
              + 1j * jet_mul(jet_shift(A, 1), jet_mul(jet_shift(Y, 1), np.conj(dY), 1)
                             - jet_mul(np.conj(jet_shift(Y, 1)), dY, 1), 1)
              + (-0.5j) * jet_mul(jet_shift(A, 2), jet_mul(Y, np.conj(dY), 1)
                                  - jet_mul(np.conj(Y), dY, 1), 1)
              + 0.5j * jet_mul(A, jet_mul(jet_shift(Y, 1), np.conj(jet_shift(dY, 1)), 1)
                               - jet_mul(np.conj(jet_shift(Y, 1)), jet_shift(dY, 1), 1), 1)
              + jet_mul(A, jet_abs2(jet_shift(Y, 3), 1), 1) * dt)
        div2 = J2[1]
        V2y = _antisym(Y[1], Y[2])
        dV2 = (Y[1] * np.conj(dY[2]) + np.conj(Y[2]) * dY[1]
               - Y[2] * np.conj(dY[1]) - np.conj(Y[1]) * dY[2]
               + _antisym(N[1], N[2]) * dt)
        dV1b = dV1
        dterm2 = 0.5 * ((-1j) * (dA[0] * V2y + A[0] * dV2)
                        - (-1j) * (dA[2] * V1y + A[2] * dV1b))
        cov2 = (-0.5 * (-1j * A[0]) * _antisym(N[1], N[2])
                + 0.5 * (-1j * A[2]) * _antisym(N[0], N[1])) * dt
        xslot2 = (-1.5 * (-1j * A[1]) * (np.conj(Y[1]) * dY[1] - Y[1] * np.conj(dY[1]))
                  + 0.5 * (-1j * A[3]) * (np.conj(Y[0]) * dY[0] - Y[0] * np.conj(dY[0])))
        tslot2 = (0.5 * (-1j * At[2]) * V1y - 0.5 * (-1j * At[0]) * V2y) * dt
        poly2 = -A[1] * W3[0] * dt
        rhs2 = div2 + dterm2 + cov2 + xslot2 + tslot2 + poly2
        res2[n] = np.abs(lhs2 - rhs2) / dt

        Ycur = Ynext

    return {
        "residual_first": res1, "max_first": float(np.max(res1)),
        "residual_third": res2, "max_third": float(np.max(res2)),
        "dt": dt,
    }


def refinement_slopes(run, n_steps_list: list[int]) -> dict:
    """log2 decay slopes of max residuals across a dt-refinement ladder.

    `run(n_steps)` returns a max residual; slopes[i] compares steps i, i+1.
    A slope well below 1 flags non-convergence (grid too coarse or a broken
    identity transcription).
    """
    maxima = [run(m) for m in n_steps_list]
    slopes = [float(np.log2(maxima[i] / maxima[i + 1]))
              for i in range(len(maxima) - 1)]
    return {"max_residuals": maxima, "slopes": slopes,
            "converged": all(s >= 0.9 for s in slopes)}
