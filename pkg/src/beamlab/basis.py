"""Clamped-beam eigenbasis of the fourth-order operator y -> y_xxxx on (0,1).

The modes satisfy phi = phi' = 0 at both endpoints; the frequencies mu_k solve
cos(mu) cosh(mu) = 1 and the eigenvalues are lambda_k = mu_k**4.  Everything
downstream (Galerkin solvers, traces, weighted norms) is expressed in this
basis, so the module also owns the quadrature rule, projection/synthesis and
the discrete X_s sequence norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Evaluation beyond this many modes hits cosh overflow/cancellation even in
# the stabilized exponential form (mu_24 ~ 77).
MAX_MODES = 24


@dataclass(frozen=True)
class BeamMode:
    """One clamped-clamped beam eigenmode."""

    index: int
    mu: float
    lam: float          # mu**4
    sigma: float        # (cosh mu - cos mu) / (sinh mu - sin mu)
    norm_const: float   # scaling that makes ||phi||_L2(0,1) = 1


@dataclass(frozen=True)
class Quadrature:
    """Composite Gauss-Legendre rule on (0,1)."""

    nodes: np.ndarray
    weights: np.ndarray
    nodes_per_cell: int = 16
    cells: int = 32

    @property
    def size(self) -> int:
        return self.nodes.size


def gauss_legendre_composite(nodes_per_cell: int = 16, cells: int = 32) -> Quadrature:
    """Composite Gauss-Legendre quadrature on (0,1).

    16 nodes on 32 cells resolves every retained beam mode (mu_24 ~ 77 means
    about 2.4 radians per cell) to machine precision.
    """
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_cell)
    h = 1.0 / cells
    edges = np.arange(cells) * h
    nodes = (edges[:, None] + 0.5 * h * (xg[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * wg, cells)
    return Quadrature(nodes=nodes, weights=weights,
                      nodes_per_cell=nodes_per_cell, cells=cells)


def characteristic_residual(mu: float) -> float:
    """Well-conditioned residual of cos(mu) cosh(mu) = 1.

    The raw form cos*cosh - 1 is hopeless in double precision for large mu
    (the derivative grows like cosh(mu), so even a last-ulp root leaves a
    residual of order cosh(mu)*eps).  Dividing by cosh gives the equivalent
    root condition cos(mu) - sech(mu) = 0 with O(1) conditioning.
    """
    return float(np.cos(mu) - 1.0 / np.cosh(mu))


def _beam_root(k: int, tol: float = 1e-14) -> float:
    """k-th root of cos(mu) cosh(mu) = 1, bracketed around (k + 1/2) pi.

    Bisection runs on the scaled form cos - sech, which keeps full accuracy
    where the raw product loses it to cosh growth.
    """

    def _char(mu):
        return np.cos(mu) - 1.0 / np.cosh(mu)

    center = (k + 0.5) * np.pi
    delta = 0.4
    lo, hi = center - delta, center + delta
    flo, fhi = _char(lo), _char(hi)
    if flo * fhi > 0.0:
        raise ArithmeticError(
            f"root bracketing failed for mode {k}: "
            f"f({lo:.6f})={flo:.3e}, f({hi:.6f})={fhi:.3e}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = _char(mid)
        if fmid == 0.0 or hi - lo < tol:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _shape_raw(mu: float, sigma: float, x: np.ndarray, order: int) -> np.ndarray:
    """Derivative of order `order` of the un-normalized mode shape.

    Uses the cancellation-free split
        cosh(mu x) - sigma sinh(mu x) = ep * e^{mu x} + em * e^{-mu x}
    with ep = (1 - sigma)/2, em = (1 + sigma)/2; ep is computed from the
    closed form 1 - sigma = (cos mu - sin mu - e^{-mu}) / (sinh mu - sin mu)
    so the e^{mu x} branch stays O(1) for large mu.
    """
    one_minus_sigma = (np.cos(mu) - np.sin(mu) - np.exp(-mu)) / (np.sinh(mu) - np.sin(mu))
    ep = 0.5 * one_minus_sigma
    em = 1.0 - ep        # keeps phi(0) = 0 exact; differs from (1+sigma)/2 by 1 ulp
    ph = 0.5 * np.pi * order
    mu_j = mu ** order
    return (ep * mu_j * np.exp(mu * x)
            + em * (-mu) ** order * np.exp(-mu * x)
            - mu_j * np.cos(mu * x + ph)
            + sigma * mu_j * np.sin(mu * x + ph))


def beam_spectrum(n_modes: int, quad: Quadrature | None = None) -> list[BeamMode]:
    """First `n_modes` clamped-beam modes, L2-normalized under `quad`."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if n_modes > MAX_MODES:
        raise ValueError(
            f"n_modes={n_modes} exceeds the stable cap {MAX_MODES} "
            "(cosh growth makes higher modes unreliable in double precision)"
        )
    if quad is None:
        quad = gauss_legendre_composite()
    modes = []
    for k in range(1, n_modes + 1):
        mu = float(_beam_root(k))
        sigma = float((np.cosh(mu) - np.cos(mu)) / (np.sinh(mu) - np.sin(mu)))
        raw = _shape_raw(mu, sigma, quad.nodes, 0)
        nrm = float(np.sqrt(np.sum(quad.weights * raw * raw)))
        modes.append(BeamMode(index=k, mu=mu, lam=mu ** 4,
                              sigma=sigma, norm_const=1.0 / nrm))
    return modes


def eigenfunction_eval(mode: BeamMode, x, order: int = 0):
    """Analytic derivative of the normalized mode shape, order 0..4."""
    if not 0 <= order <= 4:
        raise ValueError("order must be in 0..4")
    xa = np.asarray(x, dtype=float)
    return mode.norm_const * _shape_raw(mode.mu, mode.sigma, xa, order)


class SpectralBasis:
    """Bundle of modes + quadrature with cached mode tables on the nodes.

    Immutable after construction; all methods are pure.
    """

    def __init__(self, n_modes: int, quad: Quadrature | None = None):
        self.quad = quad if quad is not None else gauss_legendre_composite()
        self.modes = beam_spectrum(n_modes, self.quad)
        self.n_modes = n_modes
        self.mu = np.array([m.mu for m in self.modes])
        self.lam = np.array([m.lam for m in self.modes])
        # tables[j][q, k] = phi_k^(j)(x_q)
        self.tables = [
            np.column_stack([eigenfunction_eval(m, self.quad.nodes, j) for m in self.modes])
            for j in range(5)
        ]

    def eval_matrix(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """Matrix phi_k^(order)(x_i) of shape (len(x), n_modes)."""
        return np.column_stack([eigenfunction_eval(m, x, order) for m in self.modes])

    def project(self, field: np.ndarray) -> np.ndarray:
        """Spectral coefficients <field, phi_k> of a field sampled on the nodes."""
        field = np.asarray(field)
        if field.shape[-1] != self.quad.size:
            raise ValueError(
                f"field has {field.shape[-1]} samples, quadrature has {self.quad.size} nodes"
            )
        return (field * self.quad.weights) @ self.tables[0]

    def synthesize(self, coeffs: np.ndarray, x, order: int = 0):
        """Sum_k c_k phi_k^(order)(x); coeffs may carry leading batch axes."""
        if not 0 <= order <= 3:
            raise ValueError("synthesize supports orders 0..3")
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        mat = self.eval_matrix(xa, order)          # (nx, N)
        out = np.asarray(coeffs) @ mat.T
        return out if np.ndim(x) else out[..., 0]

    def synthesize_on_nodes(self, coeffs: np.ndarray, order: int = 0) -> np.ndarray:
        if not 0 <= order <= 4:
            raise ValueError("order must be in 0..4")
        return np.asarray(coeffs) @ self.tables[order].T

    def xs_norm(self, coeffs: np.ndarray, s: float) -> float:
        """Discrete X_s norm (sum_k (1+lambda_k)^{s/2} |c_k|^2)^{1/2}.

        Negative s gives the dual X_|s|' sequence norm.  This weighted
        sequence norm stands in for the interpolation-space definition; it is
        the single norm family used across the package.
        """
        if not -4.0 <= s <= 4.0:
            raise ValueError("s must lie in [-4, 4]")
        w = (1.0 + self.lam) ** (s / 2.0)
        c = np.asarray(coeffs)
        return float(np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))) if c.ndim == 1 \
            else np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))

    def boundary_trace(self, coeffs: np.ndarray, endpoint: int, order: int) -> complex:
        """Trace sum_k c_k phi_k^(order)(endpoint) for order 2 or 3.

        Orders 0 and 1 vanish identically on the clamped basis and are not
        exposed.
        """
        if endpoint not in (0, 1):
            raise ValueError("endpoint must be 0 or 1")
        if order not in (2, 3):
            raise ValueError("trace order must be 2 or 3")
        vals = self.trace_vector(endpoint, order)
        return np.asarray(coeffs) @ vals

    def trace_vector(self, endpoint: int, order: int) -> np.ndarray:
        """phi_k^(order)(endpoint) for all modes."""
        return np.array([eigenfunction_eval(m, float(endpoint), order) for m in self.modes])

    def gram_matrix(self) -> np.ndarray:
        """Quadrature Gram matrix of the modes (identity up to quadrature error)."""
        t0 = self.tables[0]
        return (t0 * self.quad.weights[:, None]).T @ t0

    def mode_table_csv(self) -> str:
        """CSV table (k, mu_k, lambda_k, sigma_k)."""
        lines = ["k,mu,lambda,sigma"]
        for m in self.modes:
            lines.append(f"{m.index},{m.mu:.15g},{m.lam:.15g},{m.sigma:.15g}")
        return "\n".join(lines) + "\n"
