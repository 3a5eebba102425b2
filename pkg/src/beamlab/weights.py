"""Carleman weight construction and evaluation.

Two production weights:

  hat:    a(x,t) = (e^{mu (psi(x) + 3)} - e^{5 mu}) / (t (T - t)),
          psi a smooth bump profile with psi(0)=psi(1)=0, max psi = 1,
          psi_x(0) > 0, psi_x(1) < 0 and |psi_x| > 0 outside the
          observation window I0 (all verified numerically at build time);

  tilde:  a(x,t) = (e^{mu pt(x)} - e^{(3/2) mu max pt}) / (t (T - t)),
          pt(x) = (x - x0)^2 + delta0 with x0 > 1 and
          pt >= (3/4) max pt on [0,1].

Both are separable, l(x,t) = lambda * A(x) * tau(t) with tau = 1/(t(T-t)),
so every partial derivative reduces to an x-jet of A times a scalar time
factor.  theta = e^l ranges over hundreds of orders of magnitude; it is only
ever handled through log_theta = l, and weighted integrands combine
exponents before a single clamped exp.

A separate SyntheticWeight (sums of spatial polynomials times polynomials in
t) feeds the pointwise-identity verifiers, where O(1) weights with exact
derivatives of every order are what matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import jet_exp, jet_from_poly, jet_mul

EXP_FLOOR = -745.0   # exp underflows to exactly 0 below this
_GRID = 2048


@dataclass(frozen=True)
class HatWeightSpec:
    lam: float
    mu: float
    T: float
    window: tuple[float, float] = (0.3, 0.7)
    kappa: float | None = None     # bump amplitude; None = auto-tune

    def __post_init__(self):
        a, b = self.window
        if not (0.0 <= a < b <= 1.0):
            raise ValueError("observation window must satisfy 0 <= alpha < beta <= 1")
        if self.lam <= 0 or self.mu <= 0 or self.T <= 0:
            raise ValueError("lam, mu, T must be positive")


@dataclass(frozen=True)
class TildeWeightSpec:
    lam: float
    mu: float
    T: float
    x0: float = 1.5
    delta0: float = 6.0

    def __post_init__(self):
        if self.x0 <= 1.0:
            raise ValueError("tilde weight requires x0 > 1")
        if self.delta0 <= 0.0:
            raise ValueError("delta0 must be positive")
        if self.lam <= 0 or self.mu <= 0 or self.T <= 0:
            raise ValueError("lam, mu, T must be positive")


@dataclass(frozen=True)
class WeightEval:
    """Pointwise weight bundle on an x-grid at one time."""

    x: np.ndarray
    t: float
    a: np.ndarray
    log_theta: np.ndarray      # l = lambda * a;  theta = e^l kept in log space
    phi: np.ndarray
    lx: np.ndarray
    lxx: np.ndarray
    lxxx: np.ndarray
    lxxxx: np.ndarray
    lt: np.ndarray
    lxt: np.ndarray
    lxxt: np.ndarray
    lxxxt: np.ndarray
    at_time_boundary: bool = False


class _SeparableWeight:
    """l(x,t) = lam * A(x) * tau(t), tau = 1/(t(T-t)); A < 0 on [0,1]."""

    def __init__(self, lam: float, T: float):
        self.lam = lam
        self.T = T

    # subclasses provide A-jets and log phi pieces
    def _A_jet(self, x: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def _log_E(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tau(self, t: float) -> float:
        return 1.0 / (t * (self.T - t))

    def _tau_t(self, t: float) -> float:
        return -(self.T - 2.0 * t) * self._tau(t) ** 2

    def l_jets(self, x: np.ndarray, t: float, order: int = 8) -> np.ndarray:
        return self.lam * self._tau(t) * np.real(self._A_jet(x, order))

    def lt_jets(self, x: np.ndarray, t: float, order: int = 3) -> np.ndarray:
        return self.lam * self._tau_t(t) * np.real(self._A_jet(x, order))

    def a(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._tau(t) * np.real(self._A_jet(x, 0)[0])

    def log_phi(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._log_E(x) + np.log(self._tau(t))

    def eval(self, x, t: float) -> WeightEval:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if t <= 0.0 or t >= self.T:
            neg = np.full(x.shape, -np.inf)
            return WeightEval(x=x, t=t, a=neg, log_theta=neg,
                              phi=np.full(x.shape, np.inf),
                              lx=neg, lxx=neg, lxxx=neg, lxxxx=neg,
                              lt=neg, lxt=neg, lxxt=neg, lxxxt=neg,
                              at_time_boundary=True)
        L = self.l_jets(x, t, 4)
        Lt = self.lt_jets(x, t, 3)
        return WeightEval(x=x, t=t, a=L[0] / self.lam, log_theta=L[0],
                          phi=np.exp(self.log_phi(x, t)),
                          lx=L[1], lxx=L[2], lxxx=L[3], lxxxx=L[4],
                          lt=Lt[0], lxt=Lt[1], lxxt=Lt[2], lxxxt=Lt[3])


class HatWeight(_SeparableWeight):
    """Interior-observation weight; A(x) = e^{mu(psi+3)} - e^{5 mu}."""

    def __init__(self, spec: HatWeightSpec):
        super().__init__(spec.lam, spec.T)
        self.spec = spec
        self.mu = spec.mu
        alpha, beta = spec.window
        self._center = 0.5 * (alpha + beta)
        self._sigma = max(0.25 * (beta - alpha), 1e-3)
        self._kappa = self._tune_kappa() if spec.kappa is None else spec.kappa
        self._norm = self._psi_max_raw()
        self._validate()

    # psi profile: x(1-x)(1 + kappa * exp(-(x-c)^2/sigma^2)), scaled to max 1
    def _psi_jet_raw(self, x: np.ndarray, order: int, kappa: float) -> np.ndarray:
        p = jet_from_poly([0.0, 1.0, -1.0], x, order)
        if kappa == 0.0:
            return p
        c, s2 = self._center, self._sigma ** 2
        sjet = jet_from_poly([-c * c / s2, 2.0 * c / s2, -1.0 / s2], x, order)
        fac = kappa * jet_exp(sjet)
        fac[0] += 1.0
        return jet_mul(p, fac, order)

    def _psi_max_raw(self) -> float:
        xg = np.linspace(0.0, 1.0, _GRID + 1)
        return float(np.max(np.real(self._psi_jet_raw(xg, 0, self._kappa)[0])))

    def _tune_kappa(self) -> float:
        for kappa in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]:
            if self._psi_ok(kappa):
                return kappa
        raise ValueError(
            "could not tune a bump amplitude satisfying |psi_x| > 0 outside "
            f"the window {self.spec.window}; widen the window or pass kappa"
        )

    def _psi_ok(self, kappa: float) -> bool:
        xg = np.linspace(0.0, 1.0, _GRID + 1)
        J = np.real(self._psi_jet_raw(xg, 1, kappa))
        psi, dpsi = J[0], J[1]
        alpha, beta = self.spec.window
        outside = (xg <= alpha) | (xg >= beta)
        interior = (xg > 0) & (xg < 1)
        return (np.all(psi[interior] > 0.0)
                and dpsi[0] > 0.0 and dpsi[-1] < 0.0
                and np.min(np.abs(dpsi[outside & interior])) > 1e-8
                and psi[np.argmax(psi)] > 0
                and alpha < xg[np.argmax(psi)] < beta)

    def psi_jet(self, x: np.ndarray, order: int) -> np.ndarray:
        return np.real(self._psi_jet_raw(x, order, self._kappa)) / self._norm

    def _A_jet(self, x: np.ndarray, order: int) -> np.ndarray:
        pj = self.psi_jet(x, order) * self.mu
        pj[0] += 3.0 * self.mu
        A = jet_exp(pj.astype(complex))
        A[0] -= np.exp(5.0 * self.mu)
        return A

    def _log_E(self, x: np.ndarray) -> np.ndarray:
        return self.mu * (self.psi_jet(x, 0)[0] + 3.0)

    def _validate(self):
        xg = np.linspace(0.0, 1.0, _GRID + 1)
        J = self.psi_jet(xg, 1)
        psi, dpsi = J[0], J[1]
        alpha, beta = self.spec.window
        checks = [
            (abs(psi[0]) < 1e-12 and abs(psi[-1]) < 1e-12, "psi(0)=psi(1)=0"),
            (abs(np.max(psi) - 1.0) < 1e-9, "max psi = 1"),
            (np.all(psi[1:-1] > 0.0), "psi > 0 on (0,1)"),
            (dpsi[0] > 0.0, "psi_x(0) > 0"),
            (dpsi[-1] < 0.0, "psi_x(1) < 0"),
            (np.min(np.abs(dpsi[(xg <= alpha) | (xg >= beta)])) > 1e-8,
             "|psi_x| > 0 outside the observation window"),
        ]
        for ok, what in checks:
            if not ok:
                raise ValueError(f"hat weight profile violates admissibility condition: {what}")
        A0 = np.real(self._A_jet(xg, 0)[0])
        if not np.all(A0 < 0.0):
            raise ValueError("hat weight must satisfy a < 0 on [0,1]")


class TildeWeight(_SeparableWeight):
    """Boundary-observation weight; A(x) = e^{mu pt} - e^{(3/2) mu max pt}."""

    def __init__(self, spec: TildeWeightSpec):
        super().__init__(spec.lam, spec.T)
        self.spec = spec
        self.mu = spec.mu
        self.x0 = spec.x0
        self.delta0 = spec.delta0
        self.pt_max = spec.x0 ** 2 + spec.delta0   # max over [0,1], attained at x=0
        self._validate()

    def pt_jet(self, x: np.ndarray, order: int) -> np.ndarray:
        return np.real(jet_from_poly(
            [self.x0 ** 2 + self.delta0, -2.0 * self.x0, 1.0], x, order))

    def _A_jet(self, x: np.ndarray, order: int) -> np.ndarray:
        A = jet_exp((self.mu * self.pt_jet(x, order)).astype(complex))
        A[0] -= np.exp(1.5 * self.mu * self.pt_max)
        return A

    def _log_E(self, x: np.ndarray) -> np.ndarray:
        return self.mu * self.pt_jet(x, 0)[0]

    def _validate(self):
        xg = np.linspace(0.0, 1.0, _GRID + 1)
        pt = self.pt_jet(xg, 0)[0]
        if not np.all(pt >= 0.75 * self.pt_max - 1e-12):
            raise ValueError(
                "tilde weight requires psi~ >= (3/4) max psi~ on [0,1]; "
                f"x0={self.x0}, delta0={self.delta0} violates it "
                f"(needs delta0 >= {3 * self.x0 ** 2 - 4 * (1 - self.x0) ** 2:g})"
            )
        A0 = np.real(self._A_jet(xg, 0)[0])
        if not np.all(A0 < 0.0):
            raise ValueError("tilde weight must satisfy a < 0 on [0,1]")


def build_weight(spec):
    """Weight evaluator from a spec; all profile admissibility conditions are checked."""
    if isinstance(spec, HatWeightSpec):
        return HatWeight(spec)
    if isinstance(spec, TildeWeightSpec):
        return TildeWeight(spec)
    raise TypeError(f"unknown weight spec {type(spec).__name__}")


def suggest_lambda(weight_cls, spec_args: dict, target_exponent: float = 60.0) -> float:
    """lambda making the best-case |2 l| at t = T/2 equal target_exponent.

    The Carleman integrands carry theta^2 = e^{2l}; at lambda scales much
    beyond this the exponent sits below the double-precision floor everywhere
    and every weighted functional collapses to 0/0.  This helper picks the
    scale at which the integrals stay representable near (argmax psi, T/2).
    """
    probe = dict(spec_args)
    probe["lam"] = 1.0
    w = build_weight(HatWeightSpec(**probe) if weight_cls == "hat"
                     else TildeWeightSpec(**probe))
    xg = np.linspace(0.0, 1.0, 513)
    amax = np.max(np.real(w._A_jet(xg, 0)[0]))      # least negative value
    tau_mid = 4.0 / probe["T"] ** 2
    return float(target_exponent / (2.0 * abs(amax) * tau_mid))


class SyntheticWeight:
    """l(x,t) = sum_m p_m(x) q_m(t) with polynomial factors; test weight.

    Provides the same jet API as the production weights, with exact
    x-derivatives of every order, and O(1) magnitudes so theta = e^l is
    representable.
    """

    def __init__(self, terms: list[tuple[list, list]]):
        self.terms = [(np.asarray(px, dtype=float), np.asarray(qt, dtype=float))
                      for px, qt in terms]

    def l_jets(self, x: np.ndarray, t: float, order: int = 8) -> np.ndarray:
        out = np.zeros((order + 1, np.asarray(x).size))
        for px, qt in self.terms:
            out += np.real(jet_from_poly(px, np.asarray(x, dtype=float), order)) \
                * np.polynomial.polynomial.polyval(t, qt)
        return out

    def lt_jets(self, x: np.ndarray, t: float, order: int = 3) -> np.ndarray:
        out = np.zeros((order + 1, np.asarray(x).size))
        for px, qt in self.terms:
            dq = np.polynomial.polynomial.polyder(qt) if qt.size > 1 else np.zeros(1)
            out += np.real(jet_from_poly(px, np.asarray(x, dtype=float), order)) \
                * np.polynomial.polynomial.polyval(t, dq)
        return out

    def eval(self, x, t: float) -> WeightEval:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        L = self.l_jets(x, t, 4)
        Lt = self.lt_jets(x, t, 3)
        return WeightEval(x=x, t=t, a=L[0], log_theta=L[0], phi=np.exp(L[0]),
                          lx=L[1], lxx=L[2], lxxx=L[3], lxxxx=L[4],
                          lt=Lt[0], lxt=Lt[1], lxxt=Lt[2], lxxxt=Lt[3])


def clamped_exp(exponent: np.ndarray) -> np.ndarray:
    """exp with an exact-zero floor; exponents below EXP_FLOOR map to 0."""
    out = np.zeros_like(exponent)
    mask = exponent > EXP_FLOOR
    out[mask] = np.exp(np.minimum(exponent[mask], 700.0))
    return out
