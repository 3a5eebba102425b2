"""Monte-Carlo harnesses for the weighted (Carleman) and observability
inequalities.

Every weighted integrand carries theta^2 = e^{2l} with l spanning hundreds of
orders of magnitude, so all factors are assembled in log space,

    lambda^p phi^p theta^2 = exp(2 l + p (log lambda + log phi)),

and exponents below the double-precision floor become exact zeros (the
integrand is analytically negligible there; the time grid keeps its trapezoid
weights with zero endpoint contributions).

The forward estimate bounds the full weighted energy

    E int (la ph th^2 |y_xxx|^2 + la^3 ph^3 th^2 |y_xx|^2
           + la^5 ph^5 th^2 |y_x|^2 + la^7 ph^7 th^2 |y|^2)

by an observation term (interior window or x=0 boundary traces) plus weighted
data terms la^4 ph^4 th^2 |g|^2 + la^2 ph^2 th^2 |g_x|^2 + th^2 |g_xx|^2
+ th^2 |f|^2; the backward variant replaces (y, g, f) by (z, Z, h).
Nothing asserts a ratio below 1 (the estimates' constant is unknown); the
harness reports both sides and ratio stability across a lambda sweep.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .backward import BackwardSolution
from .basis import SpectralBasis
from .forward import Trajectory
from .weights import clamped_exp


def _map_paths(fn, n_paths: int, threads: int) -> None:
    """Run fn(p) for p in range(n_paths); results land in caller-owned arrays
    indexed by p, so the reduction order (and the output) is deterministic."""
    if threads <= 1:
        for p in range(n_paths):
            fn(p)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, range(n_paths)))


def _weight_tables(basis: SpectralBasis, weight, times: np.ndarray,
                   powers: tuple[int, ...]) -> dict:
    """exp(2l + p(log lam + log phi)) on (interior times) x (quad nodes)."""
    x = basis.quad.nodes
    log_lam = np.log(weight.lam)
    tables = {p: np.zeros((times.size, x.size)) for p in powers}
    for n, t in enumerate(times):
        if t <= 0.0 or t >= weight.T:
            continue
        two_l = 2.0 * weight.l_jets(x, float(t), 0)[0]
        log_phi = weight.log_phi(x, float(t))
        for p in powers:
            tables[p][n] = clamped_exp(two_l + p * (log_lam + log_phi))
    return tables


def _boundary_weights(weight, times: np.ndarray, powers: tuple[int, ...]) -> dict:
    x0 = np.array([0.0])
    log_lam = np.log(weight.lam)
    out = {p: np.zeros(times.size) for p in powers}
    for n, t in enumerate(times):
        if t <= 0.0 or t >= weight.T:
            continue
        two_l = 2.0 * weight.l_jets(x0, float(t), 0)[0]
        log_phi = weight.log_phi(x0, float(t))
        for p in powers:
            out[p][n] = clamped_exp(two_l + p * (log_lam + log_phi))[0]
    return out


def _trapezoid_weights(n_nodes: int, dt: float) -> np.ndarray:
    wt = np.full(n_nodes, dt)
    wt[0] = wt[-1] = 0.5 * dt
    return wt


def forward_carleman_report(basis: SpectralBasis, traj: Trajectory, weight,
                            observation: str, f_coeffs=None, g_coeffs=None,
                            window: tuple[float, float] | None = None,
                            threads: int = 1) -> dict:
    """Both sides of the weighted estimate for a forward ensemble.

    observation="interior" uses the window (hat weight); "boundary" uses the
    x=0 traces (tilde weight).  Data terms use the deterministic source
    coefficient vectors `f_coeffs`, `g_coeffs` (spatial derivatives of g by
    spectral synthesis).
    """
    times = traj.times
    nt1 = times.size
    quad_w = basis.quad.weights
    time_w = _trapezoid_weights(nt1, traj.dt)
    powers = (1, 3, 5, 7)
    W = _weight_tables(basis, weight, times, powers + (2, 4, 0))
    lhs_orders = {3: 1, 2: 3, 1: 5, 0: 7}

    if observation == "interior":
        if window is None:
            window = weight.spec.window
        mask = (basis.quad.nodes > window[0]) & (basis.quad.nodes < window[1])
    elif observation == "boundary":
        Wb = _boundary_weights(weight, times, (1, 3))
        tr_xx = basis.trace_vector(0, 2)
        tr_xxx = basis.trace_vector(0, 3)
    else:
        raise ValueError("observation must be 'interior' or 'boundary'")

    K = traj.n_paths
    lhs_paths = np.empty(K)
    obs_paths = np.empty(K)

    def one_path(p):
        states = traj.states[p]
        lhs = 0.0
        fields = {}
        for order, pw in lhs_orders.items():
            F = np.abs(basis.synthesize_on_nodes(states, order)) ** 2
            fields[order] = F
            lhs += np.einsum("tq,tq,t,q->", W[pw], F, time_w, quad_w)
        lhs_paths[p] = lhs
        if observation == "interior":
            obs_paths[p] = (
                np.einsum("tq,tq,t,q->", W[1][:, mask], fields[3][:, mask],
                          time_w, quad_w[mask])
                + np.einsum("tq,tq,t,q->", W[7][:, mask], fields[0][:, mask],
                            time_w, quad_w[mask]))
        else:
            bxx = np.abs(states @ tr_xx) ** 2
            bxxx = np.abs(states @ tr_xxx) ** 2
            obs_paths[p] = np.sum((Wb[1] * bxxx + Wb[3] * bxx) * time_w)

    _map_paths(one_path, K, threads)

    data = _data_terms(basis, W, time_w, quad_w, g_coeffs, f_coeffs, nt1)
    lhs = float(np.mean(lhs_paths))
    rhs = float(np.mean(obs_paths)) + data
    return {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf),
        "observation_term": float(np.mean(obs_paths)),
        "data_term": data,
        "lhs_stderr": float(np.std(lhs_paths, ddof=1) / np.sqrt(K)) if K > 1 else 0.0,
        "obs_stderr": float(np.std(obs_paths, ddof=1) / np.sqrt(K)) if K > 1 else 0.0,
        "lam": weight.lam,
        "observation": observation,
    }


def _data_terms(basis, W, time_w, quad_w, g_coeffs, f_coeffs, nt1) -> float:
    total = 0.0
    if g_coeffs is not None:
        g = np.asarray(g_coeffs, dtype=complex)
        for order, pw in ((0, 4), (1, 2), (2, 0)):
            F = np.abs(basis.synthesize_on_nodes(g, order)) ** 2
            total += np.einsum("tq,q,t,q->", W[pw], F, time_w, quad_w)
    if f_coeffs is not None:
        f = np.asarray(f_coeffs, dtype=complex)
        F = np.abs(basis.synthesize_on_nodes(f, 0)) ** 2
        total += np.einsum("tq,q,t,q->", W[0], F, time_w, quad_w)
    return float(total)


def backward_carleman_report(basis: SpectralBasis, bwd: BackwardSolution, weight,
                             h_coeffs=None, threads: int = 1) -> dict:
    """Boundary-observation weighted estimate for a backward ensemble.

    (z, Z, h) replace (y, g, f): the data terms carry the ensemble field Z in
    place of the deterministic g.
    """
    times = bwd.times
    nt1 = times.size
    quad_w = basis.quad.weights
    time_w = _trapezoid_weights(nt1, bwd.dt)
    W = _weight_tables(basis, weight, times, (1, 3, 5, 7, 4, 2, 0))
    Wb = _boundary_weights(weight, times, (1, 3))
    tr_xx = basis.trace_vector(0, 2)
    tr_xxx = basis.trace_vector(0, 3)
    lhs_orders = {3: 1, 2: 3, 1: 5, 0: 7}

    K = bwd.n_paths
    lhs_paths = np.empty(K)
    obs_paths = np.empty(K)
    zdata_paths = np.empty(K)
    tw_Z = time_w[:-1]   # Z lives on the step grid

    def one_path(p):
        states = bwd.z_states[p]
        lhs = 0.0
        for order, pw in lhs_orders.items():
            F = np.abs(basis.synthesize_on_nodes(states, order)) ** 2
            lhs += np.einsum("tq,tq,t,q->", W[pw], F, time_w, quad_w)
        lhs_paths[p] = lhs
        bxx = np.abs(states @ tr_xx) ** 2
        bxxx = np.abs(states @ tr_xxx) ** 2
        obs_paths[p] = np.sum((Wb[1] * bxxx + Wb[3] * bxx) * time_w)
        zd = 0.0
        Zst = bwd.Z_states[p]
        for order, pw in ((0, 4), (1, 2), (2, 0)):
            F = np.abs(basis.synthesize_on_nodes(Zst, order)) ** 2
            zd += np.einsum("tq,tq,t,q->", W[pw][:-1], F, tw_Z, quad_w)
        zdata_paths[p] = zd

    _map_paths(one_path, K, threads)

    data = float(np.mean(zdata_paths))
    if h_coeffs is not None:
        h = np.asarray(h_coeffs, dtype=complex)
        F = np.abs(basis.synthesize_on_nodes(h, 0)) ** 2
        data += float(np.einsum("tq,q,t,q->", W[0], F, time_w, quad_w))
    lhs = float(np.mean(lhs_paths))
    rhs = float(np.mean(obs_paths)) + data
    return {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf),
        "observation_term": float(np.mean(obs_paths)),
        "data_term": data,
        "lam": weight.lam,
        "observation": "boundary-backward",
    }


# plain-norm observability reports ------------------------------------------

def _time_l2_sq(series_sq: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid int |series|^2 dt per path for (K, nt+1) squared series."""
    wt = _trapezoid_weights(series_sq.shape[1], dt)
    return series_sq @ wt


def interior_observability(basis: SpectralBasis, traj: Trajectory, y0,
                           f_coeffs=None, g_coeffs=None,
                           window: tuple[float, float] = (0.3, 0.7)) -> dict:
    """||y0||_X3 against window observations of y and y_xxx plus data norms."""
    mask = (basis.quad.nodes > window[0]) & (basis.quad.nodes < window[1])
    qw = basis.quad.weights[mask]
    K = traj.n_paths
    obs0 = np.empty(K)
    obs3 = np.empty(K)
    tw = _trapezoid_weights(traj.times.size, traj.dt)
    for p in range(K):
        F0 = np.abs(basis.synthesize_on_nodes(traj.states[p], 0)[:, mask]) ** 2
        F3 = np.abs(basis.synthesize_on_nodes(traj.states[p], 3)[:, mask]) ** 2
        obs0[p] = np.sum(tw * (F0 @ qw))
        obs3[p] = np.sum(tw * (F3 @ qw))
    observation = np.sqrt(np.mean(obs0)) + np.sqrt(np.mean(obs3))
    return _observability_dict(basis, traj.times[-1], y0, observation,
                               f_coeffs, g_coeffs)


def boundary_observability(basis: SpectralBasis, traj: Trajectory, y0,
                           f_coeffs=None, g_coeffs=None) -> dict:
    """||y0||_X3 against the x=0 traces y_xx, y_xxx plus data norms."""
    tr_xx = basis.trace_vector(0, 2)
    tr_xxx = basis.trace_vector(0, 3)
    sq_xx = np.abs(traj.states @ tr_xx) ** 2
    sq_xxx = np.abs(traj.states @ tr_xxx) ** 2
    observation = (np.sqrt(np.mean(_time_l2_sq(sq_xx, traj.dt)))
                   + np.sqrt(np.mean(_time_l2_sq(sq_xxx, traj.dt))))
    return _observability_dict(basis, traj.times[-1], y0, observation,
                               f_coeffs, g_coeffs)


def dual_observability(basis: SpectralBasis, bwd: BackwardSolution) -> dict:
    """E||z_T||_X3 against the x=0 traces of z plus the X3 norm of Z."""
    tr_xx = basis.trace_vector(0, 2)
    tr_xxx = basis.trace_vector(0, 3)
    sq_xx = np.abs(bwd.z_states @ tr_xx) ** 2
    sq_xxx = np.abs(bwd.z_states @ tr_xxx) ** 2
    obs = (np.sqrt(np.mean(_time_l2_sq(sq_xx, bwd.dt)))
           + np.sqrt(np.mean(_time_l2_sq(sq_xxx, bwd.dt))))
    w3 = (1.0 + basis.lam) ** 1.5
    Z_sq = np.sum(w3 * np.abs(bwd.Z_states) ** 2, axis=-1)      # (K, nt)
    z_norm = np.sqrt(np.mean(np.sum(Z_sq, axis=1) * bwd.dt))
    lhs = float(np.sqrt(np.mean(
        np.sum(w3 * np.abs(bwd.z_states[:, -1, :]) ** 2, axis=-1))))
    rhs = obs + z_norm
    return {
        "lhs": lhs,
        "rhs": float(rhs),
        "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf),
        "observation_term": float(obs),
        "violation": bool(rhs <= 1e-14 and lhs > 1e-14),
    }


def _observability_dict(basis, T, y0, observation, f_coeffs, g_coeffs) -> dict:
    lhs = basis.xs_norm(np.asarray(y0, dtype=complex), 3.0)
    data = 0.0
    for src in (f_coeffs, g_coeffs):
        if src is not None:
            data += basis.xs_norm(np.asarray(src, dtype=complex), 3.0) * np.sqrt(T)
    rhs = observation + data
    return {
        "lhs": float(lhs),
        "rhs": float(rhs),
        "ratio": float(lhs / rhs) if rhs > 0 else (0.0 if lhs == 0 else np.inf),
        "observation_term": float(observation),
        "data_term": float(data),
        "violation": bool(rhs <= 1e-14 and lhs > 1e-14),
    }
