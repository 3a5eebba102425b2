import numpy as np
import pytest

from beamlab.forward import (assemble_generator, coupling_matrix, energy_report,
                             hidden_regularity_report, solve_forward)
from beamlab.noise import increments_matrix


def unit(n, k=1):
    out = np.zeros(n, dtype=complex)
    out[k - 1] = 1.0
    return out


def test_generator_free_case(basis8):
    gen = assemble_generator(basis8)
    target = 1j * np.diag(basis8.lam)
    assert np.max(np.abs(gen.A - target)) <= 1e-8
    assert np.max(np.abs(gen.B)) == 0.0


def test_generator_constant_potentials(basis8):
    gen = assemble_generator(basis8, a=1.0, b=1.0)
    expected_a = -1j * np.eye(8) + 1j * np.diag(basis8.lam)
    assert np.max(np.abs(gen.A - expected_a)) <= 1e-8
    assert np.max(np.abs(gen.B + 1j * np.eye(8))) <= 1e-8


def test_generator_source_projection(basis8):
    phi1 = basis8.tables[0][:, 0]
    gen = assemble_generator(basis8, f=phi1, n_steps=4)
    assert gen.u.shape == (4, 8)
    assert abs(gen.u[0, 0] + 1j) < 1e-8           # u_k = -i (f, phi_k)
    assert np.max(np.abs(gen.u[0, 1:])) < 1e-8


def test_free_flow_phase_rotation(basis8):
    gen = assemble_generator(basis8)
    y0 = unit(8)
    traj = solve_forward(basis8, y0, gen, np.zeros((1, 1024)), T=1.0)
    assert np.max(np.abs(np.abs(traj.states[0, :, 0]) - 1.0)) <= 1e-10
    assert np.max(np.abs(traj.states[0, :, 1:])) == 0.0


def test_zero_data_zero_trajectory(basis8):
    gen = assemble_generator(basis8)
    inc = increments_matrix(seed=1, n_paths=3, n_steps=64, T=1.0)
    traj = solve_forward(basis8, np.zeros(8, complex), gen, inc, T=1.0)
    assert np.max(np.abs(traj.states)) == 0.0


def test_linearity_in_data(basis8, rng):
    nst = 128
    inc = increments_matrix(seed=2, n_paths=1, n_steps=nst, T=1.0)
    y0a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    y0b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    f = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    b_field = 0.3 * np.sin(np.pi * basis8.quad.nodes)
    gen_f = assemble_generator(basis8, b=b_field, f=f, n_steps=nst)
    gen_0 = assemble_generator(basis8, b=b_field, n_steps=nst)
    ta = solve_forward(basis8, y0a, gen_f, inc, 1.0)
    tb = solve_forward(basis8, y0b, gen_0, inc, 1.0)
    tsum = solve_forward(basis8, y0a + 2.0 * y0b, gen_f, inc, 1.0)
    combo = ta.states + 2.0 * tb.states
    scale = np.max(np.abs(combo))
    assert np.max(np.abs(tsum.states - combo)) <= 1e-10 * scale


def test_adaptedness_under_truncated_path(basis4):
    nst = 64
    inc = increments_matrix(seed=3, n_paths=1, n_steps=nst, T=1.0)
    g = unit(4)
    gen = assemble_generator(basis4, b=0.5, g=g, n_steps=nst)
    full = solve_forward(basis4, unit(4), gen, inc, 1.0)
    cut = 40
    inc_cut = inc.copy()
    inc_cut[:, cut:] = 0.0
    trunc = solve_forward(basis4, unit(4), gen, inc_cut, 1.0)
    assert np.array_equal(full.states[:, :cut + 1], trunc.states[:, :cut + 1])


def test_ito_forcing_small_ensemble(basis4):
    # E|c_1(t)|^2 grows like t under g = phi_1 forcing
    T, nst, K = 1.0, 256, 4000
    gen = assemble_generator(basis4, g=unit(4), n_steps=nst)
    inc = increments_matrix(seed=4, n_paths=K, n_steps=nst, T=T)
    traj = solve_forward(basis4, unit(4), gen, inc, T, store="terminal")
    growth = np.mean(np.abs(traj.states[:, 1, 0]) ** 2) - 1.0
    assert abs(growth - T) / T < 0.1


def test_strong_convergence_rate_additive_noise(basis4):
    # closed form: c(T) = e^{i lam T} c0 - i int e^{i lam (T-s)} dw(s)
    T = 1.0 / 64.0
    lam = basis4.lam[0]
    K = 3000
    errs = []
    steps = [128, 256, 512, 1024]
    inc_fine = increments_matrix(seed=6, n_paths=K, n_steps=steps[-1], T=T)
    gen = assemble_generator(basis4, g=unit(4), n_steps=steps[-1])
    dt_f = T / steps[-1]
    s = (np.arange(steps[-1]) + 0.5) * dt_f
    kernel = np.exp(1j * lam * (T - s))
    exact = np.exp(1j * lam * T) - 1j * np.sum(inc_fine * kernel, axis=1)
    for nst in steps:
        inc = inc_fine.reshape(K, nst, -1).sum(axis=2)
        traj = solve_forward(basis4, unit(4), gen, inc, T, store="terminal")
        err = np.sqrt(np.mean(np.abs(traj.states[:, 1, 0] - exact) ** 2))
        errs.append(err)
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(rates) >= 0.45


def test_euler_maruyama_scheme_runs(basis4):
    # EM needs lam*dt small to stay stable; tiny horizon, single mode content
    T, nst = 1e-4, 64
    gen = assemble_generator(basis4, g=unit(4), n_steps=nst)
    inc = increments_matrix(seed=8, n_paths=2, n_steps=nst, T=T)
    traj = solve_forward(basis4, unit(4), gen, inc, T, scheme="euler_maruyama")
    assert np.all(np.isfinite(traj.states))
    with pytest.raises(ValueError):
        solve_forward(basis4, unit(4), gen, inc, T, scheme="nope")


def test_multiplicative_noise_second_moment(basis4):
    # b = const: d|c|^2 = b^2 |c|^2 dt in expectation, and the scheme obeys
    # E|c^{n+1}|^2 = (1 + b^2 dt) E|c^n|^2 exactly
    T, nst, K, bconst = 1.0, 256, 4000, 0.5
    gen = assemble_generator(basis4, b=bconst, n_steps=nst)
    inc = increments_matrix(seed=13, n_paths=K, n_steps=nst, T=T)
    traj = solve_forward(basis4, unit(4), gen, inc, T, store="terminal")
    msq = np.abs(traj.states[:, 1, 0]) ** 2
    oracle = (1.0 + bconst**2 * T / nst) ** nst
    se = np.std(msq) / np.sqrt(K)
    assert abs(np.mean(msq) - oracle) <= 3.0 * se
    assert abs(oracle - np.exp(bconst**2 * T)) < 1e-3   # consistent with Ito


def test_energy_report_free_flow(basis8, rng):
    gen = assemble_generator(basis8)
    y0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    traj = solve_forward(basis8, y0, gen, np.zeros((1, 256)), 1.0)
    rep = energy_report(basis8, traj, 0.0)
    assert abs(rep["C_empirical"] - 1.0) <= 1e-6


def test_energy_report_linear_growth(basis4):
    T, nst, K = 1.0, 256, 3000
    gen = assemble_generator(basis4, g=unit(4), n_steps=nst)
    inc = increments_matrix(seed=10, n_paths=K, n_steps=nst, T=T)
    traj = solve_forward(basis4, unit(4), gen, inc, T)
    rep = energy_report(basis4, traj, 0.0, g=unit(4))
    e = rep["energy"]
    t = rep["times"]
    # linear in t within a Monte-Carlo band
    mid = nst // 2
    assert abs(e[mid] - (1.0 + t[mid])) < 0.1
    assert abs(e[-1] - (1.0 + T)) < 0.1
    assert rep["C_empirical"] >= 1.0 - 1e-9


def test_hidden_regularity_free_flow(basis8):
    from beamlab.basis import eigenfunction_eval
    gen = assemble_generator(basis8)
    y0 = unit(8)
    T = 1.0
    traj = solve_forward(basis8, y0, gen, np.zeros((1, 512)), T)
    rep = hidden_regularity_report(basis8, traj, y0)
    target = np.sqrt(T) * abs(eigenfunction_eval(basis8.modes[0], 0.0, 2))
    measured = np.sqrt(rep["trace_mean_sq"][(0, 2)])
    assert abs(measured - target) <= 1e-6 * target
    assert rep["C_empirical"] > 0.0


def test_hidden_regularity_zero_data(basis8):
    gen = assemble_generator(basis8)
    traj = solve_forward(basis8, np.zeros(8, complex), gen,
                         np.zeros((1, 64)), 1.0)
    rep = hidden_regularity_report(basis8, traj, np.zeros(8, complex))
    assert rep["trace_norm_sum"] == 0.0


def test_coupling_matrix_symmetry(basis8, rng):
    a = rng.standard_normal(basis8.quad.size)
    M = coupling_matrix(basis8, a)
    assert np.max(np.abs(M - M.T)) < 1e-12
