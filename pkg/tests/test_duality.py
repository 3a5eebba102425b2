import numpy as np

from beamlab.backward import (duality_residual, solve_backward_deterministic,
                              solve_backward_regression)
from beamlab.forward import assemble_generator, solve_forward
from beamlab.noise import increments_matrix


def test_zero_data_zero_residual(basis4):
    nst = 64
    gen = assemble_generator(basis4, n_steps=nst)
    fwd = solve_forward(basis4, np.zeros(4, complex), gen, np.zeros((1, nst)), 1.0)
    bwd = solve_backward_deterministic(basis4, np.zeros(4, complex), nst, 1.0)
    rep = duality_residual(basis4, fwd, bwd)
    assert rep["residual"] == 0.0


def test_free_pair_phase_duality(basis8):
    # y0 = z_T = phi_1, no sources: free flows are adjoint
    nst = 256
    e1 = np.zeros(8, complex)
    e1[0] = 1.0
    gen = assemble_generator(basis8, n_steps=nst)
    fwd = solve_forward(basis8, e1, gen, np.zeros((1, nst)), 1.0)
    bwd = solve_backward_deterministic(basis8, e1, nst, 1.0)
    rep = duality_residual(basis8, fwd, bwd)
    assert rep["residual"] <= 1e-6


def test_deterministic_source_duality(basis8, rng):
    nst = 256
    y0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    zT = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    f = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    gen = assemble_generator(basis8, f=f, n_steps=nst)
    fwd = solve_forward(basis8, y0, gen, np.zeros((1, nst)), 1.0)
    bwd = solve_backward_deterministic(basis8, zT, nst, 1.0)
    rep = duality_residual(basis8, fwd, bwd, f_coeffs=f)
    assert rep["residual"] <= 1e-10


def test_intermediate_time_duality(basis8, rng):
    nst = 128
    y0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    zT = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    gen = assemble_generator(basis8, n_steps=nst)
    fwd = solve_forward(basis8, y0, gen, np.zeros((1, nst)), 1.0)
    bwd = solve_backward_deterministic(basis8, zT, nst, 1.0)
    rep = duality_residual(basis8, fwd, bwd, tau_index=nst // 2)
    assert rep["residual"] <= 1e-10


def test_stochastic_duality_small_ensemble(basis4, rng):
    T, nst, K = 1.0, 256, 3000
    y0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    gen = assemble_generator(basis4, f=f, g=g, n_steps=nst)
    inc = increments_matrix(seed=31, n_paths=K, n_steps=nst, T=T)
    fwd = solve_forward(basis4, y0, gen, inc, T)
    zc = rng.standard_normal(4) + 1j * rng.standard_normal(4)

    def zT_fn(w):
        return zc[None, :] * (1.0 + (0.5 - 0.2j) * w[:, -1][:, None])

    bwd = solve_backward_regression(basis4, zT_fn, inc, T)
    rep = duality_residual(basis4, fwd, bwd, f_coeffs=f, g_coeffs=g)
    assert rep["residual"] <= 3.0 * rep["stderr"]


def test_full_coefficient_duality(basis4, rng):
    # potentials and multiplicative noise active on both sides: the adjoint
    # backward step keeps the identity inside Monte-Carlo error even though
    # lam_4 dt >> 1
    T, nst, K = 1.0, 256, 4000
    a_field = 0.3 * np.cos(np.pi * basis4.quad.nodes)
    b_field = 0.4 * np.sin(np.pi * basis4.quad.nodes)
    y0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    zc = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    gen = assemble_generator(basis4, a=a_field, b=b_field, f=f, g=g, n_steps=nst)
    inc = increments_matrix(seed=77, n_paths=K, n_steps=nst, T=T)
    fwd = solve_forward(basis4, y0, gen, inc, T)

    def zT_fn(w):
        return zc[None, :] * (1.0 + (0.6 + 0.2j) * w[:, -1][:, None])

    bwd = solve_backward_regression(basis4, zT_fn, inc, T, a=a_field,
                                    b=b_field, variant="dual")
    rep = duality_residual(basis4, fwd, bwd, f_coeffs=f, g_coeffs=g)
    assert rep["residual"] <= 3.0 * rep["stderr"]


def test_grid_mismatch_raises(basis4):
    import pytest
    gen = assemble_generator(basis4, n_steps=32)
    fwd = solve_forward(basis4, np.zeros(4, complex), gen, np.zeros((1, 32)), 1.0)
    bwd = solve_backward_deterministic(basis4, np.zeros(4, complex), 64, 1.0)
    with pytest.raises(ValueError):
        duality_residual(basis4, fwd, bwd)
