import numpy as np
import pytest

from beamlab.basis import (MAX_MODES, beam_spectrum, characteristic_residual,
                           eigenfunction_eval, gauss_legendre_composite)


def bisect_root(lo, hi, tol=1e-12):
    """Independent oracle: plain bisection on cos(mu)cosh(mu) - 1."""
    f = lambda m: np.cos(m) * np.cosh(m) - 1.0
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        if flo * f(mid) < 0:
            hi = mid
        else:
            lo, flo = mid, f(mid)
    return 0.5 * (lo + hi)


def test_first_two_roots_against_bisection_oracle():
    # raw-characteristic bisection around (k + 1/2) pi; the roots alternate
    # sides of the center, so a symmetric bracket is the safe one
    modes = beam_spectrum(2)
    mu1 = bisect_root(1.5 * np.pi - 0.4, 1.5 * np.pi + 0.4)
    mu2 = bisect_root(2.5 * np.pi - 0.4, 2.5 * np.pi + 0.4)
    assert abs(modes[0].mu - mu1) < 1e-9
    assert abs(modes[1].mu - mu2) < 1e-9
    assert abs(modes[0].mu - 4.7300407449) < 1e-9
    assert abs(modes[1].mu - 7.8532046241) < 1e-9


def test_frequencies_increase_and_char_residual(basis16):
    mus = basis16.mu
    assert np.all(np.diff(mus) > 0)
    for m in basis16.modes:
        assert abs(characteristic_residual(m.mu)) <= 1e-10
        assert m.lam == m.mu ** 4


def test_mode_cap():
    with pytest.raises(ValueError):
        beam_spectrum(MAX_MODES + 1)
    with pytest.raises(ValueError):
        beam_spectrum(0)


def test_clamped_endpoint_values(basis16):
    assert eigenfunction_eval(basis16.modes[0], 0.0, 0) == 0.0
    for m in basis16.modes:
        assert abs(eigenfunction_eval(m, 0.0, 0)) < 1e-13
        assert abs(eigenfunction_eval(m, 0.0, 1)) < 1e-12 * m.mu
        assert abs(eigenfunction_eval(m, 1.0, 0)) < 1e-8
        assert abs(eigenfunction_eval(m, 1.0, 1)) < 1e-7
        assert abs(eigenfunction_eval(m, 0.0, 2)) > 1.0


def test_second_derivative_against_central_differences(basis16):
    m = basis16.modes[0]
    h = 1e-5
    for x in (0.0, 0.31, 0.77):
        fd = (eigenfunction_eval(m, x + h, 0) - 2 * eigenfunction_eval(m, x, 0)
              + eigenfunction_eval(m, max(x - h, 0.0), 0)) / h**2 \
            if x > 0 else \
            (eigenfunction_eval(m, x + 2 * h, 0) - 2 * eigenfunction_eval(m, x + h, 0)
             + eigenfunction_eval(m, x, 0)) / h**2
        an = eigenfunction_eval(m, x if x > 0 else x + h, 2)
        assert abs(fd - an) / max(abs(an), 1.0) < 1e-4


def test_eigenrelation_fourth_derivative(basis16):
    xg = np.linspace(0.0, 1.0, 512)
    for m in basis16.modes:
        p0 = eigenfunction_eval(m, xg, 0)
        p4 = eigenfunction_eval(m, xg, 4)
        assert np.max(np.abs(p4 - m.lam * p0)) / m.lam <= 1e-6


def test_quadrature_weights_and_exactness():
    q = gauss_legendre_composite()
    assert abs(np.sum(q.weights) - 1.0) < 1e-12
    assert np.all(q.weights > 0)
    for deg in (5, 17, 31):
        val = np.sum(q.weights * q.nodes ** deg)
        assert abs(val - 1.0 / (deg + 1)) < 1e-12


def test_gram_matrix_identity(basis16):
    G = basis16.gram_matrix()
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-8
    assert np.max(np.abs(np.diag(G) - 1.0)) <= 1e-8


def test_projection_orthonormality_and_linearity(basis16):
    phi1 = basis16.tables[0][:, 0]
    phi2 = basis16.tables[0][:, 1]
    c = basis16.project(phi1)
    assert abs(c[0] - 1.0) < 1e-8
    assert np.max(np.abs(c[1:])) < 1e-8
    c = basis16.project(2.0 * phi1 + 3j * phi2)
    assert abs(c[0] - 2.0) < 1e-8 and abs(c[1] - 3j) < 1e-8
    assert np.max(np.abs(basis16.project(np.zeros(basis16.quad.size)))) == 0.0
    with pytest.raises(ValueError):
        basis16.project(np.zeros(17))


def test_synthesis_round_trip(basis16, rng):
    coeffs = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    field = basis16.synthesize_on_nodes(coeffs, 0)
    back = basis16.project(field)
    assert np.max(np.abs(back - coeffs)) < 1e-7
    xs = np.linspace(0.1, 0.9, 7)
    direct = sum(coeffs[k] * eigenfunction_eval(basis16.modes[k], xs, 0)
                 for k in range(16))
    assert np.max(np.abs(basis16.synthesize(coeffs, xs, 0) - direct)) < 1e-10


def test_parseval(basis16, rng):
    coeffs = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    field = basis16.synthesize_on_nodes(coeffs, 0)
    l2 = np.sqrt(np.sum(basis16.quad.weights * np.abs(field) ** 2))
    assert abs(l2 - basis16.xs_norm(coeffs, 0.0)) < 1e-7


def test_xs_norm_values_and_monotonicity(basis16, rng):
    e1 = np.zeros(16, complex)
    e1[0] = 1.0
    assert abs(basis16.xs_norm(e1, 0.0) - 1.0) < 1e-14
    # (sum (1+lam)^{s/2} |c|^2)^{1/2} at s=4 on a unit mode is (1+lam_1)
    assert abs(basis16.xs_norm(e1, 4.0) - (1.0 + basis16.modes[0].mu ** 4)) < 1e-9
    assert abs(basis16.xs_norm(e1, 2.0)
               - np.sqrt(1.0 + basis16.modes[0].mu ** 4)) < 1e-10
    for _ in range(25):
        c = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        s1, s2 = sorted(rng.uniform(-4.0, 4.0, 2))
        assert basis16.xs_norm(c, s1) <= basis16.xs_norm(c, s2) * (1 + 1e-12)
    with pytest.raises(ValueError):
        basis16.xs_norm(e1, 5.0)


def test_boundary_traces(basis16, rng):
    zero = np.zeros(16, complex)
    assert basis16.boundary_trace(zero, 0, 2) == 0.0
    e1 = np.zeros(16, complex)
    e1[0] = 1.0
    assert abs(basis16.boundary_trace(e1, 0, 2)
               - eigenfunction_eval(basis16.modes[0], 0.0, 2)) < 1e-12
    # clamped basis: orders 0 and 1 vanish for any state
    c = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    for order in (0, 1):
        for endpoint in (0.0, 1.0):
            val = basis16.synthesize(c, endpoint, order)
            assert abs(val) < 1e-6
    with pytest.raises(ValueError):
        basis16.boundary_trace(e1, 0, 1)


def test_mode_table_csv(basis4):
    text = basis4.mode_table_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "k,mu,lambda,sigma"
    assert len(lines) == 5
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert abs(float(first[1]) - 4.7300407449) < 1e-9
