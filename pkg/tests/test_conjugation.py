import numpy as np

from beamlab.conjugation import (coefficient_jets, conjugated_coefficients,
                                 recombination_residuals)
from beamlab.weights import (HatWeightSpec, SyntheticWeight, TildeWeightSpec,
                             build_weight)


def test_constant_in_x_weight():
    # l = q(t) only: every spatial coefficient collapses, A0 = D0 = -i l_t
    w = SyntheticWeight([([1.0], [0.2, 0.7, -0.3])])
    ev = w.eval(np.linspace(0, 1, 5), 0.3)
    b = conjugated_coefficients(ev)
    for arr in (b.A1, b.A2, b.A3, b.C0, b.C1, b.B1, b.B2):
        assert np.max(np.abs(arr)) == 0.0
    assert np.allclose(b.A0, -1j * ev.lt)
    assert np.allclose(b.D0, -1j * ev.lt)


def test_c3_definition_chain():
    w = build_weight(HatWeightSpec(lam=3.0, mu=1.2, T=1.0))
    x = np.linspace(0.05, 0.95, 33)
    ev = w.eval(x, 0.4)
    b = conjugated_coefficients(ev)
    # C3 = -4 l_x = -4 lam d_x a
    da = w.l_jets(x, 0.4, 1)[1] / w.lam
    assert np.max(np.abs(b.C3 - (-4.0 * w.lam * da))) < 1e-12 * np.max(np.abs(b.C3))


def test_recombination_on_synthetic_weight(rng):
    coeffs = rng.standard_normal(6)
    w = SyntheticWeight([(coeffs.tolist(), [0.5, 0.4, -0.2])])
    ev = w.eval(np.linspace(0, 1, 200), 0.6)
    res = recombination_residuals(ev)
    for name, value in res.items():
        assert value <= 1e-12, name


def test_recombination_production_weights(rng):
    for trial in range(6):
        lam = float(rng.uniform(0.5, 6.0))
        mu = float(rng.uniform(0.4, 2.0))
        spec = (HatWeightSpec(lam=lam, mu=mu, T=1.0) if trial % 2 == 0
                else TildeWeightSpec(lam=lam, mu=mu, T=1.0))
        w = build_weight(spec)
        xs = rng.uniform(0.0, 1.0, 300)
        ev = w.eval(xs, float(rng.uniform(0.05, 0.95)))
        for name, value in recombination_residuals(ev).items():
            assert value <= 1e-12, (name, spec)


def test_coefficient_jets_match_pointwise_bundle():
    w = build_weight(TildeWeightSpec(lam=2.0, mu=0.8, T=1.0))
    x = np.linspace(0.1, 0.9, 17)
    t = 0.45
    cj = coefficient_jets(w, x, t, order=4)
    ev = w.eval(x, t)
    b = conjugated_coefficients(ev)
    assert np.allclose(cj["B0"][0], b.B0)
    assert np.allclose(cj["C1"][0], b.C1)
    assert np.allclose(cj["C3"][0], b.C3)
    assert np.allclose(cj["D0"], b.D0)
    # jet derivative of C3 equals -4 l_xx
    assert np.allclose(np.real(cj["C3"][1]), -4.0 * ev.lxx)
    # P = C1 - B2x + C3xx with B2x = -6 l_xxx, C3xx = -4 l_xxx
    assert np.allclose(np.real(cj["P"]), b.C1 + 6.0 * ev.lxxx - 4.0 * ev.lxxx)


def test_coefficient_jets_spatial_derivative_by_fd():
    w = SyntheticWeight([([0.3, 1.0, -0.7, 0.2], [1.0, 0.5])])
    x = np.linspace(0.2, 0.8, 9)
    h = 1e-6
    cj = coefficient_jets(w, x, 0.3, order=2)
    fd = (coefficient_jets(w, x + h, 0.3, 0)["B0"][0]
          - coefficient_jets(w, x - h, 0.3, 0)["B0"][0]) / (2 * h)
    assert np.max(np.abs(fd - cj["B0"][1])) < 1e-6 * max(1.0, np.max(np.abs(cj["B0"][1])))
