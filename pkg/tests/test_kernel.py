import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haarvol.drivers import DyadicGrid, GaussianPath, RngStreams, generate_fbm
from haarvol.haar import eval_psi
from haarvol.kernel import (
    VolatilityFunction,
    antiderivative,
    coeff_a,
    coeff_b,
    coeff_b00,
    preset_phi,
    riemann_b_hat,
)
from haarvol.regularity import fit_rate


def path_from(f, level):
    t = DyadicGrid(level).points
    return GaussianPath(DyadicGrid(level), f(t), "bm", 0.5)


identity = preset_phi("custom_poly", coeffs=[0.0, 1.0])


def test_affine_preset():
    phi = preset_phi("affine_paper")
    assert phi(2.0) == 1.5
    assert phi.deriv(2.0) == 0.5
    assert (phi.bound_c, phi.bound_L) == (1.0, 1.0)


def test_sine_preset():
    phi = preset_phi("sine_paper")
    assert phi(np.pi / 2) == pytest.approx(1.0)
    assert phi.deriv(0.0) == 1.0
    assert (phi.bound_c, phi.bound_L) == (2.0, 0.0)


def test_constant_preset():
    phi = preset_phi("constant_one")
    x = np.linspace(-3, 3, 7)
    assert np.all(phi(x) == 1.0) and np.all(phi.deriv(x) == 0.0)


def test_custom_poly_and_unknown():
    phi = preset_phi("custom_poly", coeffs=[1.0, -2.0, 0.5])
    assert phi(2.0) == pytest.approx(-1.0)
    assert phi.deriv(2.0) == pytest.approx(0.0)
    with pytest.raises(ValueError, match="unknown"):
        preset_phi("cosine")


def test_spot_check_rejects_bad_bound():
    bad = VolatilityFunction(np.exp, np.exp, bound_c=10.0, bound_L=2.0, name="exp")
    with pytest.raises(ValueError, match="exceeds"):
        bad.spot_check()


def test_spot_check_rejects_bad_derivative():
    bad = VolatilityFunction(np.sin, np.sin, bound_c=2.0, bound_L=0.0, name="wrong")
    with pytest.raises(ValueError, match="finite difference"):
        bad.spot_check()


def test_antiderivative_constant_one():
    X = generate_fbm(0.8, 10, 0)
    A = antiderivative(X, preset_phi("constant_one"))
    assert np.array_equal(A.values, np.arange(1025) / 1024)


def test_antiderivative_constant_path():
    X = path_from(lambda t: np.full_like(t, 0.7), 6)
    A = antiderivative(X, identity)
    np.testing.assert_allclose(A.values, 0.7 * np.arange(65) / 64, rtol=1e-14)


def test_antiderivative_linear_path():
    A = antiderivative(path_from(lambda t: t, 12), identity)
    assert A.values[0] == 0.0
    assert abs(A.values[-1] - 0.5) <= 2 ** -12


def test_coeff_a_zero_at_left_endpoint():
    A = antiderivative(generate_fbm(0.8, 10, 1), preset_phi("sine_paper"))
    for j, k in [(0, 0), (2, 3), (5, 17)]:
        assert coeff_a(j, k, k / 2 ** j, A) == 0.0


def test_coeff_a_constant_phi_vanishes_after_support():
    A = antiderivative(generate_fbm(0.8, 10, 1), preset_phi("constant_one"))
    for j, k in [(0, 0), (3, 2), (6, 40)]:
        for t in [(k + 1) / 2 ** j, 1.0]:
            assert coeff_a(j, k, t, A) == 0.0


def test_coeff_a_linear_path():
    A = antiderivative(path_from(lambda t: t, 12), identity)
    assert coeff_a(0, 0, 1.0, A) == pytest.approx(-0.25, abs=1e-3)


def test_coeff_a_off_grid():
    A = antiderivative(generate_fbm(0.8, 4, 1), identity)
    with pytest.raises(ValueError, match="level >= 6"):
        coeff_a(5, 0, 1.0, A)


def test_coeff_b_examples():
    A1 = antiderivative(generate_fbm(0.8, 10, 1), preset_phi("constant_one"))
    J = 3
    for l in range(2 ** J):
        for m in range(l + 1, 2 ** J + 1):
            assert coeff_b(J, l, m / 2 ** J, A1) == 2 ** (-J / 2)
        assert coeff_b(J, l, l / 2 ** J, A1) == 0.0
    A = antiderivative(path_from(lambda t: t, 12), identity)
    assert coeff_b(1, 0, 1.0, A) == pytest.approx(np.sqrt(2) / 8, abs=1e-3)


def test_b00_is_antiderivative():
    A = antiderivative(generate_fbm(0.8, 8, 2), preset_phi("sine_paper"))
    t = DyadicGrid(8).points
    np.testing.assert_array_equal(coeff_b00(t, A), A.values)


def test_b_hat_examples():
    J = 4
    X = generate_fbm(0.8, 2 * J, 5)
    np.testing.assert_array_equal(riemann_b_hat(J, X, preset_phi("constant_one")), np.full(16, 2 ** (-J / 2)))
    zero = preset_phi("custom_poly", coeffs=[0.0])
    assert np.all(riemann_b_hat(J, X, zero) == 0.0)
    with pytest.raises(ValueError, match="level 8"):
        riemann_b_hat(J, generate_fbm(0.8, 7, 5), zero)


def test_b_hat_agrees_with_coeff_b():
    J = 6
    X = generate_fbm(0.8, 2 * J, RngStreams(3).stream_X)
    phi = preset_phi("sine_paper")
    A = antiderivative(X, phi)
    l = np.arange(2 ** J)
    exact = coeff_b(J, l, (l + 1) / 2 ** J, A)
    assert np.abs(riemann_b_hat(J, X, phi) - exact).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(j=st.integers(0, 7), data=st.data())
def test_zero_support_and_saturation(j, data):
    A = antiderivative(generate_fbm(0.7, 9, 4), preset_phi("affine_paper"))
    k = data.draw(st.integers(0, 2 ** j - 1))
    m = data.draw(st.integers(0, 2 ** 9))
    t = m / 2 ** 9
    val = coeff_a(j, k, t, A)
    if t <= k / 2 ** j:
        assert val == 0.0
    if t >= (k + 1) / 2 ** j:
        assert val == coeff_a(j, k, 1.0, A)


def test_b_lipschitz_in_t():
    X = generate_fbm(0.8, 10, 6)
    phi = preset_phi("sine_paper")
    A = antiderivative(X, phi)
    C = np.abs(phi(X.values)).max()
    t = DyadicGrid(10).points
    for J, l in [(2, 1), (4, 9), (5, 0)]:
        b = coeff_b(J, l, t, A)
        diff = np.abs(b[:, None] - b[None, :])
        bound = C * 2 ** (J / 2) * np.abs(t[:, None] - t[None, :])
        assert np.all(diff <= bound + 1e-15)


def test_coefficient_decay_fbm():
    X = generate_fbm(0.8, 16, RngStreams(0).stream_X)
    A = antiderivative(X, preset_phi("sine_paper"))
    js = np.arange(2, 11)
    maxes = [np.abs(coeff_a(j, np.arange(2 ** j), 1.0, A)).max() for j in js]
    slope = np.polyfit(js, np.log2(maxes), 1)[0]
    assert slope <= -(X.alpha + 0.5) + 0.15


@pytest.mark.parametrize("j,k,t", [(0, 0, 1.0), (1, 1, 0.8125), (2, 1, 0.3), (3, 5, 0.7)])
def test_quadrature_consistency(j, k, t):
    J = 5
    level = 2 * J
    f = lambda s: np.sin(3 * s) + s
    phi = preset_phi("sine_paper")
    X = path_from(f, level)
    A = antiderivative(X, phi)
    h = 2.0 ** -level
    mids = (np.arange(2 ** level) + 0.5) * h
    quad = np.sum(phi(f(mids)) * (mids <= t) * eval_psi((j, k), mids)) * h
    assert abs(coeff_a(j, k, t, A) - quad) <= 2.0 ** (-level + 2) * np.abs(phi(X.values)).max()


def test_rate_helper_on_exact_sequence():
    J = np.arange(3, 11)
    fit = fit_rate(J, 2.0 ** (-0.37 * J) * np.sqrt(1 + J))
    assert fit.slope == pytest.approx(-0.37, abs=1e-6)
