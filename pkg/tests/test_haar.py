import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from haarvol.drivers import DyadicGrid, GaussianPath, RngStreams, generate_brownian, sample_brownian
from haarvol.haar import (
    HaarTransformer,
    eval_psi,
    eval_scaling,
    scaling_coeffs,
    wavelet_coeffs,
)
from haarvol.regularity import lambda_bound_statistic

SQRT2 = np.sqrt(2.0)


def small_path():
    return GaussianPath(DyadicGrid(1), [0.0, 0.3, 0.1], "bm", 0.5)


def test_eval_psi_examples():
    assert eval_psi((0, 0), 0.25) == 1.0
    assert eval_psi((1, 1), 0.625) == pytest.approx(SQRT2)
    assert eval_psi((2, 0), 0.9) == 0.0
    assert eval_psi((0, 0), 1.0) == 0.0
    assert eval_psi((0, 0), 0.5) == -1.0


def test_eval_psi_errors():
    with pytest.raises(ValueError):
        eval_psi((0, 0), 1.5)
    with pytest.raises(ValueError):
        eval_psi((1, 2), 0.5)


def test_eval_scaling_examples():
    assert eval_scaling(1, 0, 0.25) == pytest.approx(SQRT2)
    assert eval_scaling(0, 0, 1.0) == 0.0
    with pytest.raises(ValueError):
        eval_scaling(1, 2, 0.5)


def midpoint_inner(f, g, level):
    s = (np.arange(2 ** level) + 0.5) / 2 ** level
    return np.sum(f(s) * g(s)) / 2 ** level


@pytest.mark.parametrize("J,l", [(0, 0), (1, 1), (3, 5), (5, 17)])
def test_scaling_normalized(J, l):
    f = lambda s: eval_scaling(J, l, s)
    assert midpoint_inner(f, f, J + 6) == pytest.approx(1.0, abs=1e-10)


def test_orthonormality():
    funcs = [lambda s: eval_scaling(0, 0, s)]
    for j in range(4):
        for k in range(2 ** j):
            funcs.append(lambda s, j=j, k=k: eval_psi((j, k), s))
    level = 3 + 6
    G = np.array([[midpoint_inner(f, g, level) for g in funcs] for f in funcs])
    np.testing.assert_allclose(G, np.eye(len(funcs)), atol=1e-10)


def test_wavelet_coeffs_example():
    c = wavelet_coeffs(small_path(), 0)
    assert c.delta00 == pytest.approx(0.1)
    assert c.lambdas[0][0] == pytest.approx(0.5)


def test_scaling_coeffs_example():
    d = scaling_coeffs(small_path(), 1)
    np.testing.assert_allclose(d, [0.3 * SQRT2, -0.2 * SQRT2])
    assert (d[0] + d[1]) / SQRT2 == pytest.approx(0.1)
    assert scaling_coeffs(small_path(), 0)[0] == pytest.approx(0.1)


def test_zero_path():
    W = GaussianPath(DyadicGrid(6), np.zeros(65), "bm", 0.5)
    c = wavelet_coeffs(W, 5)
    assert c.delta00 == 0 and all(np.all(lam == 0) for lam in c.lambdas)
    assert np.all(lambda_bound_statistic(c) == 0)


def test_insufficient_resolution():
    W = generate_brownian(4, 0)
    with pytest.raises(ValueError, match="level >= 5"):
        wavelet_coeffs(W, 4)
    with pytest.raises(ValueError, match="level >= 5"):
        scaling_coeffs(W, 5)


@settings(max_examples=30, deadline=None)
@given(values=arrays(np.float64, 2 ** 7 + 1, elements=st.floats(-10, 10)))
def test_refinement_identity(values):
    W = GaussianPath(DyadicGrid(7), values, "bm", 0.5)
    c = wavelet_coeffs(W, 5)
    for J in range(6):
        dJ = scaling_coeffs(W, J)
        dJ1 = scaling_coeffs(W, J + 1)
        np.testing.assert_allclose(dJ, (dJ1[0::2] + dJ1[1::2]) / SQRT2, atol=1e-12 * 2 ** (J / 2) * 20)
        np.testing.assert_allclose(c.lambdas[J], (dJ1[0::2] - dJ1[1::2]) / SQRT2,
                                   atol=1e-12 * 2 ** (J / 2) * 20)


def test_refinement_identity_on_brownian():
    W = generate_brownian(12, RngStreams(1).stream_W)
    c = wavelet_coeffs(W, 10)
    for J in range(11):
        dJ1 = scaling_coeffs(W, J + 1)
        assert np.abs(scaling_coeffs(W, J) - (dJ1[0::2] + dJ1[1::2]) / SQRT2).max() <= 1e-12
        assert np.abs(c.lambdas[J] - (dJ1[0::2] - dJ1[1::2]) / SQRT2).max() <= 1e-12


def test_lambda_matches_stochastic_integral_form():
    # lambda = sum over fine increments of psi(left point) * dW
    W = generate_brownian(8, 3)
    c = wavelet_coeffs(W, 4)
    s = W.grid.points[:-1]
    dW = np.diff(W.values)
    for j in range(5):
        for k in range(2 ** j):
            assert c.lambdas[j][k] == pytest.approx(np.sum(eval_psi((j, k), s) * dW), abs=1e-12)


def test_lambda_variance():
    W = sample_brownian(6, np.random.default_rng(0), size=10_000)
    C = HaarTransformer(J_max=4).fit_transform(W)
    var = C.var(axis=0)
    assert np.all((var > 0.95) & (var < 1.05))


def test_level_statistic_bounded():
    hits = 0
    for seed in range(50):
        W = generate_brownian(13, RngStreams(seed).stream_W)
        M = lambda_bound_statistic(wavelet_coeffs(W, 12))
        hits += M.max() <= 2.5
    assert hits >= 49


class TestHaarTransformer:
    def test_roundtrip(self):
        W = sample_brownian(9, np.random.default_rng(5), size=4)
        tr = HaarTransformer(J_max=5).fit(W)
        C = tr.transform(W)
        assert C.shape == (4, 2 ** 6)
        rec = tr.inverse_transform(C)
        np.testing.assert_allclose(rec, W[:, ::2 ** 3], atol=1e-12)

    def test_matches_functional_api(self):
        W = generate_brownian(7, 2)
        C = HaarTransformer().fit_transform(W.values[None, :])[0]
        np.testing.assert_allclose(C, wavelet_coeffs(W, 6).flat())

    def test_get_params_and_validation(self):
        tr = HaarTransformer(J_max=3)
        assert tr.get_params() == {"J_max": 3}
        with pytest.raises(ValueError):
            tr.fit(np.zeros((2, 9)))  # level 3 < J_max + 1
        tr.fit(np.zeros((2, 17)))
        with pytest.raises(ValueError):
            tr.transform(np.zeros((2, 33)))

    def test_clone(self):
        from sklearn.base import clone

        tr = clone(HaarTransformer(J_max=2))
        assert tr.J_max == 2
