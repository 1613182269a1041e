import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacelike.ambient import Signature, boost, gram
from spacelike.graph import PolynomialGraph, affine_graph, point_geometry
from spacelike.grassmann import (
    GrassmannPoint,
    aligned_replacement_forms,
    angle_data,
    boosted_pair,
    gauss_map_w,
    grassmann_distance,
    random_double_boost,
    random_lorentz,
    w_double_replacement,
    w_replacement,
)

S11 = Signature(1, 1)
S22 = Signature(2, 2)


def aligned_points(data, sig):
    return GrassmannPoint(data.e, sig), GrassmannPoint(data.a, sig)


def test_equal_planes():
    P = GrassmannPoint.coordinate(S22)
    d = angle_data(P, P)
    np.testing.assert_allclose(d.W, np.eye(2))
    assert np.all(d.thetas == 0) and d.w == 1.0
    assert grassmann_distance(P, P) == 0.0


def test_single_boost():
    th = 0.9
    P = GrassmannPoint(np.array([np.cosh(th), np.sinh(th)]), S11)
    A = GrassmannPoint(np.array([1.0, 0.0]), S11)
    d = angle_data(P, A)
    assert d.w == pytest.approx(np.cosh(0.9), abs=1e-14)
    assert grassmann_distance(P, A) == pytest.approx(0.9, abs=1e-14)
    assert d.lambdas[0] == pytest.approx(np.tanh(0.9))


def test_double_boost():
    P, A = boosted_pair(S22, [0.5, 1.2])
    d = angle_data(P, A)
    np.testing.assert_allclose(d.thetas, [1.2, 0.5], atol=1e-10)
    assert d.w == pytest.approx(np.cosh(0.5) * np.cosh(1.2), abs=1e-10)
    assert grassmann_distance(P, A) == pytest.approx(np.sqrt(0.25 + 1.44), abs=1e-10)


def test_mismatched_planes_rejected():
    with pytest.raises(ValueError):
        angle_data(GrassmannPoint.coordinate(S22), GrassmannPoint.coordinate(Signature(2, 1)))


def test_orientation_flip_recorded():
    A = GrassmannPoint.coordinate(S22)
    P = GrassmannPoint(np.eye(4)[:, [1, 0]], S22)
    d = angle_data(P, A)
    assert d.flipped and d.w == pytest.approx(1.0)


def test_replacement_vanishes_for_equal_planes():
    P = GrassmannPoint.coordinate(S22)
    for i in range(2):
        for a in range(2):
            assert w_replacement(P, P, i, P.normal[:, a]) == pytest.approx(0.0, abs=1e-15)


def test_single_boost_replacement_is_sinh():
    th = 0.7
    P, A = boosted_pair(S11, [th])
    d = angle_data(P, A)
    Pa, Aa = aligned_points(d, S11)
    assert w_replacement(Pa, Aa, 0, d.e_normal[:, 0]) == pytest.approx(np.sinh(th), abs=1e-14)


def test_double_replacement_middle_case():
    P, A = boosted_pair(S22, [0.5, 1.2])
    d = angle_data(P, A)
    Pa, Aa = aligned_points(d, S22)
    val = w_double_replacement(Pa, Aa, 0, d.e_normal[:, 1], 1, d.e_normal[:, 0])
    assert val == pytest.approx(-d.lambdas[0] * d.lambdas[1] * d.w, abs=1e-12)


def test_replacement_index_errors():
    P, A = boosted_pair(S22, [0.5, 1.2])
    nu = P.normal[:, 0]
    with pytest.raises(ValueError):
        w_double_replacement(P, A, 1, nu, 1, nu)
    with pytest.raises(IndexError):
        w_replacement(P, A, 2, nu)


def test_aligned_closed_forms_match_determinants(rng):
    worst = 0.0
    for _ in range(30):
        thetas, P, A = random_double_boost(rng)
        d = angle_data(P, A)
        single, double = aligned_replacement_forms(d)
        Pa, Aa = aligned_points(d, S22)
        for i in range(2):
            for a in range(2):
                worst = max(worst, abs(single[i, a] - w_replacement(Pa, Aa, i, d.e_normal[:, a])))
                for j in range(2):
                    if j == i:
                        continue
                    for b in range(2):
                        v = w_double_replacement(Pa, Aa, i, d.e_normal[:, a], j, d.e_normal[:, b])
                        worst = max(worst, abs(double[i, a, j, b] - v))
    assert worst < 1e-10


def test_gauss_map_flat_and_tilted():
    A = GrassmannPoint.coordinate(Signature(2, 1))
    assert gauss_map_w(affine_graph(Signature(2, 1)), [0.3, 0.2], A)[0] == pytest.approx(1.0)
    lam = 0.6
    w, logw = gauss_map_w(affine_graph(S11, slope=[[lam]]), [0.5], GrassmannPoint.coordinate(S11))
    assert w == pytest.approx(1 / np.sqrt(1 - lam**2), abs=1e-14)
    assert logw == pytest.approx(np.log(w))


def test_gauss_map_is_inverse_volume_density(rng):
    for _ in range(20):
        sig = Signature(int(rng.integers(1, 4)), int(rng.integers(1, 4)))
        G = PolynomialGraph(sig, b=0.2 * rng.normal(size=(sig.m, sig.n)), A=0.3 * rng.normal(size=(sig.m, sig.n, sig.n)))
        x = 0.3 * rng.uniform(-1, 1, size=sig.n)
        w, _ = gauss_map_w(G, x, GrassmannPoint.coordinate(sig))
        assert w == pytest.approx(1 / point_geometry(G, x).sqrt_det_g, abs=1e-10)


@st.composite
def plane_pairs(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    sig = Signature(n, m)
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    P = GrassmannPoint(random_lorentz(sig, rng, 0.7)[:, :n], sig)
    A = GrassmannPoint(random_lorentz(sig, rng, 0.7)[:, :n], sig)
    return sig, P, A, rng


@settings(max_examples=50, deadline=None)
@given(plane_pairs())
def test_angle_invariants(data):
    sig, P, A, _ = data
    d = angle_data(P, A)
    mu = np.sort(np.linalg.eigvalsh(d.W.T @ d.W))[::-1]
    np.testing.assert_allclose(mu, np.cosh(d.thetas) ** 2, rtol=1e-9)
    assert mu[-1] >= 1 - 1e-10
    assert d.w >= 1 - 1e-12
    assert d.w == pytest.approx(np.prod(np.cosh(d.thetas)), rel=1e-10)
    assert np.all(np.diff(d.thetas) <= 1e-12)
    assert np.all((d.lambdas >= 0) & (d.lambdas < 1))
    assert P.gram_residual() < 1e-10


@settings(max_examples=50, deadline=None)
@given(plane_pairs())
def test_distance_symmetric_and_span_only(data):
    sig, P, A, rng = data
    assert grassmann_distance(P, A) == pytest.approx(grassmann_distance(A, P), rel=1e-9, abs=1e-9)
    M = np.eye(sig.n) + 0.2 * rng.normal(size=(sig.n, sig.n))
    same = GrassmannPoint(P.basis @ M, sig)
    assert grassmann_distance(P, same) < 1e-10
