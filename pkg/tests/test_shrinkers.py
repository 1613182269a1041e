import csv

import numpy as np
import pytest

from spacelike.ambient import Signature
from spacelike.graph import PolynomialGraph, derived_tensors, laplace_z, point_geometry, residual_norm2
from spacelike.drift import interior_samples
from spacelike.shrinkers import (
    WINDOW_SLOPE,
    cylinder_lift,
    graph_taylor,
    integrate_shrinker_curve,
    product_shrinker,
)


def local_quadratic_graph(curve, s):
    """Osculating quadratic graph of the curve at arclength ``s``, built from the dense output only."""
    gam1, gam2, phi = curve(s)
    dphi = curve.dense.derivative()(s)[2]
    p = np.tanh(phi)
    # dp/dx = sech^2(phi) phi'(s) / cosh(phi)
    k = dphi / np.cosh(phi) ** 3
    c = gam2 - p * gam1 + 0.5 * k * gam1**2
    return PolynomialGraph(Signature(1, 1), c=[c], b=[[p - k * gam1]], A=[[[k]]]), gam1


def test_axis_is_a_solution():
    c = integrate_shrinker_curve((0.0, 0.0), 0.0, (-3.0, 3.0), 1e-11)
    assert np.max(np.abs(c.phi)) == 0.0
    assert np.max(np.abs(c.gamma[:, 1])) == 0.0
    assert c.sup_residual2 == 0.0


def test_default_curve_residual_through_graph_geometry():
    c = integrate_shrinker_curve((2.0, 0.0), 0.5, (0.0, 3.0), 1e-11)
    assert c.truncated[1]
    assert c.sup_residual2 < 1e-10
    worst = 0.0
    for s in np.linspace(c.s_min, c.s_max, 40):
        if abs(np.tanh(c(s)[2])) > WINDOW_SLOPE:
            continue
        G, x0 = local_quadratic_graph(c, s)
        worst = max(worst, residual_norm2(G, [x0]))
    assert worst < 1e-10


def test_unit_speed_by_construction(suite):
    c = suite["curve"].base[0]
    d = c.dense.derivative()(c.s)
    speed2 = d[:, 0] ** 2 - d[:, 1] ** 2
    np.testing.assert_allclose(speed2, 1.0, atol=1e-9)


def test_reflection_symmetry():
    # (g1, g2, phi)(s) -> (-g1, g2, -phi)(-s) maps solutions to solutions
    a = integrate_shrinker_curve((2.0, 0.0), 0.5, (-2.0, 1.0), 1e-11)
    b = integrate_shrinker_curve((-2.0, 0.0), -0.5, (-1.0, 2.0), 1e-11)
    s = np.linspace(-0.9, 1.9, 50)
    ya, yb = a(-s), b(s)
    np.testing.assert_allclose(yb[:, 0], -ya[:, 0], atol=1e-9)
    np.testing.assert_allclose(yb[:, 1], ya[:, 1], atol=1e-9)
    np.testing.assert_allclose(yb[:, 2], -ya[:, 2], atol=1e-9)


def test_point_reflection_symmetry():
    # (g1, g2, phi)(s) -> (-g1, -g2, phi)(-s)
    a = integrate_shrinker_curve((2.0, 0.0), 0.5, (-2.0, 1.0), 1e-11)
    b = integrate_shrinker_curve((-2.0, 0.0), 0.5, (-1.0, 2.0), 1e-11)
    s = np.linspace(-0.9, 1.9, 50)
    np.testing.assert_allclose(b(s), a(-s) * np.array([-1, -1, 1]), atol=1e-9)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        integrate_shrinker_curve(tol=1e-15)
    with pytest.raises(ValueError):
        integrate_shrinker_curve(s_range=(0.0, np.inf))


def test_window_and_graph_chart(suite):
    c = suite["curve"].base[0]
    a, b = c.window()
    s = np.linspace(a, b, 200)
    assert np.all(np.abs(np.tanh(c(s)[:, 2])) <= WINDOW_SLOPE + 1e-12)
    lo, hi = c.x_window()
    assert lo < 0 < hi
    z_s, z_min = c.z_minimum()
    assert a < z_s < b and z_min < 0


def test_taylor_model_matches_dense_output(suite):
    G = suite["curve"].graph
    loc = G.localized([0.7])
    x = np.linspace(0.6, 0.8, 9)
    f_dense, p_dense = G.point_data(x)
    f_loc, p_loc = loc.point_data(x)
    np.testing.assert_allclose(f_loc, f_dense, atol=1e-9)
    np.testing.assert_allclose(p_loc, p_dense, atol=1e-9)


def test_graph_taylor_solves_graph_ode():
    coef = graph_taylor(0.3, 0.1, 0.2, order=18)
    P = np.polynomial.polynomial
    t = np.linspace(-0.05, 0.05, 11)
    f = P.polyval(t, coef)
    p = P.polyval(t, P.polyder(coef))
    q = P.polyval(t, P.polyder(coef, 2))
    np.testing.assert_allclose(q, 0.5 * (1 - p**2) * ((0.3 + t) * p - f), atol=1e-13)


def test_csv_export(tmp_path, suite):
    c = suite["curve"].base[0]
    path = tmp_path / "curve.csv"
    c.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["s", "gamma1", "gamma2", "phi", "residual2"]
    assert len(rows) == c.s.size + 1
    assert float(rows[1][0]) == c.s[0]


def test_lift_of_axis_is_flat():
    axis = integrate_shrinker_curve((0.0, 0.0), 0.0, (-3.0, 3.0), 1e-11)
    lift = cylinder_lift(axis, 1)
    geo = point_geometry(lift.graph, [0.5, 1.0])
    assert np.all(geo.h == 0) and residual_norm2(lift.graph, [0.5, 1.0]) == 0.0
    prod = product_shrinker(axis, axis)
    d = derived_tensors(prod.graph, [0.3, -0.4])
    assert d.normB2 == 0.0 and d.normH2 == 0.0


def test_cylinder_lift_rejects_bad_k(suite):
    with pytest.raises(ValueError):
        cylinder_lift(suite["curve"].base[0], 0)


def test_lifts_inherit_residual(suite, rng):
    for name in ("cylinder", "product"):
        sh = suite[name]
        for x in interior_samples(sh.graph, 20, rng):
            assert residual_norm2(sh.graph, x) < 1e-9
            # the lift is a sum of the factor residuals
            base = sum(residual_norm2(fac, [x[i]]) for fac, i in zip(sh.graph.factors, sh.graph.coords))
            assert residual_norm2(sh.graph, x) <= base + 1e-24


def test_cylinder_laplace_z(suite, rng):
    G = suite["cylinder"].graph
    for x in interior_samples(G, 10, rng):
        general, shrinker = laplace_z(G, x)
        assert general == pytest.approx(4 + point_geometry(G, x).Y2, abs=1e-9)


def test_product_blocks_do_not_mix(suite, rng):
    G = suite["product"].graph
    for x in interior_samples(G, 10, rng):
        d = derived_tensors(G, x)
        assert abs(d.S[0, 1]) < 1e-14
        assert d.Rperp2 < 1e-28


def test_mean_curvature_gradient_on_all_suite_points(suite, rng):
    for name, sh in suite.items():
        for x in interior_samples(sh.graph, 10, rng):
            loc = sh.graph.localized(x)
            geo = point_geometry(loc, x, order=3)
            d = derived_tensors(loc, x, geo)
            rhs = 0.5 * np.einsum("j,aij->ai", geo.xcomp, geo.h)
            np.testing.assert_allclose(d.nablaH, rhs, atol=1e-8)


def _sup_defect2(tol):
    c = integrate_shrinker_curve(tol=tol)
    s = np.linspace(c.s_min, c.s_max, 20001)
    return float(c.defect2(s).max())


@pytest.mark.xfail(strict=True, reason="DOP853 defect scales like tol^(7/8); squared residual improves ~3.4x per halving")
def test_halving_tolerance_gives_fourfold_residual_drop():
    ratios = [_sup_defect2(t) / _sup_defect2(t / 2) for t in (1e-9, 1e-10, 1e-11)]
    assert min(ratios) >= 4.0


def test_residual_follows_documented_order():
    tols = np.logspace(-8, -12, 9)
    R = [_sup_defect2(t) for t in tols]
    p = np.polyfit(np.log(tols), np.log(R), 1)[0]
    # squared defect ~ tol^(7/4); allow a little slack for step-selection noise
    assert p >= 1.5


def test_pseudo_distance_grows_along_outward_tangent():
    # start on the space-like axis with <F, T> > 0: z increases along the curve
    for phi0 in (-0.5, 0.0, 0.3, 0.5):
        c = integrate_shrinker_curve((2.0, 0.0), phi0, (0.0, 1.0), 1e-11)
        y = c(np.linspace(c.s_min, c.s_max, 101))
        z = y[:, 0] ** 2 - y[:, 1] ** 2
        assert np.all(np.diff(z) > 0)
