import json

import numpy as np
import pytest

from spacelike.ambient import Signature
from spacelike.errors import NotAShrinkerError
from spacelike.graph import PolynomialGraph, point_geometry
from spacelike.drift import (
    CATALOGUE,
    IdentityHarness,
    ScalarFieldOnM,
    drift_laplacian,
    interior_samples,
    laplace_beltrami,
    theorem_probe_H,
    verify_identity,
)

from oracles import fd_laplace_beltrami


def flat(n=2, m=1):
    return PolynomialGraph(Signature(n, m), c=np.zeros(m), b=np.zeros((m, n)), A=np.zeros((m, n, n)))


def z_field(G):
    return ScalarFieldOnM("z", lambda y: point_geometry(G, y).z)


def test_constant_field_is_annihilated(suite, rng):
    G = suite["curve"].graph
    one = ScalarFieldOnM("one", lambda y: 1.0, order=0)
    for x in interior_samples(G, 5, rng):
        assert abs(drift_laplacian(G, one, x)) < 1e-12


def test_flat_plane_z():
    G = flat()
    for x in ([0.0, 0.0], [0.3, -1.2], [2.0, 1.0]):
        val = drift_laplacian(G, z_field(G), x)
        assert val == pytest.approx(4 - np.dot(x, x), abs=1e-9)


def test_suite_z(suite, rng):
    for sh in suite.values():
        G = sh.graph
        n = G.sig.n
        for x in interior_samples(G, 5, rng):
            loc = G.localized(x, radius=0.1)
            val = drift_laplacian(loc, z_field(loc), x)
            assert val == pytest.approx(2 * n - point_geometry(loc, x).z, abs=1e-7)


def test_two_forms_agree(rng):
    G = PolynomialGraph(Signature(2, 1), c=[0.1], b=[[0.2, -0.1]], A=[[[0.1, 0.05], [0.05, -0.2]]])
    for _ in range(5):
        a = rng.normal(size=3)
        u = ScalarFieldOnM("u", lambda y, a=a: np.sin(a[0] * y[0]) + a[1] * y[0] * y[1] + a[2] * y[1] ** 3)
        x = rng.uniform(-0.3, 0.3, 2)
        g, w = drift_laplacian(G, u, x, form="both")
        assert abs(g - w) < 1e-8


def test_laplace_beltrami_matches_independent_stencil():
    G = PolynomialGraph(Signature(2, 1), c=[0.0], b=[[0.2, 0.1]], A=[[[0.2, 0.0], [0.0, -0.1]]])
    f = lambda y: np.array([0.2 * y[0] + 0.1 * y[1] + 0.1 * y[0] ** 2 - 0.05 * y[1] ** 2])
    Df = lambda y: np.array([[0.2 + 0.2 * y[0], 0.1 - 0.1 * y[1]]])
    u = lambda y: np.cos(y[0]) * y[1] ** 2
    x = np.array([0.2, -0.3])
    ours = laplace_beltrami(G, u, x)
    ref = fd_laplace_beltrami(f, Df, x, u, h=1e-4)
    assert np.ravel(ours)[0] == pytest.approx(float(np.ravel(ref)[0]), abs=1e-6)


def test_finite_difference_order():
    G = PolynomialGraph(Signature(2, 1), c=[0.0], b=[[0.1, 0.0]], A=[[[0.2, 0.1], [0.1, 0.0]]])
    u = ScalarFieldOnM("u", lambda y: np.exp(0.5 * y[0]) * np.sin(y[1]))
    x = np.array([0.1, 0.4])
    ref = drift_laplacian(G, u, x, h=1e-3)
    errs = [abs(drift_laplacian(G, u, x, h=h, richardson=False) - ref) for h in (0.08, 0.04)]
    # plain second-order stencil
    assert np.log2(errs[0] / errs[1]) > 1.8
    errs = [abs(drift_laplacian(G, u, x, h=h) - ref) for h in (0.08, 0.04)]
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_unknown_form():
    with pytest.raises(ValueError):
        drift_laplacian(flat(), lambda y: 0.0, [0.0, 0.0], form="neither")


def test_affine_plane_has_harmonic_curvature():
    G = PolynomialGraph(Signature(2, 2), c=np.zeros(2), b=[[0.3, 0.1], [-0.2, 0.4]], A=np.zeros((2, 2, 2)))
    rep = verify_identity(G, "ID-dLH", [[0.5, 0.2], [-1.0, 0.3]])
    assert rep.sup_residual < 1e-12 and rep.passed


def test_cylinder_dez(suite, rng):
    G = suite["cylinder"].graph
    rep = verify_identity(G, "ID-Dez", interior_samples(G, 10, rng))
    assert rep.sup_residual < 1e-7


def test_non_shrinker_is_gated():
    G = PolynomialGraph(Signature(1, 1), c=[0.0], b=[[0.0]], A=[[[0.3]]])
    with pytest.raises(NotAShrinkerError) as err:
        verify_identity(G, "ID-dLB", [[0.5]])
    assert err.value.worst_residual > 1e-8
    # the general identities need no gate
    assert verify_identity(G, "ID-nw", [[0.5]]).passed


def test_whole_catalogue_on_curve(harnesses):
    for rep in harnesses["curve"].verify_all():
        assert rep.passed, rep.id


def test_report_serialization(harnesses):
    rep = harnesses["product"].run("ID-Simons")
    d = json.loads(rep.to_json())
    assert {"id", "manifold", "n", "m", "samples", "sup_residual", "rms_residual", "tolerance", "pass"} <= set(d)
    assert d["n"] == 2 and d["m"] == 2 and d["samples"] == 50
    ineq = json.loads(harnesses["curve"].run("INEQ-logw", 1e-8).to_json())
    assert "slack" in ineq
    tight = harnesses["curve"].run("ID-Dez", 1e-15)
    assert tight.tolerance_floor and json.loads(tight.to_json())["tolerance_floor"] is True


def test_unknown_identity(harnesses):
    with pytest.raises(ValueError):
        harnesses["curve"].run("ID-nothing")
    assert len(CATALOGUE) == 10


def test_probe_vanishes_on_flat_plane():
    rows = theorem_probe_H(flat(), [1.0, 2.0])
    for r in rows:
        assert r.lhs == 0.0 and r.rhs == 0.0 and r.cutoff_lhs == 0.0


def test_probe_on_cylinder(suite):
    rows = theorem_probe_H(suite["cylinder"].graph, [2.0, 4.0, 8.0])
    for r in rows:
        # the cutoff is 1 on D_r and nonnegative beyond
        assert r.cutoff_lhs >= r.lhs - 1e-12
    rhs = [r.rhs for r in rows]
    assert rhs[0] > rhs[1] > rhs[2]


def test_probe_negative_control(suite):
    G = suite["curve"].graph
    base = theorem_probe_H(G, [2.0])[0]
    boosted = theorem_probe_H(G, [2.0], h2_scale=lambda z: np.exp(z / 4))[0]
    # a growth rate of 1/4 is added on top of the measured one
    assert boosted.alpha_measured == pytest.approx(base.alpha_measured + 0.25, abs=1e-9)
    assert boosted.rhs > 10 * base.rhs
