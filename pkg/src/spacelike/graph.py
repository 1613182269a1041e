"""Differential geometry of graphical space-like submanifolds.

A :class:`SpacelikeGraph` describes ``M = {(x, f(x))}`` in R^{n+m}_m through
a jet provider for ``f``.  Internally everything is computed from the jets of
the immersion ``F(x) = (x, f(x))``: tensors are first assembled with
coordinate indices and ambient-vector values (so the normal connection is
simply ``P_N d``), then expressed in the orthonormal frame built by
:func:`spacelike.ambient.orthonormal_frame`.

Index conventions for arrays returned here:

* ``h[a, i, j]``        second fundamental form ``h^a_ij`` (B_ij = h^a_ij e_a)
* ``nablaB[a, i, j, k]`` ``nabla_k h^a_ij``
* ``nablaH[a, k]``      ``nabla_k H^a``
* ``Rperp[a, b, i, j]`` normal curvature ``R^b_a(e_i, e_j)``
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Callable, Optional

import numpy as np

from .ambient import Signature, LorentzFrame, orthonormal_frame
from .errors import ChartError, NotSpacelikeError

SPACELIKE_TOL = 1e-10


@dataclass(frozen=True)
class Jet:
    """Value and partial derivatives of a vector-valued map at a point.

    ``value`` has shape ``(k,)`` and ``dr`` has shape ``(k,) + (n,) * r``.
    Orders that were not requested are ``None``.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: Optional[np.ndarray] = None
    d3: Optional[np.ndarray] = None
    d4: Optional[np.ndarray] = None

    def order(self, r):
        return [self.value, self.d1, self.d2, self.d3, self.d4][r]


# -- finite-difference jets -------------------------------------------------

_FD_STEP_SCALE = {1: 1.0, 2: 1.0, 3: 10.0, 4: 30.0}


def _nested_central(fun, x, idx, h):
    # product of central differences d_{i1} ... d_{ik}, each with step h
    acc = 0.0
    for signs in product((1.0, -1.0), repeat=len(idx)):
        y = x.copy()
        for s, i in zip(signs, idx):
            y[i] += s * h
        acc = acc + np.prod(signs) * fun(y)
    return acc / (2.0 * h) ** len(idx)


def fd_jet(fun, x, order, h=1e-4):
    """Jet of ``fun`` by central differences, Richardson-extrapolated once.

    The step for derivative order r is ``h * max(1, |x|)`` scaled up for
    r >= 3, where round-off would otherwise dominate.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    value = np.atleast_1d(np.asarray(fun(x), dtype=float))
    k = value.size
    derivs = []
    for r in range(1, order + 1):
        step = h * max(1.0, float(np.linalg.norm(x))) * _FD_STEP_SCALE[r]
        D = np.zeros((k,) + (n,) * r)
        for idx in combinations_with_replacement(range(n), r):
            coarse = _nested_central(fun, x, idx, step)
            fine = _nested_central(fun, x, idx, step / 2)
            est = (4.0 * fine - coarse) / 3.0
            for perm in set(_permutations(idx)):
                D[(slice(None),) + perm] = est
        derivs.append(D)
    derivs += [None] * (4 - len(derivs))
    return Jet(value, *derivs)


def _permutations(idx):
    from itertools import permutations

    return permutations(idx)


# -- graphs -----------------------------------------------------------------


class SpacelikeGraph:
    """Graph of ``f: R^n -> R^m`` inside R^{n+m}_m.

    Parameters
    ----------
    sig : Signature
    provider : callable
        In ``"analytic"`` mode, ``provider(x, order) -> Jet`` for ``f``.
        In ``"fd"`` mode, ``provider(x) -> f(x)`` and derivatives are taken by
        :func:`fd_jet`.
    jet_mode : {"analytic", "fd"}
    h : float
        Base finite-difference step for ``"fd"`` mode.
    domain : pair of arrays, optional
        Box ``(lo, hi)`` on which the provider is valid.
    """

    def __init__(self, sig, provider=None, jet_mode="analytic", h=1e-4, domain=None, name="graph"):
        if jet_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown jet_mode {jet_mode!r}")
        self.sig = sig
        self.provider = provider
        self.jet_mode = jet_mode
        self.h = h
        self.name = name
        if domain is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (sig.n,)).copy() for b in domain)
            domain = (lo, hi)
        self.domain = domain

    # chart bookkeeping
    def contains(self, x) -> bool:
        if self.domain is None:
            return True
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def check_domain(self, x):
        if not self.contains(x):
            raise ChartError(f"point {np.asarray(x)} lies outside the chart domain of {self.name}")

    def jets(self, x, order=2) -> Jet:
        x = np.asarray(x, dtype=float).reshape(self.sig.n)
        self.check_domain(x)
        if self.jet_mode == "fd":
            return fd_jet(self.provider, x, order, self.h)
        return self.provider(x, order)

    def immersion_jets(self, x, order=2) -> Jet:
        """Jets of ``F(x) = (x, f(x))``."""
        n = self.sig.n
        x = np.asarray(x, dtype=float).reshape(n)
        fj = self.jets(x, order)
        value = np.concatenate([x, fj.value])
        d1 = np.vstack([np.eye(n), fj.d1])
        higher = []
        for r in range(2, 5):
            d = fj.order(r) if r <= order else None
            if d is None:
                higher.append(None)
                continue
            higher.append(np.concatenate([np.zeros((n,) + (n,) * r), d], axis=0))
        return Jet(value, d1, *higher)

    def batch_immersion(self, points, order=2):
        """Stacked immersion jets at many points: arrays ``(P, N, ...)``."""
        jets = [self.immersion_jets(p, order) for p in np.atleast_2d(points)]
        return [np.stack([j.order(r) for j in jets]) for r in range(order + 1)]

    def pseudo_distance(self, x) -> float:
        F = self.immersion_jets(x, 1).value
        n = self.sig.n
        return float(F[:n] @ F[:n] - F[n:] @ F[n:])


class PolynomialGraph(SpacelikeGraph):
    """``f^a(x) = c^a + b^a_i x_i + 1/2 A^a_ij x_i x_j + 1/6 T^a_ijk x_i x_j x_k``.

    Coefficient tensors are symmetrized on construction.
    """

    def __init__(self, sig, c=None, b=None, A=None, T=None, name="polynomial"):
        n, m = sig.n, sig.m
        self.c = np.zeros(m) if c is None else np.asarray(c, float).reshape(m)
        self.b = np.zeros((m, n)) if b is None else np.asarray(b, float).reshape(m, n)
        A = np.zeros((m, n, n)) if A is None else np.asarray(A, float).reshape(m, n, n)
        self.A = 0.5 * (A + A.transpose(0, 2, 1))
        T = np.zeros((m, n, n, n)) if T is None else np.asarray(T, float).reshape(m, n, n, n)
        sym = sum(T.transpose((0,) + tuple(1 + np.array(p))) for p in _permutations((0, 1, 2)))
        self.T = sym / 6.0
        super().__init__(sig, self._jet, name=name)

    def _jet(self, x, order):
        A, T = self.A, self.T
        Tx = np.einsum("aijk,k->aij", T, x)
        d2 = A + Tx
        d1 = self.b + np.einsum("aij,j->ai", A, x) + 0.5 * np.einsum("aij,j->ai", Tx, x)
        value = self.c + self.b @ x + 0.5 * np.einsum("ai,i->a", np.einsum("aij,j->ai", A, x), x)
        value = value + np.einsum("ai,i->a", np.einsum("aij,j->ai", Tx, x), x) / 6.0
        n, m = self.sig.n, self.sig.m
        d3 = T if order >= 3 else None
        d4 = np.zeros((m,) + (n,) * 4) if order >= 4 else None
        return Jet(value, d1, d2, d3, d4)

    def batch_immersion(self, points, order=2):
        P = np.atleast_2d(np.asarray(points, float))
        n = self.sig.n
        Tx = np.einsum("aijk,pk->paij", self.T, P)
        d2f = self.A[None] + Tx
        Ax = np.einsum("aij,pj->pai", self.A, P)
        Txx = np.einsum("paij,pj->pai", Tx, P)
        d1f = self.b[None] + Ax + 0.5 * Txx
        f = self.c[None] + P @ self.b.T + 0.5 * np.einsum("pai,pi->pa", Ax, P) + np.einsum("pai,pi->pa", Txx, P) / 6.0
        npts = P.shape[0]
        out = [np.hstack([P, f]), np.concatenate([np.broadcast_to(np.eye(n), (npts, n, n)), d1f], axis=1)]
        if order >= 2:
            out.append(np.concatenate([np.zeros((npts, n, n, n)), d2f], axis=1))
        return out


    def chart_box(self, r, pad=1.02):
        """Box containing ``D_r``; only available for affine graphs through the origin."""
        if np.any(self.A) or np.any(self.T) or np.any(self.c):
            raise ValueError("chart_box is only defined for affine graphs through the origin")
        lam = np.linalg.eigvalsh(np.eye(self.sig.n) - self.b.T @ self.b)[0]
        half = pad * r / np.sqrt(lam)
        return -half * np.ones(self.sig.n), half * np.ones(self.sig.n)


def affine_graph(sig, slope=None, offset=None):
    """The affine n-plane ``f(x) = slope @ x + offset``."""
    return PolynomialGraph(sig, c=offset, b=slope, name="affine")


# -- pointwise geometry -----------------------------------------------------


@dataclass(frozen=True)
class PointGeometry:
    """Frames, metric and extrinsic data at one point of a space-like graph.

    ``T`` holds the coordinate coefficients of the orthonormal tangent frame,
    ``e_i = T[i, k] d_k F``.  ``Bc[:, i, j]`` is the second fundamental form
    on coordinate vectors as an ambient vector, ``PN`` the normal projector.
    """

    x: np.ndarray
    F: np.ndarray
    frame: LorentzFrame
    g: np.ndarray
    g_inv: np.ndarray
    T: np.ndarray
    h: np.ndarray
    H: np.ndarray
    Hcomp: np.ndarray
    FN: np.ndarray
    xcomp: np.ndarray
    ycomp: np.ndarray
    z: float
    X2: float
    Y2: float
    PN: np.ndarray
    Bc: np.ndarray
    jet: Jet = field(repr=False)

    @property
    def sig(self):
        return self.frame.sig

    @property
    def normB2(self) -> float:
        return float(np.sum(self.h**2))

    @property
    def normH2(self) -> float:
        return float(np.sum(self.Hcomp**2))

    @property
    def sqrt_det_g(self) -> float:
        return float(np.sqrt(np.linalg.det(self.g)))


def _geometry_from_jet(sig: Signature, x, jet: Jet) -> PointGeometry:
    s = sig.signs
    F, J, D2 = jet.value, jet.d1, jet.d2
    etaJ = s[:, None] * J
    g = J.T @ etaJ
    g = 0.5 * (g + g.T)
    lam = np.linalg.eigvalsh(g)
    if lam[0] <= SPACELIKE_TOL:
        raise NotSpacelikeError(
            f"induced metric not positive definite at x={np.asarray(x)} (eigenvalue {lam[0]:.3e})",
            eigenvalue=float(lam[0]),
            point=np.asarray(x),
        )
    g_inv = np.linalg.inv(g)
    PT = J @ g_inv @ etaJ.T
    PN = np.eye(sig.dim) - PT
    Bc = np.einsum("AB,Bij->Aij", PN, D2)
    frame = orthonormal_frame(J, sig)
    E, Nf = frame.tangent, frame.normal
    T = (E.T * s) @ J @ g_inv
    BN = np.einsum("Aij,A,Aa->aij", Bc, s, Nf)
    h = -np.einsum("ik,jl,akl->aij", T, T, BN)
    h = 0.5 * (h + h.transpose(0, 2, 1))
    Hcomp = np.einsum("aii->a", h)
    sF = s * F
    xcomp = E.T @ sF
    ycomp = -(Nf.T @ sF)
    X2 = float(xcomp @ xcomp)
    Y2 = float(ycomp @ ycomp)
    return PointGeometry(
        x=np.asarray(x, dtype=float),
        F=F,
        frame=frame,
        g=g,
        g_inv=g_inv,
        T=T,
        h=h,
        H=Nf @ Hcomp,
        Hcomp=Hcomp,
        FN=Nf @ ycomp,
        xcomp=xcomp,
        ycomp=ycomp,
        z=float(F @ sF),
        X2=X2,
        Y2=Y2,
        PN=PN,
        Bc=Bc,
        jet=jet,
    )


def point_geometry(graph: SpacelikeGraph, x, order=2) -> PointGeometry:
    """Frame, metric, second fundamental form, mean curvature and z at ``x``."""
    x = np.asarray(x, dtype=float).reshape(graph.sig.n)
    return _geometry_from_jet(graph.sig, x, graph.immersion_jets(x, max(order, 2)))


@dataclass(frozen=True)
class DerivedTensors:
    """Covariant derivatives and quadratic invariants at one point.

    ``nablaH_coord[:, k]`` is ``nabla_{d_k} H`` as an ambient vector; it is
    what finite differences of the mean curvature field act on.
    """

    nablaB: np.ndarray
    nablaH: np.ndarray
    S: np.ndarray
    P: np.ndarray
    Rperp: np.ndarray
    Rperp2: float
    normB2: float
    normH2: float
    normNablaB2: float
    normNablaH2: float
    normP2: float
    gradB2: np.ndarray
    nablaH_coord: np.ndarray
    christoffel: np.ndarray


def normal_curvature(h):
    """``R^b_a(e_i, e_j) = sum_k h^a_ik h^b_kj - h^b_ik h^a_kj`` (Ricci equation)."""
    return np.einsum("aik,bkj->abij", h, h) - np.einsum("bik,akj->abij", h, h)


def derived_tensors(graph: SpacelikeGraph, x, geom: Optional[PointGeometry] = None) -> DerivedTensors:
    """Covariant derivatives of B and H, S, P and the normal curvature at ``x``."""
    if geom is None or geom.jet.d3 is None:
        geom = point_geometry(graph, x, order=3)
    sig = graph.sig
    s = sig.signs
    J, D2, D3 = geom.jet.d1, geom.jet.d2, geom.jet.d3
    g_inv, PN, Bc, T, h = geom.g_inv, geom.PN, geom.Bc, geom.T, geom.h
    Nf = geom.frame.normal
    etaJ = s[:, None] * J

    # derivative of the tangent projector along each coordinate direction
    dg = np.einsum("Aik,A,Aj->kij", D2, s, J)
    dg = dg + dg.transpose(0, 2, 1)
    dginv = -np.einsum("ab,kbc,cd->kad", g_inv, dg, g_inv)
    etaD2 = s[:, None, None] * D2
    dPT = (
        np.einsum("Aik,ij,Bj->kAB", D2, g_inv, etaJ)
        + np.einsum("Ai,kij,Bj->kAB", J, dginv, etaJ)
        + np.einsum("Ai,ij,Bjk->kAB", J, g_inv, etaD2)
    )
    dBc = -np.einsum("kAB,Bij->Aijk", dPT, D2) + np.einsum("AB,Bijk->Aijk", PN, D3)

    gamma = np.einsum("lp,Aki,A,Ap->lki", g_inv, D2, s, J)
    nablaBc = (
        np.einsum("AB,Bijk->Aijk", PN, dBc)
        - np.einsum("lki,Alj->Aijk", gamma, Bc)
        - np.einsum("lkj,Ail->Aijk", gamma, Bc)
    )
    proj = np.einsum("Aijk,A,Aa->aijk", nablaBc, s, Nf)
    nablaB = -np.einsum("ip,jq,kr,apqr->aijk", T, T, T, proj)
    nablaH_coord = np.einsum("ij,Aijk->Ak", g_inv, nablaBc)
    nablaH = -np.einsum("kc,Ac,A,Aa->ak", T, nablaH_coord, s, Nf)

    S = np.einsum("aij,bij->ab", h, h)
    P = -np.einsum("aij,a->ij", h, geom.Hcomp)
    R = normal_curvature(h)
    gradB2 = 2.0 * np.einsum("aij,aijk->k", h, nablaB)
    return DerivedTensors(
        nablaB=nablaB,
        nablaH=nablaH,
        S=S,
        P=P,
        Rperp=R,
        Rperp2=float(np.sum(R**2)),
        normB2=float(np.trace(S)),
        normH2=geom.normH2,
        normNablaB2=float(np.sum(nablaB**2)),
        normNablaH2=float(np.sum(nablaH**2)),
        normP2=float(np.sum(P**2)),
        gradB2=gradB2,
        nablaH_coord=nablaH_coord,
        christoffel=gamma,
    )


def shrinker_residual(graph: SpacelikeGraph, x, geom: Optional[PointGeometry] = None) -> np.ndarray:
    """``H + F^N / 2``; vanishes exactly where the shrinker equation holds."""
    if geom is None:
        geom = point_geometry(graph, x)
    return geom.H + 0.5 * geom.FN


def residual_norm2(graph: SpacelikeGraph, x, geom: Optional[PointGeometry] = None) -> float:
    """``|H + F^N/2|^2`` with the all-plus convention for time-like vectors."""
    v = shrinker_residual(graph, x, geom)
    s = graph.sig.signs
    return float(-(v @ (s * v)))


def hess_z(graph: SpacelikeGraph, x, geom: Optional[PointGeometry] = None, frame="orthonormal") -> np.ndarray:
    """Hessian of the pseudo-distance, ``z_ij = 2 (delta_ij - y^a h^a_ij)``.

    With ``frame="coordinate"`` the tensor is returned on coordinate vectors,
    so that its trace against ``g_inv`` is the Laplacian.
    """
    if geom is None:
        geom = point_geometry(graph, x)
    n = graph.sig.n
    hz = 2.0 * (np.eye(n) - np.einsum("a,aij->ij", geom.ycomp, geom.h))
    if frame == "orthonormal":
        return hz
    if frame == "coordinate":
        Tinv = np.linalg.inv(geom.T)
        return Tinv @ hz @ Tinv.T
    raise ValueError(f"unknown frame {frame!r}")


def laplace_z(graph: SpacelikeGraph, x, geom: Optional[PointGeometry] = None):
    """Return ``(2n - 2 y^a H^a, 2n + Y^2)``; the two agree on shrinkers."""
    if geom is None:
        geom = point_geometry(graph, x)
    n = graph.sig.n
    return 2.0 * n - 2.0 * float(geom.ycomp @ geom.Hcomp), 2.0 * n + geom.Y2


# -- batched scalar geometry ------------------------------------------------


def batch_scalars(graph: SpacelikeGraph, points) -> dict:
    """Frame-free scalar invariants at many points, vectorized.

    Returns arrays keyed by ``z, sqrt_det_g, B2, H2, P2, X2, min_eig``.
    """
    sig = graph.sig
    s = sig.signs
    F, J, D2 = graph.batch_immersion(points, order=2)
    etaJ = s[None, :, None] * J
    g = np.einsum("pAi,pAj->pij", J, etaJ)
    lam = np.linalg.eigvalsh(g)
    if np.any(lam[:, 0] <= SPACELIKE_TOL):
        bad = int(np.argmin(lam[:, 0]))
        raise NotSpacelikeError(
            f"induced metric not positive definite (eigenvalue {lam[bad, 0]:.3e})",
            eigenvalue=float(lam[bad, 0]),
            point=np.atleast_2d(points)[bad],
        )
    g_inv = np.linalg.inv(g)
    PT = np.einsum("pAi,pij,pBj->pAB", J, g_inv, etaJ)
    PN = np.eye(sig.dim)[None] - PT
    Bc = np.einsum("pAB,pBij->pAij", PN, D2)
    sBc = s[None, :, None, None] * Bc
    Hc = np.einsum("pij,pAij->pA", g_inv, Bc)
    sH = s[None] * Hc
    B2 = -np.einsum("pik,pjl,pAij,pAkl->p", g_inv, g_inv, Bc, sBc)
    H2 = -np.einsum("pA,pA->p", Hc, sH)
    Pc = np.einsum("pAij,pA->pij", Bc, sH)
    P2 = np.einsum("pik,pjl,pij,pkl->p", g_inv, g_inv, Pc, Pc)
    FT = np.einsum("pAB,pB->pA", PT, F)
    return {
        "z": np.einsum("pA,A,pA->p", F, s, F),
        "sqrt_det_g": np.sqrt(np.linalg.det(g)),
        "B2": B2,
        "H2": H2,
        "P2": P2,
        "X2": np.einsum("pA,A,pA->p", FT, s, FT),
        "min_eig": lam[:, 0],
    }


def batch_chart(graph: SpacelikeGraph, points):
    """``(z, sqrt det g)`` at many chart points; only first-order jets are used."""
    s = graph.sig.signs
    F, J = graph.batch_immersion(points, order=1)[:2]
    g = np.matmul(J.transpose(0, 2, 1), s[None, :, None] * J)
    return (F * F) @ s, np.sqrt(np.clip(np.linalg.det(g), 0.0, None))


# -- Lagrangian gradient graphs ---------------------------------------------


class LagrangianGraph(SpacelikeGraph):
    """Gradient graph ``{(x, Du(x))}`` in R^{2n}_n with null-coordinate metric sum dx_i dy_i.

    The null coordinates are mapped to the standard layout by
    ``X = (x + y)/2`` (space-like) and ``T = (x - y)/2`` (time-like), which is
    an isometry onto ``diag(+1, -1)``.  The chart coordinate is ``x`` itself, so
    the induced metric is ``u_ij``.
    """

    def __init__(self, n, potential: Callable, domain=None, name="lagrangian"):
        super().__init__(Signature(n, n), provider=None, domain=domain, name=name)
        self.potential = potential

    def immersion_jets(self, x, order=2) -> Jet:
        n = self.sig.n
        x = np.asarray(x, dtype=float).reshape(n)
        self.check_domain(x)
        uj = self.potential(x, order + 1)
        Du = uj.d1.reshape(n)
        value = np.concatenate([(x + Du) / 2, (x - Du) / 2])
        I = np.eye(n)
        U = uj.d2.reshape(n, n)
        d1 = np.vstack([(I + U) / 2, (I - U) / 2])
        higher = []
        for r in range(2, 5):
            if r > order:
                higher.append(None)
                continue
            Dr = uj.order(r + 1)
            if Dr is None:
                raise ValueError(f"potential must supply derivatives of order {r + 1}")
            Dr = Dr.reshape((n,) * (r + 1))
            higher.append(np.concatenate([Dr / 2, -Dr / 2], axis=0))
        return Jet(value, d1, *higher)

    def pseudo_distance(self, x) -> float:
        """``z = x_i u_i``, the null-coordinate form of <F, F>."""
        x = np.asarray(x, dtype=float).reshape(self.sig.n)
        return float(x @ self.potential(x, 1).d1.reshape(-1))


def lagrangian_graph(potential: Callable, n: int, domain=None) -> LagrangianGraph:
    """Build the Lagrangian gradient graph of a convex potential.

    ``potential(x, order)`` must return a :class:`Jet` of the scalar ``u``
    (value shape ``(1,)``) with derivatives up to ``order``.
    """
    return LagrangianGraph(n, potential, domain=domain)
