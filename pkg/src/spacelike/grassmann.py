"""Space-like n-planes: W-matrix, hyperbolic principal angles and the w-function.

For planes P, A with orthonormal bases ``e_i``, ``a_j`` the W-matrix is
``W_ij = <e_i, a_j>``.  Writing ``Z_ib = <e_i, ~a_b>`` against the time-like
normals of A, orthonormality of ``e`` gives ``W W^T = I + Z Z^T``, so the
singular values of ``Z`` are the ``sinh theta_i``.  Working with ``Z`` keeps
small angles accurate, where the eigenvalues of ``W^T W`` would only resolve
``theta^2`` to round-off.
"""

from dataclasses import dataclass

import numpy as np

from .ambient import Signature, boost, gram, gram_schmidt, orthonormal_frame
from .errors import NumericalDegeneracyError

GRAM_TOL = 1e-10
EIG_TOL = 1e-8


class GrassmannPoint:
    """A space-like n-plane, stored through an orthonormal basis.

    The input basis is orthonormalized by indefinite Gram-Schmidt in the given
    order, which leaves an already orthonormal basis unchanged up to round-off.
    """

    def __init__(self, basis, sig: Signature):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        self.sig = sig
        self.basis = gram_schmidt(basis, sig)
        if self.basis.shape[1] != sig.n:
            raise ValueError(f"expected {sig.n} basis vectors, got {self.basis.shape[1]}")
        self._normal = None

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def normal(self) -> np.ndarray:
        if self._normal is None:
            self._normal = orthonormal_frame(self.basis, self.sig).normal
        return self._normal

    def gram_residual(self) -> float:
        return float(np.max(np.abs(gram(self.basis, self.basis, self.sig) - np.eye(self.n))))

    @classmethod
    def coordinate(cls, sig: Signature):
        """The plane spanned by the space-like coordinate axes."""
        return cls(np.eye(sig.dim)[:, : sig.n], sig)


def _as_point(P, sig=None) -> GrassmannPoint:
    if isinstance(P, GrassmannPoint):
        return P
    if sig is None:
        raise ValueError("a raw basis needs a signature")
    return GrassmannPoint(P, sig)


@dataclass(frozen=True)
class AngleData:
    """Relative position of two space-like planes.

    ``e, e_normal`` and ``a, a_normal`` are the adapted frames in which
    ``e_k = cosh(theta_k) a_k + sinh(theta_k) a_normal_k``.  ``basis`` is the
    (possibly orientation-flipped) basis of P that ``W`` refers to.
    """

    W: np.ndarray
    thetas: np.ndarray
    lambdas: np.ndarray
    w: float
    flipped: bool
    basis: np.ndarray
    e: np.ndarray
    e_normal: np.ndarray
    a: np.ndarray
    a_normal: np.ndarray

    @property
    def log_w(self) -> float:
        return float(np.log(self.w))


def angle_data(P, A, sig: Signature = None) -> AngleData:
    """W-matrix, descending hyperbolic angles, ``w = det W`` and adapted frames."""
    P = _as_point(P, sig)
    A = _as_point(A, P.sig)
    if P.sig != A.sig or P.n != A.n:
        raise ValueError("planes must have the same signature and dimension")
    sig = P.sig
    n, m = sig.n, sig.m
    E = P.basis.copy()
    W = gram(E, A.basis, sig)
    flipped = bool(np.linalg.det(W) < 0)
    if flipped:
        E[:, -1] *= -1.0
        W = gram(E, A.basis, sig)
    mu = np.linalg.eigvalsh(W.T @ W)
    if mu[0] < 1.0 - EIG_TOL:
        raise NumericalDegeneracyError(f"W^T W has eigenvalue {mu[0]:.3e} < 1")

    Atil = A.normal
    Z = gram(E, Atil, sig)
    U, S, Vzt = np.linalg.svd(Z)
    Vz = Vzt.T
    sh = np.zeros(n)
    sh[: S.size] = S
    thetas = np.arcsinh(sh)
    ch = np.sqrt(1.0 + sh**2)
    V = W.T @ U / ch[None, :]

    e = E @ U
    a = A.basis @ V
    a_normal = -Atil @ Vz
    e_normal = a_normal.copy()
    k = min(n, m)
    e_normal[:, :k] = sh[None, :k] * a[:, :k] + ch[None, :k] * a_normal[:, :k]
    return AngleData(
        W=W,
        thetas=thetas,
        lambdas=np.tanh(thetas),
        w=float(np.linalg.det(W)),
        flipped=flipped,
        basis=E,
        e=e,
        e_normal=e_normal,
        a=a,
        a_normal=a_normal,
    )


def grassmann_distance(P, A, sig: Signature = None) -> float:
    """``sqrt(sum theta_i^2)``."""
    return float(np.linalg.norm(angle_data(P, A, sig).thetas))


def _replacement_matrix(P, A, rows):
    P = _as_point(P)
    A = _as_point(A, P.sig)
    data = angle_data(P, A)
    W = data.W.copy()
    for i, nu in rows:
        if not 0 <= i < P.n:
            raise IndexError(f"tangent index {i} out of range for n={P.n}")
        W[i] = gram(np.asarray(nu, float)[:, None], A.basis, P.sig)[0]
    return W


def w_replacement(P, A, i: int, nu) -> float:
    """``det W`` with row ``i`` replaced by ``<nu, a_j>``."""
    return float(np.linalg.det(_replacement_matrix(P, A, [(i, nu)])))


def w_double_replacement(P, A, i: int, nu, j: int, mu) -> float:
    """``det W`` with rows ``i`` and ``j`` replaced by ``<nu, a_.>`` and ``<mu, a_.>``."""
    if i == j:
        raise ValueError("double replacement needs two distinct rows")
    return float(np.linalg.det(_replacement_matrix(P, A, [(i, nu), (j, mu)])))


def aligned_replacement_forms(data: AngleData):
    """Closed forms of the single and double replacements in adapted frames.

    Returns ``(single, double)`` where ``single[i, a] = lambda_i w delta_{ia}``
    and ``double[i, a, j, b]`` is ``lambda_i lambda_j w`` when ``a = i, b = j``,
    ``-lambda_i lambda_j w`` when ``a = j, b = i`` and zero otherwise.
    """
    n = data.thetas.size
    m = data.e_normal.shape[1]
    lam, w = data.lambdas, data.w
    single = np.zeros((n, m))
    double = np.zeros((n, m, n, m))
    for i in range(min(n, m)):
        single[i, i] = lam[i] * w
    for i in range(n):
        for j in range(n):
            if i == j or i >= m or j >= m:
                continue
            double[i, i, j, j] = lam[i] * lam[j] * w
            double[i, j, j, i] = -lam[i] * lam[j] * w
    return single, double


def tangent_plane_w(J, A: GrassmannPoint) -> float:
    """``|det W|`` for the plane spanned by the columns of ``J`` (not necessarily orthonormal).

    Uses ``det W = det(J^T eta a) / sqrt(det g)``, which avoids building a frame.
    """
    sig = A.sig
    g = gram(J, J, sig)
    return float(abs(np.linalg.det(gram(J, A.basis, sig))) / np.sqrt(np.linalg.det(g)))


def gauss_map_w(graph, x, A: GrassmannPoint, geom=None):
    """w-function of the tangent plane of ``graph`` at ``x`` against ``A``: ``(w, log w)``."""
    from .graph import point_geometry

    if geom is None:
        geom = point_geometry(graph, x)
    data = angle_data(GrassmannPoint(geom.frame.tangent, graph.sig), A)
    return data.w, data.log_w


# -- test configurations ----------------------------------------------------


def random_lorentz(sig: Signature, rng, scale: float = 1.0) -> np.ndarray:
    """A random element of the identity component of O(n, m).

    Product of a random block rotation and boosts with rapidities drawn from
    ``[-scale, scale]`` in every (space, time) coordinate plane.
    """
    n, m = sig.n, sig.m
    L = np.eye(sig.dim)
    Qs, _ = np.linalg.qr(rng.normal(size=(n, n)))
    Qt, _ = np.linalg.qr(rng.normal(size=(m, m)))
    R = np.eye(sig.dim)
    R[:n, :n] = Qs
    R[n:, n:] = Qt
    for i in range(n):
        for a in range(m):
            L = boost(sig, i, a, rng.uniform(-scale, scale)) @ L
    return L @ R


def boosted_pair(sig: Signature, thetas, L=None):
    """Planes ``(P, A)`` whose hyperbolic angles are exactly ``thetas``.

    ``A`` is ``L`` applied to the coordinate plane and ``P`` is ``L`` applied
    to the coordinate plane boosted by ``theta_k`` in the (k, k) plane.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size > min(sig.n, sig.m):
        raise ValueError("at most min(n, m) independent angles")
    if L is None:
        L = np.eye(sig.dim)
    B = np.eye(sig.dim)
    for k, th in enumerate(thetas):
        B = boost(sig, k, k, th) @ B
    base = np.eye(sig.dim)[:, : sig.n]
    return GrassmannPoint(L @ B @ base, sig), GrassmannPoint(L @ base, sig)


def random_double_boost(rng, sig: Signature = None, theta_range=(0.05, 1.5), scale=0.8):
    """Random ``(thetas, P, A)`` with two distinct angles in a randomly boosted position."""
    sig = sig or Signature(2, 2)
    thetas = np.sort(rng.uniform(*theta_range, size=2))[::-1]
    P, A = boosted_pair(sig, thetas, random_lorentz(sig, rng, scale))
    return thetas, P, A
