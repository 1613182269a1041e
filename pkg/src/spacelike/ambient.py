"""Indefinite linear algebra in R^{n+m}_m.

Coordinates are laid out with the n space-like slots first and the m
time-like slots last, so the metric is ``diag(+1, ..., +1, -1, ..., -1)``.
Vectors are plain 1-D numpy arrays; families of vectors are stored as the
columns of a 2-D array.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePlaneError, FrameDegeneracyError

FRAME_TOL = 1e-10
CAUSAL_TOL = 1e-12


@dataclass(frozen=True)
class Signature:
    """Ambient dimensions: ``n`` space-like and ``m`` time-like directions."""

    n: int
    m: int

    def __post_init__(self):
        for name in ("n", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def eta(self) -> np.ndarray:
        return np.diag(self.signs)

    @property
    def signs(self) -> np.ndarray:
        return np.concatenate([np.ones(self.n), -np.ones(self.m)])

    def vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ValueError(f"expected leading dimension {self.dim}, got shape {v.shape}")
        return v


def inner(u, v, sig: Signature) -> float:
    """Indefinite inner product ``sum_i u_i v_i - sum_a u_a v_a``."""
    u = sig.vector(u)
    v = sig.vector(v)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    n = sig.n
    return float(u[:n] @ v[:n] - u[n:] @ v[n:])


def gram(a, b, sig: Signature) -> np.ndarray:
    """Matrix of inner products between the columns of ``a`` and ``b``."""
    a = sig.vector(a)
    b = sig.vector(b)
    return a.T @ (sig.signs[:, None] * b)


def causal_character(v, sig: Signature, tol: float = CAUSAL_TOL) -> str:
    q = inner(v, v, sig)
    if q > tol:
        return "spacelike"
    if q < -tol:
        return "timelike"
    return "null"


def boost(sig: Signature, i: int, alpha: int, theta: float) -> np.ndarray:
    """Lorentz boost with rapidity ``theta`` in the (space i, time alpha) plane.

    ``alpha`` counts time-like slots from zero, so the affected ambient
    indices are ``i`` and ``sig.n + alpha``.
    """
    L = np.eye(sig.dim)
    a = sig.n + alpha
    c, s = np.cosh(theta), np.sinh(theta)
    L[i, i] = c
    L[a, a] = c
    L[i, a] = s
    L[a, i] = s
    return L


def _orthogonalize(v, basis, signs, sig):
    # two passes of classical Gram-Schmidt keep the residual at round-off level
    for _ in range(2):
        for e, eps in zip(basis, signs):
            v = v - eps * inner(v, e, sig) * e
    return v


def gram_schmidt(vectors, sig: Signature, tol: float = FRAME_TOL):
    """Indefinite Gram-Schmidt of space-like vectors, in the given order.

    Returns an ``(N, k)`` array of orthonormal space-like columns.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.shape[0] != sig.dim:
        vectors = vectors.T
    out = []
    for k in range(vectors.shape[1]):
        v = _orthogonalize(vectors[:, k].copy(), out, [1.0] * len(out), sig)
        q = inner(v, v, sig)
        if q <= tol:
            raise DegeneratePlaneError(
                f"input vector {k} is not space-like after orthogonalization (norm^2={q:.3e})"
            )
        out.append(v / np.sqrt(q))
    return np.column_stack(out) if out else np.zeros((sig.dim, 0))


@dataclass(frozen=True)
class LorentzFrame:
    """Orthonormal frame adapted to a space-like n-plane.

    ``tangent`` is ``(N, n)`` with space-like columns, ``normal`` is ``(N, m)``
    with time-like columns.
    """

    tangent: np.ndarray
    normal: np.ndarray
    sig: Signature

    @property
    def full(self) -> np.ndarray:
        return np.hstack([self.tangent, self.normal])

    def orthonormality_residual(self) -> float:
        G = gram(self.full, self.full, self.sig)
        return float(np.max(np.abs(G - self.sig.eta)))


def orthonormal_frame(tangent_basis, sig: Signature, tol: float = FRAME_TOL) -> LorentzFrame:
    """Lorentzian frame whose tangent part spans ``tangent_basis``.

    The tangent part is the Gram-Schmidt of the input columns in order.  The
    normal part projects the standard time-like axes onto the orthogonal
    complement and orthonormalizes them with sign -1.
    """
    basis = np.asarray(tangent_basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape[0] != sig.dim:
        raise ValueError(f"tangent basis must have {sig.dim} rows, got {basis.shape}")
    if basis.shape[1] != sig.n:
        raise ValueError(f"expected {sig.n} tangent vectors, got {basis.shape[1]}")
    G = gram(basis, basis, sig)
    lam = np.linalg.eigvalsh(0.5 * (G + G.T))
    if lam[0] <= tol:
        raise DegeneratePlaneError(f"plane is not space-like (smallest Gram eigenvalue {lam[0]:.3e})")
    tangent = gram_schmidt(basis, sig, tol)

    built = [tangent[:, i] for i in range(sig.n)]
    signs = [1.0] * sig.n
    normal = []
    for a in range(sig.m):
        axis = np.zeros(sig.dim)
        axis[sig.n + a] = 1.0
        v = _orthogonalize(axis, built, signs, sig)
        q = inner(v, v, sig)
        if q > -tol:
            raise FrameDegeneracyError(f"normal completion of time axis {a} is not time-like (norm^2={q:.3e})")
        v = v / np.sqrt(-q)
        normal.append(v)
        built.append(v)
        signs.append(-1.0)
    return LorentzFrame(tangent=tangent, normal=np.column_stack(normal), sig=sig)
