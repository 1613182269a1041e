"""Independent reference computations used by the tests.

Nothing here calls into the frame, geometry or w-function code of the
package; each oracle rebuilds what it needs from coordinates.
"""

import numpy as np
from scipy.integrate import solve_ivp


def eta(n, m):
    return np.diag([1.0] * n + [-1.0] * m)


def normal_in_plane(theta):
    """Unit time-like normal to (cosh t, sinh t) in R^2_1 with positive time part, by solving
    ``<v, t> = 0, <v, v> = -1`` directly."""
    t = np.array([np.cosh(theta), np.sinh(theta)])
    # <v,t> = v0 t0 - v1 t1 = 0  =>  v = k (t1, t0)
    v = np.array([t[1], t[0]])
    k = 1.0 / np.sqrt(-(v[0] ** 2 - v[1] ** 2))
    return k * v


def curve_curvature_fd(f, x, h=5e-4):
    """Signed curvature of the graph ``y = f(x)`` in R^2_1 against its future normal.

    Differentiates the unit tangent ``T = (1, f') / sqrt(1 - f'^2)`` by symmetric
    differences in arclength and pairs it with ``nu = (f', 1) / sqrt(1 - f'^2)``.
    """

    def fp(t):
        return (f(t + h) - f(t - h)) / (2 * h)

    def T(t):
        p = fp(t)
        return np.array([1.0, p]) / np.sqrt(1 - p**2)

    p = fp(x)
    ds = np.sqrt(1 - p**2)
    d = 2 * h
    dT = (T(x + d) - T(x - d)) / (2 * d) / ds
    nu = np.array([p, 1.0]) / np.sqrt(1 - p**2)
    return dT[0] * nu[0] - dT[1] * nu[1]


def _graph_normals(Df):
    """Orthonormal time-like normal frame of a graph from (grad f^a, e_a), Gram-Schmidt in R^{n+m}_m."""
    m, n = Df.shape
    E = eta(n, m)
    cols = []
    for a in range(m):
        v = np.concatenate([Df[a], np.eye(m)[a]])
        for u in cols:
            v = v - (v @ E @ u) / (u @ E @ u) * u
        cols.append(v / np.sqrt(-(v @ E @ v)))
    return np.array(cols).T


def _connection(f_jet, x, step=1e-6):
    """Normal connection 1-form ``omega[k][a, b] = <d_k nu_a, nu_b>`` (ambient derivative by FD)."""
    Df = f_jet(x)
    n = x.size
    m = Df.shape[0]
    E = eta(n, m)
    N = _graph_normals(Df)
    out = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        dN = (_graph_normals(f_jet(x + e)) - _graph_normals(f_jet(x - e))) / (2 * step)
        out.append(dN.T @ E @ N)
    return out


def _holonomy(f_jet, x0, side):
    """Transport of the normal frame components around the square ``x0 + [0, side]^2`` (counterclockwise)."""
    corners = [np.array([0.0, 0.0]), np.array([side, 0.0]), np.array([side, side]), np.array([0.0, side])]
    m = f_jet(x0).shape[0]
    c = np.eye(m).ravel()
    for a, b in zip(corners, corners[1:] + corners[:1]):
        d = b - a

        def rhs(t, y):
            om = _connection(f_jet, x0 + a + t * d)
            W = sum(d[k] * om[k] for k in range(2))
            # with <nu_a, nu_b> = -delta the transported coefficients solve c' = W^T c
            return (W.T @ y.reshape(m, m)).ravel()

        c = solve_ivp(rhs, (0, 1), c, rtol=1e-12, atol=1e-14).y[:, -1]
    return c.reshape(m, m)


def normal_curvature_holonomy(f_jet, x0, side=1e-3):
    """``|R_perp|^2`` at ``x0`` for n = 2 from the holonomy of squares of side ``side`` and ``side/2``.

    The holonomy is ``I + side^2 Omega_12 + O(side^3)``; one Richardson step
    removes the leading error.  Requires ``Df(x0) = 0`` so that the coordinate
    directions are orthonormal at ``x0``.  Returns ``2 sum_{ab} Omega_12[a, b]^2``
    (both orderings of the tangent pair).
    """
    m = f_jet(x0).shape[0]
    est = []
    for s in (side, side / 2):
        shifted = x0 - s / 2
        est.append((_holonomy(f_jet, shifted, s) - np.eye(m)) / s**2)
    Om = 2 * est[1] - est[0]
    return 2.0 * float(np.sum(Om**2))


def fd_laplace_beltrami(f, Df, x, u, h=1e-3):
    """Flux-form Laplace-Beltrami of ``u`` on the graph of ``f`` with the metric ``I - Df^T Df``.

    Plain nested central differences; ``u`` maps a chart point to an array.
    """
    n = x.size

    def metric(y):
        J = Df(y)
        g = np.eye(n) - J.T @ J
        return np.sqrt(np.linalg.det(g)), np.linalg.inv(g)

    def grad(y):
        out = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out.append((np.asarray(u(y + e)) - np.asarray(u(y - e))) / (2 * h))
        return out

    sg0, _ = metric(x)
    acc = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        flux = []
        for y in (x + e, x - e):
            sg, gi = metric(y)
            gr = grad(y)
            flux.append(sum(sg * gi[i, j] * gr[j] for j in range(n)))
        acc = acc + (flux[0] - flux[1]) / (2 * h)
    return acc / sg0


def gaussian_plane_mass(n, alpha):
    """``int_{R^n} exp(-alpha |x|^2) dx``."""
    return (np.pi / alpha) ** (n / 2)
