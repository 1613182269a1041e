"""Self-shrinker curves in R^2_1 and the shrinkers built from them.

A unit-speed space-like curve has tangent ``T = (cosh phi, sinh phi)`` and
time-like unit normal ``N = (sinh phi, cosh phi)``.  Its curvature vector is
``T' = phi' N`` and the normal part of the position is ``-<F, N> N``, so
``H = -F^N / 2`` reduces to

    gamma1' = cosh phi,  gamma2' = sinh phi,  phi' = (gamma1 sinh phi - gamma2 cosh phi) / 2.

Since ``gamma1' >= 1`` the curve is a global graph ``y = f(x)`` over the
space-like axis, with ``p = f' = tanh phi`` and ``f'' = (1 - p^2)(x p - f) / 2``.
Higher derivatives of ``f`` follow by differentiating this relation, so the
graph jets are analytic in the dense ODE solution.

Cylinders ``Gamma x R^k`` and products ``Gamma_1 x Gamma_2`` are again
shrinkers because mean curvature and normal position split blockwise.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PPoly

from .ambient import Signature
from .errors import ChartError, IntegrationError
from .graph import Jet, SpacelikeGraph

PHI_MAX = float(np.arctanh(0.999))
WINDOW_SLOPE = 0.95
_DENSE_DEGREE = 7


def shrinker_rhs(s, y):
    g1, g2, phi = y
    ch, sh = np.cosh(phi), np.sinh(phi)
    return np.array([ch, sh, 0.5 * (g1 * sh - g2 * ch)])


def _null_approach(s, y):
    return abs(y[2]) - PHI_MAX


_null_approach.terminal = True


def _branch_to_ppoly(sol):
    """Exact piecewise-polynomial copy of a DOP853 dense output (degree 7 per step)."""
    u = 0.5 + 0.5 * np.cos(np.pi * (2 * np.arange(_DENSE_DEGREE + 1) + 1) / (2 * _DENSE_DEGREE + 2))
    V = np.vander(u, _DENSE_DEGREE + 1)
    pieces = []
    for interp in sol.interpolants:
        a, b = sorted((interp.t_old, interp.t))
        h = b - a
        Y = interp(a + u * h)
        c = np.linalg.solve(V, Y.T)
        c = c / (h ** np.arange(_DENSE_DEGREE, -1, -1))[:, None]
        pieces.append((a, b, c))
    return pieces


def _merge_pieces(pieces):
    pieces = sorted(pieces, key=lambda p: p[0])
    breaks = [pieces[0][0]] + [p[1] for p in pieces]
    c = np.stack([p[2] for p in pieces], axis=1)
    return PPoly(c, np.asarray(breaks), extrapolate=False)


@dataclass
class ShrinkerCurve:
    """Arc-length shrinker curve ``s -> (gamma1, gamma2, phi)`` with exact dense output.

    ``residual2`` holds ``(phi' - (gamma1 sinh phi - gamma2 cosh phi)/2)^2`` at
    the samples, evaluated with the derivative of the dense interpolant.
    """

    s: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    residual2: np.ndarray
    tol: float
    start: tuple
    phi0: float
    s_range: tuple
    truncated: tuple = (False, False)
    dense: Optional[PPoly] = field(default=None, repr=False)

    def __call__(self, s):
        """``(gamma1, gamma2, phi)`` at arclength ``s`` (array-valued, last axis 3)."""
        return self.dense(s)

    def defect2(self, s):
        """Squared ODE defect of the dense solution at arbitrary ``s``."""
        y = self.dense(s)
        dphi = self.dense.derivative()(s)[..., 2]
        g1, g2, phi = y[..., 0], y[..., 1], y[..., 2]
        return (dphi - 0.5 * (g1 * np.sinh(phi) - g2 * np.cosh(phi))) ** 2

    @property
    def s_min(self) -> float:
        return float(self.dense.x[0])

    @property
    def s_max(self) -> float:
        return float(self.dense.x[-1])

    @property
    def sup_residual2(self) -> float:
        return float(np.max(self.residual2))

    def z(self, s):
        y = self.dense(s)
        return y[..., 0] ** 2 - y[..., 1] ** 2

    def s_of_x(self, x, iters=4):
        """Invert ``x = gamma1(s)`` (strictly increasing, ``gamma1' = cosh phi``) by Newton."""
        x = np.asarray(x, dtype=float)
        table_s = self.dense.x
        if not hasattr(self, "_table_x"):
            self._table_x = self.dense(table_s)[:, 0]
        s = np.interp(x, self._table_x, table_s)
        for _ in range(iters):
            y = self.dense(np.clip(s, table_s[0], table_s[-1]))
            s = s - (y[..., 0] - x) / np.cosh(y[..., 2])
        return s

    def window(self, slope: float = WINDOW_SLOPE):
        """Largest s-interval around 0 on which ``|tanh phi| < slope``."""
        lim = np.arctanh(slope)
        grid = np.linspace(self.s_min, self.s_max, 4001)
        ok = np.abs(self.dense(grid)[:, 2]) < lim
        i0 = int(np.argmin(np.abs(grid)))
        if not ok[i0]:
            raise ChartError("curve is not graphical at its start point within the slope window")
        lo = i0
        while lo > 0 and ok[lo - 1]:
            lo -= 1
        hi = i0
        while hi < grid.size - 1 and ok[hi + 1]:
            hi += 1
        return float(grid[lo]), float(grid[hi])

    def x_window(self, slope: float = WINDOW_SLOPE):
        a, b = self.window(slope)
        return float(self.dense(a)[0]), float(self.dense(b)[0])

    def z_minimum(self):
        """``(s*, z*)`` at the unique minimum of z (z is convex in s, z'' = 2 + v^2)."""
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(lambda t: float(self.z(t)), bounds=(self.s_min, self.s_max), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x), float(res.fun)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s", "gamma1", "gamma2", "phi", "residual2"])
            for row in zip(self.s, self.gamma[:, 0], self.gamma[:, 1], self.phi, self.residual2):
                wr.writerow([format(float(v), ".17g") for v in row])


def integrate_shrinker_curve(start=(2.0, 0.0), phi0=0.5, s_range=(-5.0, 3.0), tol=1e-11, samples=401):
    """Integrate the shrinker ODE from ``s = 0`` in both directions of ``s_range``.

    Integration uses DOP853 with ``rtol = atol = tol`` and stops early if
    ``|phi|`` reaches ``artanh(0.999)`` (the curve is running off towards the
    light cone); such ends are reported in ``truncated``.

    Raises
    ------
    IntegrationError
        If the step size collapses before the interval (or the null cap) is reached.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-13, 1e-6], got {tol}")
    s_lo, s_hi = float(min(s_range)), float(max(s_range))
    if not (np.isfinite(s_lo) and np.isfinite(s_hi)):
        raise ValueError("s_range must be finite")
    y0 = np.array([start[0], start[1], phi0], dtype=float)
    pieces, truncated = [], [False, False]
    for side, end in ((0, s_lo), (1, s_hi)):
        if end == 0.0:
            continue
        sol = solve_ivp(shrinker_rhs, (0.0, end), y0, method="DOP853", rtol=tol, atol=tol,
                        dense_output=True, events=_null_approach)
        if sol.status == -1:
            raise IntegrationError(f"integration failed: {sol.message}", last_s=float(sol.t[-1]))
        truncated[side] = sol.status == 1
        pieces += _branch_to_ppoly(sol.sol)
    if not pieces:
        raise ValueError("s_range must have positive length")
    dense = _merge_pieces(pieces)
    s = np.linspace(dense.x[0], dense.x[-1], samples)
    Y = dense(s)
    curve = ShrinkerCurve(
        s=s, gamma=Y[:, :2], phi=Y[:, 2], residual2=np.zeros_like(s), tol=tol,
        start=(float(start[0]), float(start[1])), phi0=float(phi0), s_range=(s_lo, s_hi),
        truncated=tuple(truncated), dense=dense,
    )
    curve.residual2 = curve.defect2(s)
    return curve


# -- graph adapters ---------------------------------------------------------


def curve_graph_jets(x, f, p, order=4):
    """Derivatives of a shrinker-curve graph from the point data ``(x, f, f')``.

    Works elementwise on arrays.  Returns ``[f, f', f'', f''', f'''']`` up to
    ``order``.
    """
    A = 1.0 - p**2
    B = x * p - f
    q = 0.5 * A * B
    out = [f, p, q]
    if order >= 3:
        A1 = -2.0 * p * q
        B1 = x * q
        q1 = 0.5 * (A1 * B + A * B1)
        out.append(q1)
        if order >= 4:
            A2 = -2.0 * q**2 - 2.0 * p * q1
            B2 = q + x * q1
            out.append(0.5 * (A2 * B + 2.0 * A1 * B1 + A * B2))
    return out[: order + 1]


def graph_taylor(x0, f0, p0, order=18):
    """Taylor coefficients in ``t = x - x0`` of the graph solution through ``(x0, f0, p0)``.

    Solves ``f'' = (1 - f'^2)(x f' - f) / 2`` term by term with truncated
    power-series arithmetic, so the polynomial is smooth to round-off.
    """
    a = np.zeros(order + 1)
    a[0], a[1] = f0, p0
    for k in range(order - 1):
        m = k + 1
        F = a[:m]
        P = np.arange(1, m + 1) * a[1 : m + 1]
        X = np.zeros(m)
        X[0] = x0
        if m > 1:
            X[1] = 1.0
        PP = np.convolve(P, P)[:m]
        one = -PP
        one[0] += 1.0
        B = np.convolve(X, P)[:m] - F
        rhs = 0.5 * np.convolve(one, B)[:m]
        a[k + 2] = rhs[k] / ((k + 2) * (k + 1))
    return a


class CurveGraph(SpacelikeGraph):
    """A shrinker curve as the graph ``y = f(x)`` in R^2_1, restricted to a slope window.

    A graph returned by :meth:`localized` replaces the dense ODE output by
    the Taylor polynomial of the exact solution through one point of it.
    The dense output is only continuous in its higher derivatives up to the
    integrator's local error, which finite-difference stencils would see.
    """

    def __init__(self, curve: ShrinkerCurve, slope: float = WINDOW_SLOPE, name="curve", taylor=None, domain=None):
        self.curve = curve
        self.slope = slope
        self.taylor = taylor
        super().__init__(Signature(1, 1), provider=self._jet, domain=domain or curve.x_window(slope), name=name)

    def localized(self, x0, radius=0.1, order=18):
        x0 = float(np.asarray(x0).reshape(-1)[0])
        f0, p0 = self.point_data(x0)
        coef = graph_taylor(x0, float(f0), float(p0), order)
        lo, hi = self.domain[0][0], self.domain[1][0]
        dom = (max(lo, x0 - radius), min(hi, x0 + radius))
        return CurveGraph(self.curve, self.slope, self.name, taylor=(x0, coef), domain=dom)

    def point_data(self, x):
        if self.taylor is not None:
            x0, coef = self.taylor
            t = np.asarray(x, dtype=float) - x0
            P = np.polynomial.polynomial
            return P.polyval(t, coef), P.polyval(t, P.polyder(coef))
        s = self.curve.s_of_x(x)
        y = self.curve(s)
        return y[..., 1], np.tanh(y[..., 2])

    def _jet(self, x, order):
        f, p = self.point_data(x[0])
        d = curve_graph_jets(x[0], f, p, order)
        shapes = [(1,), (1, 1), (1, 1, 1), (1, 1, 1, 1), (1,) * 5]
        arrs = [np.full(shapes[r], float(v)) for r, v in enumerate(d)]
        return Jet(*arrs)

    def batch_jets(self, x, order=2):
        x = np.asarray(x, dtype=float)
        f, p = self.point_data(x)
        return curve_graph_jets(x, f, p, order)

    def batch_immersion(self, points, order=2):
        x = np.asarray(points, dtype=float).reshape(-1)
        d = self.batch_jets(x, max(order, 1))
        out = [np.stack([x, d[0]], axis=1), np.stack([np.ones_like(x), d[1]], axis=1)[:, :, None]]
        if order >= 2:
            out.append(np.stack([np.zeros_like(x), d[2]], axis=1)[:, :, None, None])
        return out[: order + 1]

    def sublevel_x(self, level):
        """x-interval of ``{z < level}`` clipped to the domain (z is convex along the curve)."""
        from scipy.optimize import brentq

        lo, hi = self.domain[0][0], self.domain[1][0]
        s_star, z_star = self.curve.z_minimum()
        if level <= z_star:
            return None
        c = self.curve
        s_lo, s_hi = c.s_of_x(lo), c.s_of_x(hi)
        s_star = min(max(s_star, s_lo), s_hi)
        f = lambda t: float(c.z(t)) - level
        a = s_lo if f(s_lo) < 0 else brentq(f, s_lo, s_star, xtol=1e-12)
        b = s_hi if f(s_hi) < 0 else brentq(f, s_star, s_hi, xtol=1e-12)
        return float(c(a)[0]), float(c(b)[0])

    def chart_box(self, r, pad=1.02):
        """x-interval of ``{z < (pad r)^2}`` inside the slope window."""
        xs = self.sublevel_x((pad * r) ** 2)
        if xs is None:
            raise ValueError(f"D_r is empty for r={r}")
        return np.array([xs[0]]), np.array([xs[1]])


class _ProductGraph(SpacelikeGraph):
    """``f(x) = (f_1(x_{I_1}), ..., f_k(x_{I_k}))`` with flat coordinates allowed.

    ``factors`` is a list of CurveGraph; factor ``c`` uses chart coordinate
    ``coord[c]`` and time slot ``c``.  Any other chart coordinate is flat.
    """

    def __init__(self, sig, factors, coords, name):
        self.factors = factors
        self.coords = coords
        lo = np.full(sig.n, -np.inf)
        hi = np.full(sig.n, np.inf)
        for fac, i in zip(factors, coords):
            lo[i], hi[i] = fac.domain[0][0], fac.domain[1][0]
        super().__init__(sig, provider=self._jet, domain=(lo, hi), name=name)

    def localized(self, x0, radius=0.1):
        """Same product with every curve factor replaced by its Taylor model at ``x0``."""
        x0 = np.asarray(x0, dtype=float)
        g = _ProductGraph(self.sig, [fac.localized(x0[i], radius) for fac, i in zip(self.factors, self.coords)],
                          self.coords, self.name)
        return g

    def chart_box(self, r, pad=1.02):
        """Bounding box of ``{z < (pad r)^2}``.

        Each curve factor gets the sublevel of ``(pad r)^2`` minus the minima
        of the other factors; flat directions get ``|y| < pad sqrt(r^2 - sum min z_c)``.
        """
        lo, hi = self.domain[0].copy(), self.domain[1].copy()
        mins = [fac.curve.z_minimum()[1] for fac in self.factors]
        zmin = sum(mins)
        level = (pad * r) ** 2
        for c, (fac, i) in enumerate(zip(self.factors, self.coords)):
            xs = fac.sublevel_x(level - (zmin - mins[c]))
            if xs is None:
                raise ValueError(f"D_r is empty for r={r}")
            lo[i], hi[i] = xs
        half = pad * np.sqrt(max(r**2 - zmin, 0.0)) + 1e-9
        flat = ~np.isfinite(lo)
        lo[flat], hi[flat] = -half, half
        return lo, hi

    def _jet(self, x, order):
        n, m = self.sig.n, self.sig.m
        arrs = [np.zeros((m,) + (n,) * r) for r in range(order + 1)]
        for a, (fac, i) in enumerate(zip(self.factors, self.coords)):
            d = fac.batch_jets(np.array([x[i]]), order)
            for r in range(order + 1):
                arrs[r][(a,) + (i,) * r] = d[r][0]
        arrs += [None] * (5 - len(arrs))
        return Jet(*arrs)

    def batch_immersion(self, points, order=2):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        n, m = self.sig.n, self.sig.m
        npts = P.shape[0]
        f = np.zeros((npts, m))
        d1 = np.zeros((npts, m, n))
        d2 = np.zeros((npts, m, n, n))
        for a, (fac, i) in enumerate(zip(self.factors, self.coords)):
            d = fac.batch_jets(P[:, i], 2)
            f[:, a], d1[:, a, i], d2[:, a, i, i] = d[0], d[1], d[2]
        out = [np.hstack([P, f]), np.concatenate([np.broadcast_to(np.eye(n), (npts, n, n)), d1], axis=1)]
        if order >= 2:
            out.append(np.concatenate([np.zeros((npts, n, n, n)), d2], axis=1))
        return out[: order + 1]


@dataclass
class LiftedShrinker:
    """A shrinker built from curves, together with its graph adapter."""

    base: tuple
    kind: str
    graph: SpacelikeGraph
    k: int = 0

    @property
    def sig(self):
        return self.graph.sig

    @property
    def base_sup_residual2(self) -> float:
        return max(c.sup_residual2 for c in self.base)


def curve_shrinker(curve: ShrinkerCurve, slope: float = WINDOW_SLOPE) -> LiftedShrinker:
    """The curve itself as a one-dimensional graph."""
    return LiftedShrinker(base=(curve,), kind="curve", graph=CurveGraph(curve, slope))


def cylinder_lift(curve: ShrinkerCurve, k: int = 1, slope: float = WINDOW_SLOPE) -> LiftedShrinker:
    """``Gamma x R^k`` in R^{(1+k)+1}_1; the first chart coordinate follows the curve."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    sig = Signature(1 + k, 1)
    g = _ProductGraph(sig, [CurveGraph(curve, slope)], [0], name=f"cylinder_k{k}")
    return LiftedShrinker(base=(curve,), kind="cylinder", graph=g, k=k)


def product_shrinker(c1: ShrinkerCurve, c2: ShrinkerCurve, slope: float = WINDOW_SLOPE) -> LiftedShrinker:
    """``Gamma_1 x Gamma_2`` in R^4_2 with block-diagonal (flat) normal bundle."""
    sig = Signature(2, 2)
    g = _ProductGraph(sig, [CurveGraph(c1, slope), CurveGraph(c2, slope)], [0, 1], name="product")
    return LiftedShrinker(base=(c1, c2), kind="product", graph=g)


def standard_suite(tol: float = 1e-11):
    """The curve from (2, 0) with phi0 = 0.5, its k = 1 cylinder and a product with a second curve."""
    c1 = integrate_shrinker_curve((2.0, 0.0), 0.5, (-5.0, 3.0), tol)
    c2 = integrate_shrinker_curve((1.5, 0.2), -0.2, (-5.0, 5.0), tol)
    return {
        "curve": curve_shrinker(c1),
        "cylinder": cylinder_lift(c1, 1),
        "product": product_shrinker(c1, c2),
    }
