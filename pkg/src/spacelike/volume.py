"""Volumes and Gaussian functionals over pseudo-distance sublevels ``D_r = {z < r^2}``.

Integrals are computed in the parameter chart: a box is split into base
cells, each carrying a tensor Gauss-Legendre rule with weights ``sqrt(det g)``.
Cells cut by ``z = r^2`` are bisected until the total volume of cut cells is
below ``rel_tol`` of the running total (or ``max_depth`` is hit); the
remaining cut cells use the indicator of ``z < r^2`` at their nodes.

All reductions use ``math.fsum`` over a fixed node order, so results are
reproducible bit for bit.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .graph import batch_chart, batch_scalars, hess_z, point_geometry, residual_norm2
from .errors import NotAShrinkerError

SHRINKER_GATE = 1e-8


@dataclass(frozen=True)
class RegionSpec:
    """``D_r`` inside the chart box ``[lo, hi]`` with quadrature settings."""

    r: float
    lo: tuple
    hi: tuple
    cells: int = 64
    order: int = 4
    max_depth: int = 8
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if len(self.lo) != len(self.hi) or any(b <= a for a, b in zip(self.lo, self.hi)):
            raise ValueError("chart box must satisfy lo < hi componentwise")

    def with_r(self, r):
        return RegionSpec(r, self.lo, self.hi, self.cells, self.order, self.max_depth, self.rel_tol)


def region_for(graph, r, cells=64, order=4, max_depth=8, rel_tol=1e-3, pad=1.02) -> RegionSpec:
    """Default chart box covering ``D_r``.

    Uses ``graph.chart_box(r)`` when the graph provides one, otherwise the
    graph's (finite) domain.
    """
    if hasattr(graph, "chart_box"):
        lo, hi = graph.chart_box(r, pad)
    elif graph.domain is not None and np.all(np.isfinite(graph.domain[0])) and np.all(np.isfinite(graph.domain[1])):
        lo, hi = graph.domain
    else:
        raise ValueError(f"graph {graph.name} has no finite chart box; pass a RegionSpec explicitly")
    return RegionSpec(float(r), tuple(map(float, lo)), tuple(map(float, hi)), cells, order, max_depth, rel_tol)


@dataclass
class QuadratureNodes:
    """Nodes of ``D_r`` with measure weights ``w = GL weight * cell volume * sqrt(det g)``."""

    points: np.ndarray
    weights: np.ndarray
    z: np.ndarray
    region: RegionSpec
    uncertainty: float
    depth: int
    chart_ok: bool = True
    message: str = ""
    _scalars: Optional[dict] = field(default=None, repr=False)

    def integrate(self, values) -> float:
        return math.fsum(np.asarray(values, dtype=float) * self.weights)

    def scalars(self, graph) -> dict:
        if self._scalars is None:
            if self.points.shape[0] == 0:
                self._scalars = {k: np.zeros(0) for k in ("z", "sqrt_det_g", "B2", "H2", "P2", "X2", "min_eig")}
            else:
                self._scalars = batch_scalars(graph, self.points)
        return self._scalars


def _gl_rule(order, n):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1), np.prod([g.ravel() for g in wgrids], axis=0)


def _corners(n):
    return np.array(np.meshgrid(*([[0.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T


def region_nodes(graph, region: RegionSpec) -> QuadratureNodes:
    """Quadrature nodes of ``D_r`` with boundary-cell refinement (memoized per graph and region)."""
    return _region_nodes_cached(graph, region)


@lru_cache(maxsize=12)
def _region_nodes_cached(graph, region):
    return _build_region_nodes(graph, region)


def _build_region_nodes(graph, region: RegionSpec) -> QuadratureNodes:
    n = graph.sig.n
    lo = np.asarray(region.lo, dtype=float)
    hi = np.asarray(region.hi, dtype=float)
    r2 = region.r**2
    xi, wq = _gl_rule(region.order, n)
    cor = _corners(n)
    size = (hi - lo) / region.cells
    idx = np.array(np.meshgrid(*([np.arange(region.cells)] * n), indexing="ij")).reshape(n, -1).T
    cells = lo + idx * size

    kept_pts, kept_w, kept_z = [], [], []
    chart_ok, message = True, ""
    depth = 0
    uncertainty = 0.0
    inside_total = 0.0
    while True:
        nc = cells.shape[0]
        pts = (cells[:, None, :] + xi[None] * size).reshape(-1, n)
        z, sg = batch_chart(graph, pts)
        bad = ~(sg > 0) | ~np.isfinite(z)
        if np.any(bad):
            chart_ok = False
            message = f"metric degenerate at {int(bad.sum())} nodes"
            sg = np.where(bad, 0.0, sg)
            z = np.where(bad, np.inf, z)
        z = z.reshape(nc, -1)
        w = (sg * np.tile(wq, nc)).reshape(nc, -1) * np.prod(size)
        cz, _ = batch_chart(graph, (cells[:, None, :] + cor[None] * size).reshape(-1, n))
        cz = cz.reshape(nc, -1)
        allz = np.concatenate([z, cz], axis=1)
        inside = np.all(allz < r2, axis=1)
        mixed = ~inside & np.any(allz < r2, axis=1)
        for sel in (inside,):
            kept_pts.append(pts.reshape(nc, -1, n)[sel].reshape(-1, n))
            kept_w.append(w[sel].ravel())
            kept_z.append(z[sel].ravel())
        inside_total += math.fsum(w[inside].ravel())
        mixed_vol = math.fsum(w[mixed].ravel())
        mixed_est = math.fsum(w[mixed][z[mixed] < r2])
        uncertainty = mixed_vol
        total = inside_total + mixed_est
        if mixed.sum() == 0 or depth >= region.max_depth or mixed_vol <= region.rel_tol * max(total, 1e-300):
            m = z[mixed] < r2
            kept_pts.append(pts.reshape(nc, -1, n)[mixed][m].reshape(-1, n))
            kept_w.append(w[mixed][m].ravel())
            kept_z.append(z[mixed][m].ravel())
            break
        size = size / 2.0
        parents = cells[mixed]
        cells = (parents[:, None, :] + cor[None] * size).reshape(-1, n)
        depth += 1
    return QuadratureNodes(
        points=np.concatenate(kept_pts) if kept_pts else np.zeros((0, n)),
        weights=np.concatenate(kept_w),
        z=np.concatenate(kept_z),
        region=region,
        uncertainty=uncertainty,
        depth=depth,
        chart_ok=chart_ok,
        message=message,
    )


@dataclass
class VolumeResult:
    value: float
    uncertainty: float
    chart_ok: bool
    message: str = ""


def volume(graph, region: RegionSpec, weight_alpha: Optional[float] = None, nodes=None) -> VolumeResult:
    """``int_{D_r} exp(-alpha z) dmu`` (``alpha = None`` or 0 gives V(r))."""
    nodes = nodes or region_nodes(graph, region)
    alpha = weight_alpha or 0.0
    val = nodes.integrate(np.exp(-alpha * nodes.z))
    return VolumeResult(val, nodes.uncertainty, nodes.chart_ok, nodes.message)


# -- Gaussian functional ----------------------------------------------------


def gaussian_functional(graph, region: RegionSpec, t: float, nodes=None) -> float:
    """``F_t(D_r) = (4 pi t)^{-n/2} int_{D_r} exp(-z / 4t) dmu``."""
    if t <= 0:
        raise ValueError("t must be positive")
    nodes = nodes or region_nodes(graph, region)
    n = graph.sig.n
    return nodes.integrate(np.exp(-nodes.z / (4.0 * t))) / (4.0 * np.pi * t) ** (n / 2)


def gaussian_functional_dt(graph, region: RegionSpec, t: float, nodes=None, method="fd", dt=1e-4) -> float:
    """t-derivative of ``F_t(D_r)`` at fixed region.

    ``method="fd"`` differences ``F_{t +- dt}`` on one node set; ``"analytic"``
    integrates ``(4 pi)^{-n/2} t^{-(n/2+1)} (-n/2 + z/4t) exp(-z/4t)``.
    """
    nodes = nodes or region_nodes(graph, region)
    n = graph.sig.n
    if method == "fd":
        return (gaussian_functional(graph, region, t + dt, nodes) - gaussian_functional(graph, region, t - dt, nodes)) / (2 * dt)
    if method == "analytic":
        vals = (-n / 2 + nodes.z / (4 * t)) * np.exp(-nodes.z / (4 * t))
        return nodes.integrate(vals) * (4 * np.pi) ** (-n / 2) * t ** (-(n / 2 + 1))
    raise ValueError(f"unknown method {method!r}")


def gaussian_functional_dr(graph, region: RegionSpec, t: float, dr=1e-2) -> float:
    """r-derivative of ``F_t(D_r)`` by central differences of the region radius."""
    lo = gaussian_functional(graph, region.with_r(region.r - dr), t)
    hi = gaussian_functional(graph, region.with_r(region.r + dr), t)
    return (hi - lo) / (2 * dr)


@dataclass
class MonotonicityReport:
    r: float
    ts: np.ndarray
    F: np.ndarray
    dF_fd: np.ndarray
    dF_analytic: np.ndarray

    @property
    def max_derivative(self) -> float:
        return float(np.max(self.dF_fd))

    def passed(self, tol=1e-8) -> bool:
        return self.max_derivative <= tol


def monotonicity_check(graph, region: RegionSpec, ts=None) -> MonotonicityReport:
    """F_t and its t-derivative on a t-grid (default 0.1, 0.2, ..., 1.0)."""
    ts = np.round(np.arange(1, 11) * 0.1, 12) if ts is None else np.asarray(ts, dtype=float)
    nodes = region_nodes(graph, region)
    F = np.array([gaussian_functional(graph, region, t, nodes) for t in ts])
    dfd = np.array([gaussian_functional_dt(graph, region, t, nodes, "fd") for t in ts])
    dan = np.array([gaussian_functional_dt(graph, region, t, nodes, "analytic") for t in ts])
    return MonotonicityReport(region.r, ts, F, dfd, dan)


# -- growth tables and the doubling lemma -----------------------------------


@dataclass
class GrowthTable:
    """V(r) and the weighted volume ``int_{D_r} exp(-z/4)`` on a list of radii."""

    r: np.ndarray
    V: np.ndarray
    weighted_V: np.ndarray
    C1: Optional[float] = None
    C3: Optional[float] = None

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "V", "weighted_V"])
            for row in zip(self.r, self.V, self.weighted_V):
                wr.writerow([format(float(v), ".17g") for v in row])


def growth_table(graph, r_values, region_factory=None, **region_kw) -> GrowthTable:
    region_factory = region_factory or (lambda r: region_for(graph, r, **region_kw))
    V, WV = [], []
    for r in r_values:
        nodes = region_nodes(graph, region_factory(r))
        V.append(nodes.integrate(np.ones_like(nodes.z)))
        WV.append(nodes.integrate(np.exp(-nodes.z / 4.0)))
    return GrowthTable(np.asarray(r_values, dtype=float), np.array(V), np.array(WV))


@dataclass
class DoublingReport:
    """Fit of the doubling hypothesis and of the resulting growth bound.

    Margins are logarithmic: ``log(bound) - log(V)``.
    """

    n: int
    C1: float
    C2: float
    C3: float
    radii: np.ndarray
    hypothesis_margins: np.ndarray
    bound_margins: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.hypothesis_margins > 0) and np.all(self.bound_margins > 0))

    def to_json(self) -> str:
        from .io import dumps

        return dumps({
            "n": self.n, "C1": self.C1, "C2": self.C2, "C3": self.C3,
            "radii": self.radii.tolist(),
            "hypothesis_margins": self.hypothesis_margins.tolist(),
            "bound_margins": self.bound_margins.tolist(),
            "pass": self.passed,
        })


def doubling_check(table: GrowthTable, n: int, C2: Optional[float] = None, chain=200) -> DoublingReport:
    """Check ``V(r) <= C1 r^n V(r/2)`` and ``V(r) <= C3 exp(2n (log r)^2)``.

    The table radii must contain a doubling ladder ``C2, 2 C2, 4 C2, ...``
    (with ``C2 > 1``) together with ``C2 / 2``.  ``C1`` is the smallest power
    of two strictly above the worst observed ratio.  ``C3`` is the constant
    produced by iterating the hypothesis from ``C2``,
    ``sup_j C1^j prod_{i=1..j} (C2 2^i)^n V(C2) / exp(2n (log C2 2^j)^2)``,
    rounded up to the next power of two, so it depends only on ``n, C1, C2, V(C2)``.
    """
    r = np.asarray(table.r, dtype=float)
    V = np.asarray(table.V, dtype=float)
    lookup = {float(np.round(x, 12)): v for x, v in zip(r, V)}
    if C2 is None:
        C2 = float(np.min(r[r > 1.0]))
    if C2 <= 1.0:
        raise ValueError("C2 must exceed 1")
    ladder = []
    rr = C2
    while float(np.round(rr, 12)) in lookup and float(np.round(rr / 2, 12)) in lookup:
        ladder.append(rr)
        rr *= 2.0
    if len(ladder) < 4:
        raise ValueError(f"need at least 4 doubling pairs starting at C2={C2}, found {len(ladder)}")
    ladder = np.array(ladder)
    Vr = np.array([lookup[float(np.round(x, 12))] for x in ladder])
    Vh = np.array([lookup[float(np.round(x / 2, 12))] for x in ladder])
    if np.any(Vh <= 0) or np.any(Vr <= 0):
        raise ValueError("volumes on the ladder must be positive")
    log_ratio = np.log(Vr) - n * np.log(ladder) - np.log(Vh)
    C1 = 2.0 ** (math.floor(np.max(log_ratio) / math.log(2.0)) + 1)
    hyp = math.log(C1) + n * np.log(ladder) + np.log(Vh) - np.log(Vr)

    j = np.arange(chain + 1)
    log_chain = j * math.log(C1) + n * (j * math.log(C2) + math.log(2.0) * j * (j + 1) / 2) + math.log(Vr[0])
    sup_chain = float(np.max(log_chain - 2 * n * (math.log(C2) + j * math.log(2.0)) ** 2))
    # smallest power of two strictly above the chain supremum, as for C1
    log_C3 = (math.floor(sup_chain / math.log(2.0)) + 1) * math.log(2.0)
    bound = log_C3 + 2 * n * np.log(ladder) ** 2 - np.log(Vr)
    table.C1, table.C3 = C1, math.exp(log_C3)
    return DoublingReport(n, C1, C2, math.exp(log_C3), ladder, hyp, bound)


@dataclass
class CauchyReport:
    alpha: float
    r: np.ndarray
    integrals: np.ndarray
    increments: np.ndarray
    limit: float
    passed: bool


def cauchy_check(graph, r_values, alpha, region_factory=None, ratio=0.5, floor=1e-12, **region_kw) -> CauchyReport:
    """``int_{D_r} exp(-alpha z)`` over doubling radii; the tail must contract geometrically.

    The increments may grow while ``D_r`` still gains volume faster than the
    weight decays.  From the largest increment on they must not increase, and
    the last two must each be at most ``ratio`` times their predecessor
    (increments below ``floor * |I|`` count as zero).
    The limit is the last value plus a geometric tail estimate.
    """
    region_factory = region_factory or (lambda r: region_for(graph, r, **region_kw))
    I = np.array([volume(graph, region_factory(r), alpha).value for r in r_values])
    d = np.abs(np.diff(I))
    tiny = floor * max(abs(I[-1]), 1e-300)
    d = np.where(d > tiny, d, 0.0)
    peak = int(np.argmax(d)) if d.size else 0
    ok = d.size >= 3 and bool(np.all(np.diff(d[peak:]) <= 0))
    for a, b in zip(d[-3:-1], d[-2:]):
        if b > ratio * a:
            ok = False
    tail = 0.0
    if d.size >= 2 and d[-2] > tiny and d[-1] < d[-2]:
        q = d[-1] / d[-2]
        tail = d[-1] * q / (1 - q)
    return CauchyReport(alpha, np.asarray(r_values, float), I, d, float(I[-1] + np.sign(I[-1] - I[0]) * tail), ok)


# -- Bakry-Emery ------------------------------------------------------------


def bakry_emery_check(graph, x, gate=SHRINKER_GATE) -> float:
    """``lambda_min(Ric_f - g/2)`` with ``f = z/4``, in the orthonormal frame.

    ``Ric_ij = <H, B_ij> - sum_k <B_ik, B_jk>`` from the Gauss equation and
    ``Hess f = Hess z / 4``.
    """
    geom = point_geometry(graph, x)
    res = math.sqrt(max(residual_norm2(graph, x, geom), 0.0))
    if res >= gate:
        raise NotAShrinkerError(f"shrinker residual {res:.3e} at x={np.asarray(x)} exceeds {gate:g}", worst_residual=res)
    h, Hc = geom.h, geom.Hcomp
    ric = -np.einsum("a,aij->ij", Hc, h) + np.einsum("aik,ajk->ij", h, h)
    M = ric + 0.25 * hess_z(graph, x, geom) - 0.5 * np.eye(graph.sig.n)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
