"""Rescaled mean curvature flow of space-like graphs on a grid.

The graph ``f: box -> R^m`` over the centered box ``[-L/2, L/2]^n`` evolves by

    df/dtau = g^{ij} f_ij + (f - x^i f_i) / 2,    g = I - Df^T Df,

which is the normal speed ``H + F^N/2`` of the graph written in graph
coordinates (the tangential part of ``Delta_g F`` has been removed).  Stationary
states are exactly the self-shrinkers, and affine graphs ``f = A x`` are fixed.

The state is stored as ``f = A x + u``.  The dilation term transports
information outward, so the box edges are outflow boundaries; a ghost layer
obtained by quadratic extrapolation closes the central stencils there.  The
linearized operator then keeps the continuum spectrum ``1/2, 0, -1/2, ...``
of the polynomial modes (translation, tilt, curvature).

Explicit Euler is stable for

    dt <= 1 / (2 n / (lambda_min dx^2) + n L / (4 dx)),

the first term from the diffusion (``g^{-1} <= I / lambda_min``), the second
a CFL bound for the transport speed ``|x| / 2 <= L / 4``.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ambient import Signature
from .errors import FlowHalt, NotSpacelikeError

MIN_EIG = 0.05
DEFAULT_L = 2.0 * math.pi


def _pad(u, axes):
    """Add one ghost layer on each side of ``axes`` by quadratic extrapolation."""
    for ax in axes:
        u = np.moveaxis(u, ax, 0)
        lo = 3 * u[0] - 3 * u[1] + u[2]
        hi = 3 * u[-1] - 3 * u[-2] + u[-3]
        u = np.moveaxis(np.concatenate([lo[None], u, hi[None]]), 0, ax)
    return u


def _derivatives(u, dx, n):
    """Central first and second differences of ``u[alpha, *grid]``.

    Returns ``du[alpha, i, *grid]`` and ``d2u[alpha, i, j, *grid]``.
    """
    axes = list(range(1, n + 1))
    up = _pad(u, axes)
    core = tuple(slice(1, -1) for _ in range(n))

    def shifted(shifts):
        sl = [slice(None)]
        for k in range(n):
            s = shifts.get(k, 0)
            sl.append(slice(1 + s, up.shape[k + 1] - 1 + s))
        return up[tuple(sl)]

    c = up[(slice(None),) + core]
    du = np.stack([(shifted({i: 1}) - shifted({i: -1})) / (2 * dx) for i in range(n)], axis=1)
    d2 = np.empty(u.shape[:1] + (n, n) + u.shape[1:])
    for i in range(n):
        d2[:, i, i] = (shifted({i: 1}) - 2 * c + shifted({i: -1})) / dx**2
        for j in range(i + 1, n):
            mixed = (shifted({i: 1, j: 1}) - shifted({i: 1, j: -1}) - shifted({i: -1, j: 1}) + shifted({i: -1, j: -1}))
            d2[:, i, j] = d2[:, j, i] = mixed / (4 * dx**2)
    return du, d2


@dataclass(frozen=True)
class Diagnostics:
    sup_B: float
    sup_residual: float
    min_eig: float
    sup_H2: float
    sup_f: float


@dataclass(frozen=True)
class FlowState:
    """Graph ``f = A x + u`` sampled on ``(N+1)^n`` nodes of ``[-L/2, L/2]^n``.

    ``u`` has shape ``(m, N+1, ..., N+1)`` and ``A`` shape ``(m, n)``.
    """

    sig: Signature
    A: np.ndarray
    u: np.ndarray
    L: float = DEFAULT_L
    tau: float = 0.0
    steps: int = 0
    diagnostics: Optional[Diagnostics] = field(default=None, compare=False)

    @property
    def N(self) -> int:
        return self.u.shape[1] - 1

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L / 2, self.L / 2, self.N + 1)

    @property
    def x(self) -> np.ndarray:
        """Node coordinates, shape ``(n, N+1, ..., N+1)``."""
        return np.stack(np.meshgrid(*([self.axis] * self.sig.n), indexing="ij"))

    @property
    def f(self) -> np.ndarray:
        return np.einsum("ai,i...->a...", self.A, self.x) + self.u

    def with_diagnostics(self) -> "FlowState":
        return replace(self, diagnostics=diagnostics(self))


def _fields(state: FlowState):
    n, m = state.sig.n, state.sig.m
    du, d2 = _derivatives(state.u, state.dx, n)
    Df = du + state.A.reshape(m, n, *([1] * n))
    # grid axes first for batched linear algebra
    Df = np.moveaxis(Df, (0, 1), (-2, -1))
    d2 = np.moveaxis(d2, (0, 1, 2), (-3, -2, -1))
    du = np.moveaxis(du, (0, 1), (-2, -1))
    g = np.eye(n) - np.swapaxes(Df, -1, -2) @ Df
    K = np.eye(m) - Df @ np.swapaxes(Df, -1, -2)
    x = np.moveaxis(state.x, 0, -1)
    u = np.moveaxis(state.u, 0, -1)
    return Df, d2, du, g, K, x, u


def _speed(state: FlowState):
    Df, d2, du, g, K, x, u = _fields(state)
    eig = np.linalg.eigvalsh(g)
    lam = eig[..., 0]
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        return None, lam, (Df, d2, g, K, x, u, du)
    ginv = np.linalg.inv(g)
    H = np.einsum("...ij,...aij->...a", ginv, d2)
    drift = 0.5 * (u - np.einsum("...i,...ai->...a", x, du))
    return H + drift, lam, (Df, d2, g, K, x, u, du, ginv, H)


def diagnostics(state: FlowState) -> Diagnostics:
    """``sup|B|``, ``sup|H + F^N/2|``, ``min eig g``, ``sup|H|^2`` and ``sup|f|``."""
    speed, lam, parts = _speed(state)
    lam_min = float(np.min(lam)) if np.all(np.isfinite(lam)) else float("nan")
    sup_f = float(np.max(np.abs(state.f))) if state.u.size else 0.0
    if speed is None:
        return Diagnostics(float("nan"), float("nan"), lam_min, float("nan"), sup_f)
    Df, d2, g, K, x, u, du, ginv, H = parts
    Kinv = np.linalg.inv(K)
    # |B|^2 = g^ik g^jl f^a_ij K^-1_ab f^b_kl and |v|^2 = v^T K^-1 v for normal data v
    B2 = np.einsum("...ik,...jl,...aij,...ab,...bkl->...", ginv, ginv, d2, Kinv, d2)
    res2 = np.einsum("...a,...ab,...b->...", speed, Kinv, speed)
    H2 = np.einsum("...a,...ab,...b->...", H, Kinv, H)
    return Diagnostics(
        sup_B=float(np.sqrt(max(np.max(B2), 0.0))),
        sup_residual=float(np.sqrt(max(np.max(res2), 0.0))),
        min_eig=lam_min,
        sup_H2=float(np.max(H2)),
        sup_f=sup_f,
    )


def pseudo_distance(state: FlowState) -> np.ndarray:
    """``z = |x|^2 - |f|^2`` at the nodes."""
    return np.sum(state.x**2, axis=0) - np.sum(state.f**2, axis=0)


def curvature_growth_ratio(state: FlowState, alpha: float) -> float:
    """``sup |H|^2 e^{-alpha z}`` over the grid; at most 1 means ``|H|^2 <= e^{alpha z}``."""
    speed, lam, parts = _speed(state)
    if speed is None:
        return float("inf")
    H, K = parts[-1], parts[3]
    H2 = np.einsum("...a,...ab,...b->...", H, np.linalg.inv(K), H)
    return float(np.max(H2 * np.exp(-alpha * pseudo_distance(state))))


def stability_bound(state: FlowState, lam_min: Optional[float] = None) -> float:
    """Largest explicit step allowed by the diffusion and transport limits."""
    n = state.sig.n
    if lam_min is None:
        lam_min = diagnostics(state).min_eig
    dx = state.dx
    return 1.0 / (2 * n / (lam_min * dx**2) + n * state.L / (4 * dx))


def check_spacelike(state: FlowState, margin: float = MIN_EIG) -> float:
    """Raise ``NotSpacelikeError`` unless ``min eig g > margin`` on the whole grid."""
    lam = diagnostics(state).min_eig
    if not lam > margin:
        raise NotSpacelikeError(f"initial graph has metric eigenvalue {lam:.3e} <= {margin}", eigenvalue=lam)
    return lam


def step(state: FlowState, dt: float) -> FlowState:
    """One explicit Euler step of size ``dt``.

    Raises ``FlowHalt`` (carrying the offending state) when the new state has
    non-finite values or a metric eigenvalue at or below ``MIN_EIG``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    speed, lam, _ = _speed(state)
    if speed is None:
        raise FlowHalt("state is not space-like", state)
    new_u = state.u + dt * np.moveaxis(speed, -1, 0)
    new = replace(state, u=new_u, tau=state.tau + dt, steps=state.steps + 1, diagnostics=None)
    if not np.all(np.isfinite(new_u)):
        raise FlowHalt(f"non-finite values at tau={new.tau:.6g}", new)
    diag = diagnostics(new)
    if not diag.min_eig > MIN_EIG:
        raise FlowHalt(f"metric eigenvalue {diag.min_eig:.3e} fell below {MIN_EIG} at tau={new.tau:.6g}", new)
    return replace(new, diagnostics=diag)


# -- constructors -------------------------------------------------------------


def flat_state(sig: Signature, A=None, N: int = 32, L: float = DEFAULT_L) -> FlowState:
    """The affine graph ``f = A x`` (``A = 0`` by default)."""
    A = np.zeros((sig.m, sig.n)) if A is None else np.asarray(A, float).reshape(sig.m, sig.n)
    u = np.zeros((sig.m,) + (N + 1,) * sig.n)
    return FlowState(sig, A, u, L).with_diagnostics()


def state_from_function(sig: Signature, fun, A=None, N: int = 32, L: float = DEFAULT_L) -> FlowState:
    """``f = A x + fun(x)`` where ``fun`` maps node coordinates ``(n, ...)`` to ``(m, ...)``."""
    base = flat_state(sig, A, N, L)
    u = np.asarray(fun(base.x), float).reshape(base.u.shape)
    return replace(base, u=u).with_diagnostics()


def sine_perturbation(sig: Signature, eps: float, N: int = 32, L: float = DEFAULT_L, A=None) -> FlowState:
    """``f = A x + eps sin(2 pi x_1 / L)`` in every normal direction."""
    return state_from_function(sig, lambda x: eps * np.broadcast_to(np.sin(2 * np.pi * x[0] / L), (sig.m,) + x.shape[1:]), A, N, L)


def random_perturbation(sig: Signature, rng, eps: float = 0.02, modes: int = 2, tilt: float = 0.3,
                        N: int = 32, L: float = DEFAULT_L, symmetric: bool = False) -> FlowState:
    """Random tilt ``A`` plus a trigonometric perturbation of sup-amplitude ``<= eps``.

    With ``symmetric`` the perturbation depends on ``x_1`` only.
    """
    n, m = sig.n, sig.m
    A = rng.uniform(-1, 1, size=(m, n))
    A *= tilt * rng.uniform(0.2, 1.0) / max(np.linalg.norm(A, 2), 1e-300)

    def fun(x):
        out = np.zeros((m,) + x.shape[1:])
        for a in range(m):
            for _ in range(modes):
                k = rng.integers(1, 3, size=n)
                if symmetric:
                    k[1:] = 0
                phase = rng.uniform(0, 2 * np.pi)
                out[a] += rng.uniform(-1, 1) * np.cos(2 * np.pi * np.tensordot(k, x, axes=1) / L + phase)
        scale = np.max(np.abs(out))
        return out * (eps / scale) if scale > 0 else out

    return state_from_function(sig, fun, A, N, L)


# -- relaxation -------------------------------------------------------------


@dataclass
class RelaxReport:
    converged: bool
    affine: bool
    reason: str
    steps: int
    tau: float
    dt: float
    tol: float
    history: list = field(default_factory=list)

    @property
    def terminal_sup_B(self) -> float:
        return self.history[-1][1] if self.history else float("nan")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "sup_B", "sup_residual", "min_metric_eig"])
            for row in self.history:
                w.writerow([format(v, ".17g") for v in row])

    def as_dict(self):
        return {
            "converged": self.converged,
            "affine": self.affine,
            "reason": self.reason,
            "steps": self.steps,
            "tau": self.tau,
            "dt": self.dt,
            "tol": self.tol,
            "terminal_sup_B": self.terminal_sup_B,
        }


def relax_to_shrinker(initial: FlowState, tol: float = 1e-6, max_steps: int = 20000, dt: Optional[float] = None,
                      safety: float = 0.9, log_every: int = 10, tau_max: Optional[float] = None):
    """Run ``step`` until the graph is a shrinker or affine to ``tol``.

    Stops when ``sup|H + F^N/2| < tol`` or ``sup|B| < tol``.  The second test
    is needed because the translation mode grows like ``e^{tau/2}``: a plane
    pushed off the origin is affine but never a shrinker.  Non-convergence is
    reported, not raised; a halt from ``step`` is reported with
    ``reason="halt"``.

    Returns ``(state, report)``.
    """
    check_spacelike(initial)
    state = initial if initial.diagnostics is not None else initial.with_diagnostics()
    if dt is None:
        dt = safety * stability_bound(state, state.diagnostics.min_eig)
    hist = []

    def log(s):
        d = s.diagnostics
        hist.append((s.tau, d.sup_B, d.sup_residual, d.min_eig))

    log(state)

    def done(s):
        d = s.diagnostics
        if d.sup_residual < tol:
            return "shrinker"
        if d.sup_B < tol:
            return "affine"
        return None

    reason = done(state)
    while reason is None and state.steps - initial.steps < max_steps:
        if tau_max is not None and state.tau >= tau_max - 1e-15:
            reason = "tau_max"
            break
        h = dt if tau_max is None else min(dt, tau_max - state.tau)
        try:
            state = step(state, h)
        except FlowHalt as exc:
            state = exc.state
            if state.diagnostics is None:
                state = state.with_diagnostics()
            log(state)
            return state, RelaxReport(False, False, "halt", state.steps - initial.steps, state.tau, dt, tol, hist)
        if (state.steps - initial.steps) % log_every == 0:
            log(state)
        reason = done(state)
    if reason is None:
        reason = "budget"
    if hist[-1][0] != state.tau:
        log(state)
    d = state.diagnostics
    converged = reason in ("shrinker", "affine")
    return state, RelaxReport(converged, bool(d.sup_B < tol), reason, state.steps - initial.steps, state.tau, dt, tol, hist)


def resolution_check(make_state, N: int = 16, tau: float = 2.0):
    """Relative change of ``sup|B|`` at time ``tau`` when the grid spacing is halved.

    ``make_state(N)`` builds the initial state on an ``N``-cell grid.
    """
    out = []
    for k in (N, 2 * N):
        s, _ = relax_to_shrinker(make_state(k), tol=0.0, max_steps=10**7, tau_max=tau)
        out.append(s.diagnostics.sup_B)
    coarse, fine = out
    return abs(coarse - fine) / fine, coarse, fine


def write_grid_csv(state: FlowState, path):
    """Final state dump: one row per node with ``x_1..x_n, f_1..f_m``."""
    n, m = state.sig.n, state.sig.m
    x = state.x.reshape(n, -1)
    f = state.f.reshape(m, -1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"f{a + 1}" for a in range(m)])
        for k in range(x.shape[1]):
            w.writerow([format(v, ".17g") for v in np.concatenate([x[:, k], f[:, k]])])
