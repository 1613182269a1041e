"""Command-line front end.

Subcommands ``verify``, ``curve``, ``volume``, ``flow`` and ``grassmann``
write JSON reports and CSV tables into ``--out``.  Settings come from
defaults, then an optional ``key=value`` config file, then flags.

Exit codes: 0 success, 2 verification failure, 3 construction failure.
"""

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import __version__
from .ambient import Signature
from .errors import FlowHalt, GeometryError, IntegrationError, NotAShrinkerError
from .io import content_hash, dumps, write_json

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_BUILD = 3


@dataclass
class RunConfig:
    subcommand: str = "verify"
    n: Optional[int] = None
    m: Optional[int] = None
    tol_ode: float = 1e-11
    tol_geometry: float = 1e-10
    tol_identity: float = 1e-6
    samples: int = 50
    seed: int = 0
    out: str = "out"
    r_max: float = 10.0
    alpha: float = 1.0 / 16.0
    theta: str = "0.9"
    eps: float = 0.02
    max_steps: int = 20000
    grid: int = 32
    manifold: str = "all"
    start: str = "2,0"
    phi0: float = 0.5
    s_range: str = "-5,3"

    def as_dict(self):
        return asdict(self)

    def canonical(self) -> str:
        return dumps(self.as_dict())

    def tolerance_ladder(self):
        from .drift import INEQ_SLACK, NUMERICAL_FLOOR, SHRINKER_GATE

        return {
            "ode": self.tol_ode,
            "geometry": self.tol_geometry,
            "identity": self.tol_identity,
            "inequality_slack": INEQ_SLACK,
            "shrinker_gate": SHRINKER_GATE,
            "numerical_floor": NUMERICAL_FLOOR,
        }


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, value):
    kind = _TYPES[key]
    if kind in (int, Optional[int]):
        return int(value)
    if kind is float:
        return float(value)
    return str(value)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys map to underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (t.strip() for t in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES or key == "subcommand":
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _convert(key, value)
    return out


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _meta(cfg: RunConfig) -> dict:
    text = cfg.canonical()
    return {
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": content_hash(text),
        "tolerances": cfg.tolerance_ladder(),
    }


def _error_record(cfg, exc, code):
    os.makedirs(cfg.out, exist_ok=True)
    rec = dict(_meta(cfg))
    rec["error"] = {"type": type(exc).__name__, "message": str(exc)}
    write_json(os.path.join(cfg.out, f"{cfg.subcommand}_error.json"), rec)
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


# -- subcommands ------------------------------------------------------------


def _suite_members(cfg, suite):
    if cfg.n is None and cfg.m is None:
        return dict(suite)
    keep = {}
    for name, sh in suite.items():
        if (cfg.n is None or sh.sig.n == cfg.n) and (cfg.m is None or sh.sig.m == cfg.m):
            keep[name] = sh
    return keep


def cmd_verify(cfg: RunConfig) -> int:
    from .drift import CATALOGUE, INEQ_SLACK, IdentityHarness, interior_samples
    from .shrinkers import standard_suite

    try:
        suite = standard_suite(cfg.tol_ode)
    except (IntegrationError, GeometryError, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    members = _suite_members(cfg, suite)
    if not members:
        return _error_record(cfg, ValueError(f"no suite manifold with n={cfg.n}, m={cfg.m}"), EXIT_BUILD)
    rng = np.random.default_rng(cfg.seed)
    report = _meta(cfg)
    results = []
    all_pass = True
    for name, sh in members.items():
        samples = interior_samples(sh.graph, cfg.samples, rng)
        harness = IdentityHarness(sh.graph, samples, name=name)
        for ident in CATALOGUE:
            tol = INEQ_SLACK if ident == "INEQ-logw" else cfg.tol_identity
            try:
                rep = harness.run(ident, tol)
            except NotAShrinkerError as exc:
                results.append({"id": ident, "manifold": name, "pass": False, "error": str(exc)})
                all_pass = False
                continue
            d = rep.as_dict()
            results.append(d)
            all_pass &= rep.passed
            flag = " (tolerance floor)" if not rep.passed and rep.tolerance_floor else ""
            print(f"{name:9s} {ident:11s} sup={rep.sup_residual:.3e} {'PASS' if rep.passed else 'FAIL'}{flag}")
    report["results"] = results
    report["pass"] = bool(all_pass)
    os.makedirs(cfg.out, exist_ok=True)
    write_json(os.path.join(cfg.out, "identity_report.json"), report)
    return EXIT_OK if all_pass else EXIT_VERIFY


def cmd_curve(cfg: RunConfig) -> int:
    from .shrinkers import integrate_shrinker_curve

    try:
        start = _floats(cfg.start)
        curve = integrate_shrinker_curve(tuple(start), cfg.phi0, tuple(_floats(cfg.s_range)), cfg.tol_ode)
        window = curve.window()
        s_star, z_star = curve.z_minimum()
    except (IntegrationError, GeometryError, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    os.makedirs(cfg.out, exist_ok=True)
    curve.to_csv(os.path.join(cfg.out, "curve.csv"))
    ok = curve.sup_residual2 < 10 * cfg.tol_ode
    report = _meta(cfg)
    report.update({
        "s_interval": [curve.s_min, curve.s_max],
        "truncated": list(curve.truncated),
        "sup_residual2": curve.sup_residual2,
        "graph_window_s": list(window),
        "graph_window_x": list(curve.x_window()),
        "z_minimum": {"s": s_star, "z": z_star},
        "pass": bool(ok),
    })
    write_json(os.path.join(cfg.out, "curve_report.json"), report)
    print(f"curve on s in [{curve.s_min:.6g}, {curve.s_max:.6g}], sup residual^2 = {curve.sup_residual2:.3e}")
    return EXIT_OK if ok else EXIT_VERIFY


def _volume_targets(cfg):
    from .graph import affine_graph
    from .shrinkers import standard_suite

    if cfg.manifold == "plane":
        sig = Signature(cfg.n or 2, cfg.m or 1)
        return {"plane": affine_graph(sig)}
    suite = _suite_members(cfg, standard_suite(cfg.tol_ode))
    if cfg.manifold != "all":
        if cfg.manifold not in suite:
            raise ValueError(f"unknown manifold {cfg.manifold!r}")
        suite = {cfg.manifold: suite[cfg.manifold]}
    return {k: v.graph for k, v in suite.items()}


def cmd_volume(cfg: RunConfig) -> int:
    from .drift import theorem_probe_H
    from .volume import cauchy_check, doubling_check, gaussian_functional, growth_table, monotonicity_check, region_for

    try:
        targets = _volume_targets(cfg)
    except (IntegrationError, GeometryError, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    os.makedirs(cfg.out, exist_ok=True)
    radii = [cfg.r_max / 2**k for k in range(4, -1, -1)]
    # the weighted integrals need to be followed past r_max to see the tail contract
    cauchy_radii = [cfg.r_max / 8 * 2**k for k in range(5)]
    ts = [round(0.1 * k, 10) for k in range(1, 11)]
    report = _meta(cfg)
    out = {}
    ok = True
    try:
        for name, graph in targets.items():
            entry = {}
            n = graph.sig.n
            table = growth_table(graph, radii)
            table.to_csv(os.path.join(cfg.out, f"growth_{name}.csv"))
            with open(os.path.join(cfg.out, f"ft_{name}.csv"), "w", encoding="utf-8") as fh:
                fh.write("r,t,F_t\n")
                for r in radii:
                    for t in ts:
                        fh.write(f"{r:.17g},{t:.17g},{gaussian_functional(graph, region_for(graph, r), t):.17g}\n")
            if name == "plane":
                F = gaussian_functional(graph, region_for(graph, cfg.r_max), 1.0)
                entry["F_1_at_r_max"] = F
                entry["pass"] = bool(abs(F - 1.0) < 1e-6)
            else:
                mono = []
                for r in (2.0, 4.0, 8.0):
                    if r <= cfg.r_max:
                        rep = monotonicity_check(graph, region_for(graph, r), ts)
                        mono.append({"r": r, "max_dF_dt": rep.max_derivative, "pass": rep.passed()})
                dbl = doubling_check(table, n)
                cauchy = []
                for a in (0.125, 0.25, 0.5):
                    c = cauchy_check(graph, cauchy_radii, a)
                    cauchy.append({"alpha": a, "integrals": c.integrals, "limit": c.limit, "pass": c.passed})
                probe = theorem_probe_H(graph, radii[1:-1], alpha=cfg.alpha)
                entry.update({
                    "monotonicity": mono,
                    "doubling": {"C1": dbl.C1, "C2": dbl.C2, "C3": dbl.C3,
                                 "hypothesis_margins": dbl.hypothesis_margins,
                                 "bound_margins": dbl.bound_margins, "pass": dbl.passed},
                    "weighted_cauchy": cauchy,
                    "probe_H": [vars(row) for row in probe],
                })
                entry["pass"] = bool(all(x["pass"] for x in mono) and dbl.passed and all(x["pass"] for x in cauchy))
            ok &= entry["pass"]
            out[name] = entry
            print(f"{name:9s} {'PASS' if entry['pass'] else 'FAIL'}")
    except (GeometryError, NotAShrinkerError, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    report["manifolds"] = out
    report["pass"] = bool(ok)
    write_json(os.path.join(cfg.out, "volume_report.json"), report)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_flow(cfg: RunConfig) -> int:
    from .flow import random_perturbation, relax_to_shrinker, write_grid_csv

    sig = Signature(cfg.n or 1, cfg.m or 1)
    rng = np.random.default_rng(cfg.seed)
    try:
        state = random_perturbation(sig, rng, eps=cfg.eps, N=cfg.grid)
        final, rep = relax_to_shrinker(state, tol=cfg.tol_identity, max_steps=cfg.max_steps)
    except (GeometryError, FlowHalt, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    os.makedirs(cfg.out, exist_ok=True)
    rep.to_csv(os.path.join(cfg.out, "flow_log.csv"))
    write_grid_csv(final, os.path.join(cfg.out, "flow_state.csv"))
    report = _meta(cfg)
    report.update(rep.as_dict())
    report["pass"] = bool(rep.converged and rep.affine)
    write_json(os.path.join(cfg.out, "flow_report.json"), report)
    print(f"flow {rep.reason} after {rep.steps} steps, tau = {rep.tau:.6g}, terminal sup|B| = {rep.terminal_sup_B:.3e}")
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_grassmann(cfg: RunConfig) -> int:
    from .grassmann import angle_data, boosted_pair

    thetas = _floats(cfg.theta)
    k = max(len(thetas), 1)
    try:
        sig = Signature(cfg.n or k, cfg.m or k)
        P, A = boosted_pair(sig, thetas)
        data = angle_data(P, A)
    except (GeometryError, ValueError) as exc:
        return _error_record(cfg, exc, EXIT_BUILD)
    d = float(np.linalg.norm(data.thetas))
    expected_w = math.prod(math.cosh(t) for t in thetas)
    ok = abs(data.w - expected_w) <= cfg.tol_geometry * max(1.0, expected_w)
    os.makedirs(cfg.out, exist_ok=True)
    report = _meta(cfg)
    report.update({"thetas": data.thetas, "w": data.w, "distance": d, "expected_w": expected_w, "pass": bool(ok)})
    write_json(os.path.join(cfg.out, "grassmann_report.json"), report)
    print(f"w={data.w:.17g} d={d:.17g}")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "verify": cmd_verify,
    "curve": cmd_curve,
    "volume": cmd_volume,
    "flow": cmd_flow,
    "grassmann": cmd_grassmann,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spacelike", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--tol-ode", type=float)
    p.add_argument("--tol-geometry", type=float)
    p.add_argument("--tol-identity", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--r-max", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", help="comma-separated hyperbolic angles (grassmann)")
    p.add_argument("--eps", type=float, help="perturbation amplitude (flow)")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--grid", type=int, help="cells per axis (flow)")
    p.add_argument("--manifold", help="all, curve, cylinder, product or plane (volume)")
    p.add_argument("--start", help="curve start point x,y")
    p.add_argument("--phi0", type=float)
    p.add_argument("--s-range", help="curve arclength interval a,b")
    return p


def make_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values["subcommand"] = args.subcommand
    return RunConfig(**values)


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUILD
    return COMMANDS[cfg.subcommand](cfg)


if __name__ == "__main__":
    sys.exit(main())
