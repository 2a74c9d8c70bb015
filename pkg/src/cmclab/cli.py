"""Command-line front end: solve / verify / sweep / oracle pipelines.

Configuration is a flat ``key = value`` text file plus command-line
overrides (flags mirror the keys; precedence defaults < file < flags).
Exit codes: 0 all good, 1 verification failure, 2 solver failure,
3 configuration error.

Sign convention: the checks are phrased for H > 0.  A negative H is accepted
and handled by the symmetry u -> -u (the solved problem uses |H| and the
exported solution is negated); H = 0 is rejected.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, fields as dc_fields, replace
from pathlib import Path

import numpy as np

from . import analysis, calibration, estimates, pfunction, reporting
from .domain import ConvexDomain, DomainError, build_domain
from .fields import graph_fit
from .kernels import backend_name
from .mesh import MeshError, triangulate
from .oracles import harmonic_leading, radial_cap, radial_cap_residual
from .solver import SolverError, SolverOptions, continuation

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3

ALL_CHECKS = (
    "gradient_bound",
    "height_bounds",
    "q_min",
    "equality_chain",
    "phi",
    "topology",
    "taylor",
    "sectors",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    domain: str = "disc"
    R: float = 1.0
    a: float = 1.5
    b: float = 1.0
    p: float = 4.0
    coeffs: tuple = ()
    H: float = 1.0
    h: float = 0.05
    t_steps: int = 11
    t_schedule: tuple = ()
    alphas: tuple = (1.0, 1.5, 2.0)
    n_levels: int = 50
    outdir: str = "runs/out"
    newton_tol: float = 1e-10
    checks: tuple = ALL_CHECKS
    tol_q2: float | None = None
    tol_height: float | None = None
    tol_phi: float | None = None
    tol_un: float | None = None
    tol_equality: float | None = None


_TUPLE_KEYS = {"coeffs", "alphas", "t_schedule", "checks"}
_INT_KEYS = {"t_steps", "n_levels"}
_STR_KEYS = {"domain", "outdir"}
_OPT_KEYS = {"tol_q2", "tol_height", "tol_phi", "tol_un", "tol_equality"}


def parse_config_file(path) -> dict:
    """Flat key/value config; raises ConfigError with line numbers."""
    known = {f.name for f in dc_fields(RunConfig)}
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _STR_KEYS:
            return value
        if key in _TUPLE_KEYS:
            items = [v.strip() for v in value.split(",") if v.strip()]
            if key == "checks":
                return tuple(items)
            return tuple(float(v) for v in items)
        if key in _INT_KEYS:
            return int(value)
        if key in _OPT_KEYS:
            return None if value.lower() in ("", "none", "auto") else float(value)
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from exc


def build_config(file_kv: dict, cli_kv: dict) -> RunConfig:
    merged = {}
    for src in (file_kv, cli_kv):
        for key, value in src.items():
            if value is None:
                continue
            merged[key] = _coerce(key, value)
    cfg = replace(RunConfig(), **merged)
    if cfg.H == 0:
        raise ConfigError("H must be nonzero (the problem degenerates at H = 0)")
    if cfg.h <= 0:
        raise ConfigError("mesh size h must be positive")
    if cfg.t_schedule and (cfg.t_schedule[0] != 0 or cfg.t_schedule[-1] != 1):
        raise ConfigError("t_schedule must run from 0 to 1")
    if cfg.t_steps < 2 and not cfg.t_schedule:
        raise ConfigError("t_steps must be >= 2")
    unknown = set(cfg.checks) - set(ALL_CHECKS)
    if unknown:
        raise ConfigError(f"unknown checks: {sorted(unknown)}")
    if cfg.domain not in ("disc", "ellipse", "superellipse", "support"):
        raise ConfigError(f"unknown domain kind {cfg.domain!r}")
    return cfg


def make_domain(cfg: RunConfig) -> ConvexDomain:
    if cfg.domain == "disc":
        return build_domain("disc", [cfg.R])
    if cfg.domain == "ellipse":
        return build_domain("ellipse", [cfg.a, cfg.b])
    if cfg.domain == "superellipse":
        return build_domain("superellipse", [cfg.a, cfg.b, cfg.p])
    return build_domain("support", cfg.coeffs)


def _schedule(cfg: RunConfig) -> np.ndarray:
    if cfg.t_schedule:
        return np.asarray(cfg.t_schedule, dtype=float)
    return np.linspace(0.0, 1.0, cfg.t_steps)


def run_solve(cfg: RunConfig):
    """Shared heavy lifting: domain, mesh, continuation.  Returns
    (domain, mesh, solutions, diagnostics list)."""
    domain = make_domain(cfg)
    mesh = triangulate(domain, cfg.h)
    opts = SolverOptions(newton_tol=cfg.newton_tol)
    sols = continuation(mesh, abs(cfg.H), _schedule(cfg), opts=opts)
    diags = [
        {"t": s.t, "iters": s.iters, "residual_norm": s.residual_norm,
         "theta": s.theta}
        for s in sols
    ]
    return domain, mesh, sols, diags


def _write_solve_artifacts(cfg, mesh, sols, diags, t0):
    outdir = Path(cfg.outdir)
    reporting.write_mesh_csvs(mesh, outdir)
    final = sols[-1]
    sign = 1.0 if cfg.H > 0 else -1.0
    fit = graph_fit(final)
    export = replace_values(final, sign)
    reporting.write_solution_csv(export, sign * fit.grad, outdir / "solution.csv")
    reporting.write_json(outdir / "diagnostics.json", diags)
    reporting.write_json(
        outdir / "run_meta.json",
        {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            "wall_seconds": time.perf_counter() - t0,
            "versions": _versions(),
        },
    )


def replace_values(solution, sign):
    if sign == 1.0:
        return solution
    from dataclasses import replace as _dc_replace

    return _dc_replace(solution, values=sign * solution.values)


def _versions() -> dict:
    import scipy
    import sympy

    from . import __version__

    return {
        "cmclab": __version__,
        "kernels": backend_name(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def cmd_solve(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    try:
        _, mesh, sols, diags = run_solve(cfg)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_solve_artifacts(cfg, mesh, sols, diags, t0)
    print(f"solve ok: {len(sols)} continuation steps, "
          f"theta0 = {min(s.theta for s in sols):.4f}, wrote {cfg.outdir}")
    return EXIT_OK


# -- verification ------------------------------------------------------------------

def _resolve_tolerances(cfg: RunConfig):
    cal = calibration.calibrate(cfg.h, newton_tol=cfg.newton_tol)
    tols = calibration.default_tolerances(cal)
    return calibration.Tolerances(
        q2=cfg.tol_q2 if cfg.tol_q2 is not None else tols.q2,
        height=cfg.tol_height if cfg.tol_height is not None else tols.height,
        phi=cfg.tol_phi if cfg.tol_phi is not None else tols.phi,
        un=cfg.tol_un if cfg.tol_un is not None else tols.un,
        equality=cfg.tol_equality if cfg.tol_equality is not None else tols.equality,
    )


def _phi_checks(cfg, domain, final, cp_location, tols, outdir):
    checks = {}
    for alpha in cfg.alphas:
        phi = pfunction.phi_field(final, alpha)
        reporting.write_field_csv(phi.field, outdir / f"phi_alpha_{alpha:g}.csv")
        mx = pfunction.phi_max_location(phi, tols.phi)
        mn = pfunction.phi_min_location(phi, tols.phi, critical_point=cp_location)
        reporting.write_json(
            outdir / f"phi_extrema_alpha_{alpha:g}.json",
            {
                "alpha": alpha,
                "max": {"x": mx.location[0], "y": mx.location[1],
                        "value": mx.value, "on_boundary": mx.on_boundary},
                "min": {"x": mn.location[0], "y": mn.location[1],
                        "value": mn.value, "classification": mn.classification},
                "range": phi.range,
            },
        )
        entry = {
            "alpha": alpha,
            "range": phi.range,
            "max_interior_excess": mx.interior_excess,
            "min_classification": mn.classification,
            "min_ok": mn.ok,
        }
        if alpha == 1.0:
            # the maximum principle, the dichotomy, and the boundary identity
            dn = pfunction.phi_boundary_normal_derivative(final, domain, alpha)
            mesh = final.mesh
            bvals = phi.values[mesh.boundary_nodes]
            at_max = float(dn[np.argmax(bvals)])
            at_min = float(dn[np.argmin(bvals)])
            is_circle = (domain.k_max - domain.k_min) <= 1e-10 * domain.k_max
            identity_ok = (
                bool(np.all(np.abs(dn) <= tols.un))
                if is_circle
                else (at_max >= -tols.un and at_min <= tols.un)
            )
            constancy_ok = (not is_circle) or phi.range <= tols.phi
            entry.update(
                max_ok=mx.ok,
                normal_derivative_at_max=at_max,
                normal_derivative_at_min=at_min,
                identity_ok=identity_ok,
                constancy_ok=constancy_ok,
            )
            ok = mx.ok and mn.ok and identity_ok and constancy_ok
        else:
            ok = mn.ok
        entry["status"] = "pass" if ok else "fail"
        checks[f"phi_alpha_{alpha:g}"] = entry
    return checks


def _topology_check(cfg, sols, outdir):
    final = sols[-1]
    per_t = []
    all_ok = True
    for s in sols:
        rep = analysis.critical_points(s)
        pt = rep.points[0] if rep.count == 1 else None
        ok = (
            rep.count == 1
            and pt.classification == "minimum"
            and pt.gaussian_curvature < 0
        )
        all_ok &= ok
        per_t.append(
            {"t": s.t, "count": rep.count,
             "classification": pt.classification if pt else None,
             "K": pt.gaussian_curvature if pt else None, "ok": ok}
        )
    levels, counts = analysis.level_topology(final, cfg.n_levels)
    reporting.write_csv(
        outdir / "level_topology.csv",
        ["m", "component_count"],
        list(zip(levels, counts)),
    )
    topo_ok = bool(np.all(counts == 1))
    return {
        "critical_points_per_t": per_t,
        "levels_all_connected": topo_ok,
        "max_component_count": int(counts.max()),
        "status": "pass" if (all_ok and topo_ok) else "fail",
    }, per_t


def _taylor_check(cfg, final, outdir):
    closed = analysis.cap_taylor_report(1.0, abs(cfg.H))
    disc_like = analysis.solution_taylor_report(final, radial=(cfg.domain == "disc"))
    reporting.write_json(
        outdir / "taylor_report.json", {"closed_form": closed, "solution": disc_like}
    )
    ok = closed.ok and disc_like.ok
    return {
        "closed_form_ok": closed.ok,
        "solution_order2_ok": disc_like.ok,
        "status": "pass" if ok else "fail",
    }


def _sectors_check(outdir):
    sector_ok = True
    sector_counts = {}
    for n in range(1, 7):
        res = analysis.nodal_sectors(
            lambda pts, n=n: harmonic_leading(n, 1.0, pts), (0.0, 0.0), 0.1
        )
        sector_counts[n] = res.sectors
        sector_ok &= res.sectors == 2 * n

    fit1 = analysis.fit_leading_harmonic(
        lambda pts: harmonic_leading(3, 2 + 1j, pts)
        + 0.01 * harmonic_leading(5, 1.0, pts),
        (0.0, 0.0), (0.05, 0.1),
    )
    fit_ok = (
        fit1.degree == 3
        and fit1.coefficient is not None
        and abs(fit1.coefficient - (2 + 1j)) / abs(2 + 1j) < 0.02
    )
    radial = analysis.fit_leading_harmonic(
        lambda pts: np.linalg.norm(pts, axis=1) ** 3, (0.0, 0.0), (0.05, 0.1)
    )
    fit_ok &= radial.degree is None
    out = {
        "sector_counts": sector_counts,
        "harmonic_fit_ok": bool(fit_ok),
        "status": "pass" if (sector_ok and fit_ok) else "fail",
    }
    reporting.write_json(outdir / "sector_machinery.json", out)
    return out


def cmd_verify(cfg: RunConfig, sabotage_scale: float | None = None) -> int:
    t0 = time.perf_counter()
    try:
        domain, mesh, sols, diags = run_solve(cfg)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_solve_artifacts(cfg, mesh, sols, diags, t0)
    outdir = Path(cfg.outdir)

    final = sols[-1]
    if sabotage_scale is not None:
        # fault injection for negative-control tests: perturb the solved values
        from dataclasses import replace as _dc_replace

        final = _dc_replace(final, values=sabotage_scale * final.values)
        sols = list(sols[:-1]) + [final]

    tols = _resolve_tolerances(cfg)
    checks = {}

    cp_rep = analysis.critical_points(final)
    cp_location = cp_rep.points[0].location if cp_rep.count == 1 else None

    if "gradient_bound" in cfg.checks:
        frag = estimates.gradient_bound_check(final, domain, tols.q2)
        checks["gradient_bound"] = {
            **frag.__dict__,
            "status": "pass" if (frag.ok and frag.boundary_max_ok) else "fail",
        }
    if "height_bounds" in cfg.checks:
        frag = estimates.height_bound_check(final, domain, tols.height, tols.equality)
        checks["height_bounds"] = {
            **frag.__dict__, "status": "pass" if frag.ok else "fail",
        }
    if "q_min" in cfg.checks:
        frag = estimates.q_min_check(final, domain, tols.q2)
        checks["q_min"] = {**frag.__dict__, "status": "pass" if frag.ok else "fail"}
    if "equality_chain" in cfg.checks:
        frag = estimates.equality_chain_check(final, domain, tols.equality)
        checks["equality_chain"] = {
            **frag.__dict__, "status": "pass" if frag.consistent else "fail",
        }
    if "phi" in cfg.checks:
        checks.update(_phi_checks(cfg, domain, final, cp_location, tols, outdir))
    if "topology" in cfg.checks:
        topo, _ = _topology_check(cfg, sols, outdir)
        checks["topology"] = topo
    if "taylor" in cfg.checks:
        checks["taylor"] = _taylor_check(cfg, final, outdir)
    if "sectors" in cfg.checks:
        checks["sectors"] = _sectors_check(outdir)

    report = estimates.full_report(final, domain, tols.q2, tols.height, tols.equality)
    reporting.write_json(outdir / "estimate_report.json", report)

    all_pass = all(c.get("status") == "pass" for c in checks.values())
    summary = {
        "config": cfg,
        "mesh": {
            "n_nodes": mesh.n_nodes,
            "n_triangles": mesh.n_triangles,
            "h": mesh.h,
            "min_angle_deg": mesh.min_angle_deg,
            "max_edge": mesh.max_edge,
        },
        "tolerances": tols,
        "theta0": min(s.theta for s in sols),
        "sign_normalized": cfg.H < 0,
        "checks": checks,
        "all_pass": all_pass,
        "versions": _versions(),
    }
    reporting.write_json(outdir / "verification_summary.json", summary)

    for name in sorted(checks):
        print(f"{checks[name]['status'].upper():4s}  {name}")
    print(f"verification {'passed' if all_pass else 'FAILED'}; wrote {outdir}")
    return EXIT_OK if all_pass else EXIT_VERIFY


def cmd_sweep(cfg: RunConfig, h_values, a_values, r_values) -> int:
    rows = []
    points = []
    if cfg.domain == "disc":
        for r in (r_values or [cfg.R]):
            for hh in (h_values or [cfg.H]):
                points.append(replace(cfg, R=r, H=hh))
    else:
        for av in (a_values or [cfg.a]):
            for hh in (h_values or [cfg.H]):
                points.append(replace(cfg, a=av, H=hh))
    for pt in points:
        label = f"{pt.domain}"
        try:
            domain, mesh, sols, _ = run_solve(pt)
            tols = _resolve_tolerances(pt)
            rep = estimates.full_report(
                sols[-1], domain, tols.q2, tols.height, tols.equality
            )
            rows.append(
                (label, pt.H, domain.k_min, domain.k_max, rep.gradient.q_max2,
                 rep.gradient.bound, rep.height.u_min, rep.height.lower,
                 rep.height.upper, rep.ok)
            )
        except (SolverError, MeshError, DomainError) as exc:
            print(f"sweep point {pt.domain} H={pt.H} failed: {exc}", file=sys.stderr)
            rows.append((label, pt.H, float("nan"), float("nan"), float("nan"),
                         float("nan"), float("nan"), float("nan"), float("nan"),
                         False))
    reporting.write_csv(
        Path(cfg.outdir) / "sweep.csv",
        ["domain", "H", "K_min", "K_max", "q_max2", "bound", "u_min", "lower",
         "upper", "pass"],
        rows,
    )
    print(f"sweep: {len(rows)} rows -> {cfg.outdir}/sweep.csv")
    return EXIT_OK


def cmd_oracle(R: float, H: float, t: float, n: int, out: str) -> int:
    radii = np.linspace(R / n, R, n)
    value, slope = radial_cap(R, H, t, radii)
    resid = radial_cap_residual(R, H, t, radii)
    reporting.write_csv(
        out, ["r", "value", "slope", "residual"],
        list(zip(radii, np.atleast_1d(value), np.atleast_1d(slope), resid)),
    )
    print(f"oracle samples -> {out} (max residual {resid.max():.3e})")
    return EXIT_OK


# -- argument plumbing ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 3, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--domain", choices=["disc", "ellipse", "superellipse", "support"])
    p.add_argument("--R", type=float, help="disc radius")
    p.add_argument("--a", type=float, help="semi-major axis")
    p.add_argument("--b", type=float, help="semi-minor axis")
    p.add_argument("--p", type=float, help="superellipse exponent (> 2)")
    p.add_argument("--coeffs", help="support-function Fourier coefficients c0,a1,b1,...")
    p.add_argument("--H", type=float, help="mean curvature (nonzero)")
    p.add_argument("--h", type=float, help="target mesh edge length")
    p.add_argument("--t-steps", dest="t_steps", type=int)
    p.add_argument("--t-schedule", dest="t_schedule", help="explicit 0,...,1 list")
    p.add_argument("--alphas", help="comma list for the Phi checks")
    p.add_argument("--n-levels", dest="n_levels", type=int)
    p.add_argument("--outdir")
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--checks", help="comma list; default all")
    for key in sorted(_OPT_KEYS):
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)


def _config_from_args(args) -> RunConfig:
    file_kv = parse_config_file(args.config) if args.config else {}
    cli_kv = {
        f.name: getattr(args, f.name)
        for f in dc_fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }
    return build_config(file_kv, cli_kv)


def main(argv=None) -> int:
    parser = _Parser(prog="cmclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("solve", "verify", "sweep"):
        p = sub.add_parser(name)
        _add_config_flags(p)
        if name == "verify":
            p.add_argument("--sabotage-scale", type=float, help=argparse.SUPPRESS)
        if name == "sweep":
            p.add_argument("--H-list", dest="H_list", help="comma list of H values")
            p.add_argument("--a-list", dest="a_list", help="comma list of a values")
            p.add_argument("--R-list", dest="R_list", help="comma list of R values")

    po = sub.add_parser("oracle")
    po.add_argument("--R", type=float, default=1.0)
    po.add_argument("--H", type=float, default=1.0)
    po.add_argument("--t", type=float, default=1.0)
    po.add_argument("--n", type=int, default=100)
    po.add_argument("--out", default="oracle.csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "oracle":
            return cmd_oracle(args.R, args.H, args.t, args.n, args.out)
        cfg = _config_from_args(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, sabotage_scale=args.sabotage_scale)
        if args.command == "sweep":
            def _floats(sv):
                return [float(x) for x in sv.split(",")] if sv else None

            return cmd_sweep(cfg, _floats(args.H_list), _floats(args.a_list),
                             _floats(args.R_list))
    except (ConfigError, DomainError, MeshError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
