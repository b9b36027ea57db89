"""mintool command line.

Exit codes: 0 verified / converged, 1 violation or divergence, 2 usage error.
Every JSON report carries ``schema_version`` and the seed, and contains no
timings, so equal arguments give byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import suites
from .campaign import SCHEMA_VERSION, DomainError, dumps

SUITES = ("identities", "bounds", "bprops", "main", "reg", "lh", "algebra", "alg")
CONSTANTS = ("mu", "delta", "tau", "lambda", "c1c2")


class UsageError(Exception):
    pass


def _emit(report: dict, args, name: str) -> None:
    text = dumps(report)
    sys.stdout.write(text)
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")


def _envelope(command: str, params: dict, seed, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "params": params, "seed": seed, **body}


# -- verify ----------------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    allowed = {"name", "R", "k", "n", "samples", "seed", "tolerance"}
    unknown = set(cfg) - allowed
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def run_suite(suite: str, samples=None, seed: int = 0, R=None, k=None, n=None):
    if suite == "identities":
        return suites.identities_suite(samples or 10_000, seed)
    if suite == "bprops":
        return suites.bprops_suite(samples or 100_000, seed)
    if suite == "bounds":
        return suites.bounds_suite(samples or 100_000, seed)
    if suite == "main":
        return suites.main_suite(samples or 100_000, n, k, 5.0 if R is None else R, seed)
    if suite == "reg":
        return suites.reg_suite(1.0 if R is None else R, n or 2, samples or 10_000, seed)
    if suite == "lh":
        if R is not None:
            return suites.lh_tau_suite(R, n or 2, samples or 20_000, seed)
        return suites.lh_suite(samples or 100_000, 10.0, seed)
    if suite == "alg":
        return suites.alg_suite(1.0 if R is None else R, n or 2, samples or 100_000, seed)
    if suite == "algebra":
        from .campaign import InequalityReport
        from .ci.algebra import algebra_campaign

        rep = algebra_campaign(samples or 10_000, 10.0, seed)
        err = max(rep.A_error, rep.B_error)
        return InequalityReport("algebra", "H1 and H2, |a|,|b| <= 10", samples or 10_000, -err, 1e-10, None,
                                {"A_error": rep.A_error, "B_error": rep.B_error})
    raise UsageError(f"unknown suite {suite}")


def cmd_verify(args) -> int:
    params = {"suite": args.suite, "samples": args.samples, "R": args.R, "k": args.k, "n": args.n}
    seed = args.seed
    if args.config:
        cfg = _load_config(args.config)
        if cfg.get("name", args.suite) != args.suite:
            raise UsageError(f"config names suite {cfg['name']!r}, command asks for {args.suite!r}")
        for key in ("R", "k", "n", "samples"):
            if key in cfg:
                params[key] = cfg[key]
        seed = int(cfg.get("seed", seed))
    rep = run_suite(args.suite, params["samples"], seed, params["R"], params["k"], params["n"])
    if args.config and "tolerance" in _load_config(args.config):
        rep.tolerance = float(_load_config(args.config)["tolerance"])
        rep.violated = bool(rep.min_gap < -rep.tolerance)
    _emit(_envelope("verify", params, seed, {"report": rep.to_json(), "violated": rep.violated}), args,
          f"verify_{args.suite}.json")
    return 1 if rep.violated else 0


# -- constants --------------------------------------------------------------------

def cmd_constants(args) -> int:
    from .convexity import tau_estimate
    from .inequalities import delta_of_k, elliptic_campaign, lambda_constant, mu_estimate

    name, seed = args.name, args.seed
    params = {"name": name, "R": args.R, "k": args.k, "n": args.n, "samples": args.samples}
    n = args.n or 2
    if name == "delta":
        if args.k is None:
            raise UsageError("constants delta needs --k")
        body = {"value": delta_of_k(args.k), "method": "analytic", "parameter": args.k}
        values = [body["value"]]
    else:
        R = 1.0 if args.R is None else args.R
        if name == "mu":
            est = mu_estimate(R, n, args.samples or 100_000, seed)
            body, values = {"estimate": est.to_json()}, [est.value]
        elif name == "tau":
            rep = tau_estimate(R, n, args.samples or 20_000, seed)
            body, values = {"estimate": rep.to_json(), "value": rep.tau}, [rep.tau]
        elif name == "lambda":
            est = lambda_constant(R, n, args.samples or 20_000, seed)
            body, values = {"estimate": est.to_json()}, [est.value]
        else:
            c1, c2 = elliptic_campaign(R, n, args.samples or 10_000, seed)
            body, values = {"c1": c1.to_json(), "c2": c2.to_json()}, [c1.value, c2.value]
    positive = all(v > 0 for v in values)
    _emit(_envelope("constants", params, seed, {**body, "positive": positive}), args, f"constants_{name}.json")
    return 0 if positive else 1


# -- solve ------------------------------------------------------------------------

def _grid_from_args(args):
    from .mms.fields import Grid

    nx = args.nx
    ny = args.ny if args.ny is not None else nx
    h = args.h if args.h is not None else 1.0 / (nx + 1)
    return Grid(nx, ny, h)


def cmd_solve(args) -> int:
    from .mms.fields import read_field, write_field
    from .mms.potentials import DivergenceError, build_potentials, ma_potential
    from .mms.presets import PRESETS, get_preset
    from .mms.solver import solve_dirichlet

    grid = _grid_from_args(args)
    if args.boundary in PRESETS or args.boundary in ("harmonic-δ", "holomorphic-φ"):
        boundary = get_preset(args.boundary)
    elif Path(args.boundary).exists():
        boundary = read_field(args.boundary)
        grid = boundary.grid
    else:
        raise UsageError(f"--boundary must be a preset {sorted(PRESETS)} or a field header file")
    u, rep = solve_dirichlet(grid, boundary, tol=args.tol, max_iter=args.max_iter, method=args.method)
    body = {"grid": grid.to_json(), "solve": rep.to_json()}
    v, w, prep = build_potentials(u)
    body["potentials"] = prep.to_json()
    try:
        _, mrep = ma_potential(w)
        body["monge_ampere"] = mrep.to_json()
    except DivergenceError as exc:
        body["monge_ampere"] = {"error": str(exc)}
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_field(out / "u.json", u, args.format)
        write_field(out / "v.json", v, args.format)
        write_field(out / "w.json", w, args.format)
    params = {"nx": grid.nx, "ny": grid.ny, "h": grid.h, "boundary": args.boundary, "tol": args.tol,
              "max_iter": args.max_iter, "method": args.method}
    _emit(_envelope("solve", params, args.seed, body), args, "solve.json")
    return 0 if rep.converged else 1


# -- laminate ---------------------------------------------------------------------

def _matrix_arg(text):
    if text is None:
        return None
    try:
        return np.array(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"matrices are JSON lists of rows: {exc}") from exc


def cmd_laminate(args) -> int:
    from .ci.algebra import classify
    from .ci.laminate import B0, C0, LaminateInfeasibleError, LaminateSpec, audit_laminate, build_laminate, h1h2_critical_map

    params = {"t": args.t, "eps": args.eps, "B": args.B, "C": args.C, "h1h2": args.h1h2}
    if args.h1h2:
        pmap, audit = h1h2_critical_map(epsilon=args.eps)
        ok = audit.ok
        body = {"audit": audit.to_json(), "pieces": len(pmap.pieces), "period": pmap.meta["period"]}
    else:
        B = _matrix_arg(args.B) if args.B else B0
        C = _matrix_arg(args.C) if args.C else C0
        try:
            spec = LaminateSpec(B, C, args.t, args.eps)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        try:
            pmap = build_laminate(spec)
        except LaminateInfeasibleError as exc:
            _emit(_envelope("laminate", params, args.seed, {"error": str(exc), "minimal_epsilon": exc.minimal_epsilon}),
                  args, "laminate.json")
            return 1
        audit = audit_laminate(pmap, spec)
        ok = audit.ok
        body = {"audit": audit.to_json(), "pieces": len(pmap.pieces), "period": pmap.meta["period"],
                "kappa": pmap.meta["kappa"]}
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        pmap.write_json(out / "map.json")
        (out / "map.svg").write_text(pmap.to_svg(classify), encoding="utf-8")
    _emit(_envelope("laminate", params, args.seed, body), args, "laminate.json")
    return 0 if ok else 1


# -- compactness ------------------------------------------------------------------

def cmd_compactness(args) -> int:
    from .mms.compactness import CompactnessConfig, compactness_experiment

    if args.levels < 2:
        raise UsageError("--levels must be at least 2")
    cfg = CompactnessConfig(levels=tuple(range(1, args.levels + 1)), p=args.p, p_bar=args.pbar, seed=args.seed)
    rep = compactness_experiment(cfg)
    params = {"levels": args.levels, "p": args.p, "pbar": args.pbar}
    _emit(_envelope("compactness", params, args.seed, {"report": rep.to_json()}), args, "compactness.json")
    if getattr(args, "out", None):
        rows = ["level,mesh,eps,residual_w1,residual_w2,residual_w3,gradient_distance"]
        for lv, N, e, r, g in zip(rep.levels, rep.mesh, rep.eps, rep.weighted_residual, rep.gradient_distance):
            rows.append(",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in (lv, N, e, *r, g)))
        (Path(args.out) / "compactness.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return 0 if rep.monotone else 1


# -- report -----------------------------------------------------------------------

def cmd_report(args) -> int:
    """All verification suites at a common sample size, with a CSV summary."""
    rows = {}
    violated = False
    for suite in SUITES:
        rep = run_suite(suite, args.samples, args.seed)
        rows[suite] = rep.to_json()
        violated |= rep.violated
    body = {"suites": rows, "violated": violated}
    _emit(_envelope("report", {"samples": args.samples}, args.seed, body), args, "report.json")
    if getattr(args, "out", None):
        lines = ["suite,n_samples,min_gap,tolerance,violated"]
        for suite, r in rows.items():
            lines.append(f"{suite},{r['n_samples']},{r['min_gap']!r},{r['tolerance']!r},{r['violated']}")
        (Path(args.out) / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 1 if violated else 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mintool", description="Checks and constructions for the area functional.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="directory for report files")

    v = sub.add_parser("verify", help="run a verification campaign")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--samples", type=int)
    v.add_argument("--R", type=float)
    v.add_argument("--k", type=float)
    v.add_argument("--n", type=int)
    v.add_argument("--config", help="JSON campaign config {name, R or k, n, samples, seed, tolerance}")
    common(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("constants", help="estimate a constant")
    c.add_argument("name", choices=CONSTANTS)
    c.add_argument("--R", type=float)
    c.add_argument("--k", type=float)
    c.add_argument("--n", type=int)
    c.add_argument("--samples", type=int)
    common(c)
    c.set_defaults(func=cmd_constants)

    s = sub.add_parser("solve", help="solve a Dirichlet problem on a grid")
    s.add_argument("--nx", type=int, default=31)
    s.add_argument("--ny", type=int)
    s.add_argument("--h", type=float)
    s.add_argument("--boundary", default="holomorphic-phi", help="preset name or field header file")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", dest="max_iter", type=int, default=100)
    s.add_argument("--method", choices=("newton", "descent"), default="newton")
    s.add_argument("--format", choices=("binary", "csv"), default="binary")
    common(s)
    s.set_defaults(func=cmd_solve)

    lam = sub.add_parser("laminate", help="build and audit a simple laminate")
    lam.add_argument("--t", type=float, default=0.5)
    lam.add_argument("--eps", type=float, default=0.1)
    lam.add_argument("--B", help="JSON matrix, default ((1,0),(0,-1))")
    lam.add_argument("--C", help="JSON matrix, default ((-1,0),(0,-1))")
    lam.add_argument("--h1h2", action="store_true", help="collar-free stripes between H1 and H2")
    common(lam)
    lam.set_defaults(func=cmd_laminate)

    k = sub.add_parser("compactness", help="run the compactness experiment")
    k.add_argument("--levels", type=int, default=6)
    k.add_argument("--p", type=float, default=4.0)
    k.add_argument("--pbar", type=float, default=2.0)
    common(k)
    k.set_defaults(func=cmd_compactness)

    r = sub.add_parser("report", help="run every verification suite")
    r.add_argument("--samples", type=int, default=20_000)
    common(r)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError, KeyError) as exc:
        sys.stderr.write(f"mintool: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
