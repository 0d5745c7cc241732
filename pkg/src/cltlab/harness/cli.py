"""``cltlab`` command line.

Every subcommand prints delimited text (JSON or CSV) on stdout; ``rate`` and
``compare`` also write CSV/JSON/.dat files and, with ``--plot``, PNG figures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import clt_bounds as cb
from .. import distributions as dist
from .. import interpolation as ip
from .. import wasserstein as ws
from ..specfile import SpecFileError, load_spec
from . import experiments as ex
from .records import emit_outputs, records_csv


def _spec(value: str) -> dist.DistributionSpec:
    builtins = ex.builtin_specs()
    if value in builtins:
        return builtins[value]
    return load_spec(value)


def _grid(value: str) -> list[int]:
    return [int(float(v)) for v in value.split(",") if v.strip()]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    raise TypeError(type(obj).__name__)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, default=_jsonable))


# -- subcommands ---------------------------------------------------------------------

def cmd_moments(args) -> int:
    spec = _spec(args.spec)
    T = dist.moment_tensor(spec, args.q)
    print("index,value")
    for idx in np.ndindex(T.shape):
        print(f"{' '.join(str(i) for i in idx) or '-'},{float(T[idx])!r}")
    return 0


def _terms(args) -> cb.CltTerms:
    return cb.compute_terms(_spec(args.spec), args.n, args.p, args.beta_sq, n_mc=args.n_mc, seed=args.seed)


def cmd_terms(args) -> int:
    t = _terms(args)
    out = {k: getattr(t, k) for k in ("d", "n", "p", "norm_M3", "norm_M4", "L_p", "Lprime_4", "Lprime_p2",
                                       "beta_sq_X", "beta_W", "beta_2", "beta_p", "leading_norm",
                                       "leading_norm_se", "leading_exact", "exact_pairs", "Lambda_beta")}
    out["L_4(0)"] = t.L4_tail(0.0)
    out["L''_4(0)"] = t.Ldoubleprime_4_tail(0.0)
    _emit(out)
    return 0


def cmd_bound(args) -> int:
    spec = _spec(args.spec)
    terms = cb.compute_terms(spec, args.n, args.p, args.beta_sq, n_mc=args.n_mc, seed=args.seed)
    r = cb.conjugate_exponents(args.p, args.q)
    wq, how = ex.wq_input(args.wq, spec, args.n, args.q, args.seed, args.m, args.reps)
    rep = cb.theorem_bound(terms, args.q, r, wq, args.C, args.split_root)
    out = rep.to_dict()
    out["inputs"]["wq_policy"] = how
    _emit(out)
    return 0


def cmd_wp(args) -> int:
    spec = _spec(args.spec)
    if args.route == "quantile":
        route = ex.best_route(spec, args.p)
        if route == "two_sample_mc":
            print("error: no exact route for this spec; use --route mc", file=sys.stderr)
            return 2
        value, se = ex.estimate_wp(spec, args.n, args.p, route)
        est = ws.TransportEstimate(value, se, route, 0, 0)
    else:
        est = ws.wp_two_sample(spec, args.n, args.p, args.m, args.reps, args.seed, doubling=args.doubling)
    out = est.to_dict()
    out["sqrt_n_scaled"] = math.sqrt(args.n) * est.value
    _emit(out)
    return 0


def _write_report(base: Path, records, fit=None, extra=None, timestamp=False) -> dict:
    paths = emit_outputs(records, base, timestamp=timestamp, fit=fit)
    if extra is not None:
        data = json.loads(paths["json"].read_text())
        data.update(extra)
        paths["json"].write_text(json.dumps(data, indent=1, default=_jsonable) + "\n")
    return paths


def cmd_rate(args) -> int:
    if args.config:
        cfg = ex.load_config(args.config)
    else:
        if not (args.spec and args.n_grid):
            print("error: rate needs --config or both --spec and --n-grid", file=sys.stderr)
            return 2
        cfg = {"spec": _spec(args.spec), "name": Path(args.spec).stem}
    for key in ("p", "route", "m", "reps", "seed", "workers"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.n_grid:
        cfg["n_grid"] = _grid(args.n_grid)
    fit = ex.run_rate_experiment(cfg)
    base = Path(args.out) / f"rate_{cfg.get('name', 'run')}"
    paths = _write_report(base, fit.records, fit, timestamp=args.timestamp)
    if args.plot:
        from .plots import rate_figure
        paths["png"] = rate_figure(fit, base, title=str(cfg.get("name", "")))
    sys.stdout.write(records_csv(fit.records, args.timestamp))
    print("#", json.dumps(fit.summary(), default=_jsonable))
    print("# wrote", " ".join(str(p) for p in paths.values()))
    return 0


def cmd_compare(args) -> int:
    cfg = ex.load_config(args.config)
    for key in ("C", "seed"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.wq is not None:
        cfg["wq"] = args.wq
    cmp = ex.run_bound_comparison(cfg)
    base = Path(args.out) / f"bound_{cfg['name']}"
    paths = _write_report(base, cmp.records, extra=cmp.to_dict(), timestamp=args.timestamp)
    if args.plot:
        from .plots import bound_figure
        paths["png"] = bound_figure(cmp, base, title=cfg["name"])
    cols = ["n", "beta_sq_X", "wp", "se", "epsilon", "term_leading", "term_lattice", "term_mixed",
            "term_tail", "total", "ratio", "status"]
    print(ex.format_table(cmp.rows, cols))
    if cmp.sweep:
        print()
        print(ex.format_table(cmp.sweep, ["n", "beta_sq_X", "status", "total", "smallest_eigenvalue"]))
    print("# wrote", " ".join(str(p) for p in paths.values()))
    return 0


def cmd_score_integral(args) -> int:
    spec = _spec(args.spec)
    law = ip.sum_law(spec, args.n) if args.n > 1 else ip.law_atoms(spec)
    si = ip.score_integral(law, args.p, t_min_split=args.t_split, T_max=args.t_max, tol=args.tol)
    out = dict(si.__dict__)
    if spec.dim == 1:
        out["wp_exact"] = ws.wp_quantile_exact(dist.Discrete1D(law[0].ravel(), law[1]), args.p)
    _emit(out)
    return 1 if si.flagged and args.strict else 0


def cmd_verify(args) -> int:
    from .verify import run_verify_suite
    results = run_verify_suite(args.seed, args.only)
    if args.acceptance:
        from .acceptance import run_acceptance
        results += run_acceptance(args.seed)
    for c in results:
        print(c.line(), flush=True)
    failed = [c.name for c in results if not c.passed]
    print(json.dumps({"summary": {"checks": len(results), "failed": failed}}))
    return 1 if failed else 0


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cltlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def spec_arg(p, required=True):
        p.add_argument("--spec", required=required,
                       help="spec file, inline JSON, or a built-in name (" + ", ".join(ex.builtin_specs()) + ")")

    p = sub.add_parser("moments", help="moment tensor E[X^(q)] as index,value lines")
    spec_arg(p)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(fn=cmd_moments)

    for name, fn in (("terms", cmd_terms), ("bound", cmd_bound)):
        p = sub.add_parser(name, help="bound ingredients" if name == "terms" else "non-asymptotic bound report")
        spec_arg(p)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--beta-sq", type=float, required=True, help="truncation of |X' - X|^2")
        p.add_argument("--n-mc", type=int, default=dist.DEFAULT_MC, help="pairs for continuous laws")
        p.add_argument("--seed", type=int, default=0)
        if name == "bound":
            p.add_argument("--q", type=float, default=3.0)
            p.add_argument("--C", type=float, default=1.0)
            p.add_argument("--wq", default="auto", help="auto | bonis:K | a number")
            p.add_argument("--m", type=int, default=2048)
            p.add_argument("--reps", type=int, default=32)
            p.add_argument("--split-root", action="store_true",
                           help="use beta_p^(1/p) + L_p^(1/p) in the denominator")
        p.set_defaults(fn=fn)

    p = sub.add_parser("wp", help="W_p(law of S_n, gamma)")
    spec_arg(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--m", type=int, default=2048)
    p.add_argument("--reps", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--route", choices=("quantile", "mc"), default="mc")
    p.add_argument("--doubling", action="store_true", help="also report the estimate at 2m")
    p.set_defaults(fn=cmd_wp)

    p = sub.add_parser("rate", help="rate experiment over an n grid")
    spec_arg(p, required=False)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--p", type=float)
    p.add_argument("--n-grid", help="comma-separated n values")
    p.add_argument("--route", choices=ex.ROUTES)
    p.add_argument("--m", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--plot", action="store_true", help="write a PNG next to the CSV")
    p.add_argument("--timestamp", action="store_true", help="add the timestamp column")
    p.set_defaults(fn=cmd_rate)

    p = sub.add_parser("compare", help="bound versus empirical table from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--C", type=float)
    p.add_argument("--wq")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--timestamp", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("score-integral", help="integral of the score norm for a finite-atom law")
    spec_arg(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--n", type=int, default=1, help="use the exact law of S_n")
    p.add_argument("--t-split", type=float, default=0.1)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--strict", action="store_true", help="exit 1 when the error budget exceeds --tol")
    p.set_defaults(fn=cmd_score_integral)

    p = sub.add_parser("verify", help="property suite; exit 0 iff every check passes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="*", help="suite names to run")
    p.add_argument("--acceptance", action="store_true", help="also run the ten acceptance criteria")
    p.set_defaults(fn=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SpecFileError, ex.RouteError, cb.TruncationHypothesisError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
