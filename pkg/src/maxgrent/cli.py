"""Command-line interface: ``maxgrent {solve,certify,enumerate,compare,reproduce}``.

Exit codes: 0 clean, 2 precondition warnings, 1 hard errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .combinatorics import EnumerationCapExceeded, argmax_realizations, classify, enumerate_points, exact_ratio, realizations
from .concentration import NoConcentration, PreconditionError, distance_ratio_bound, prob_ratio_bound, threshold, value_ratio_bound
from .entropy import g_rel_entropy
from .linprog import LPError, sum_range
from .model import CountVector, Prior, ProblemSpec, SpecError, load_spec, scale_spec, serialize_spec
from .solver import SolverError, prior_transfer, round_to_counts, solve, solve_minidiv
from .tables import TABLE_IDS, reproduce

EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2
CLI_CAP = 10**6


class CLIError(Exception):
    """Hard error reported with exit code 1."""


@dataclass
class RunReport:
    command: str
    spec_digest: Optional[str] = None
    solution: Optional[dict] = None
    concentration: Optional[dict] = None
    enumeration: Optional[dict] = None
    extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timestamp: Optional[str] = None

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "spec_digest": self.spec_digest,
            "solution": self.solution,
            "concentration": self.concentration,
            "enumeration": self.enumeration,
            "warnings": list(self.warnings),
        }
        out.update(self.extra)
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out


# ------------------------------------------------------------ formatting


def _sci(log10v: float) -> str:
    """Scientific notation with 2 significant digits from a log10 value."""
    if not math.isfinite(log10v):
        return str(log10v)
    e = math.floor(log10v)
    mant = 10 ** (log10v - e)
    if round(mant, 1) >= 10:
        mant, e = mant / 10, e + 1
    return f"{mant:.1f}e{e:+d}"


def _vec(v) -> list:
    return [float(x) for x in np.asarray(v, dtype=float)]


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def _digest(spec: ProblemSpec) -> str:
    return hashlib.sha256(serialize_spec(spec).encode()).hexdigest()


def _solution_summary(sol) -> dict:
    names = list(sol.spec.variable_names)
    return {
        "variables": names,
        "x_star": _vec(sol.x_star),
        "chi_star": _vec(sol.chi_star),
        "s_star": float(sol.s_star),
        "G_star": float(sol.g_star),
        "nu_star": list(sol.nu_star.entries),
        "n_star": int(sol.n_star),
        "lambda": _vec(sol.duals.lam),
        "zeta": _vec(sol.duals.zeta),
        "removed_zeros": sorted(int(j) for j in sol.removed_zeros),
    }


# ------------------------------------------------------------ loading


def _prior_arg(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load(args) -> ProblemSpec:
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise CLIError(f"cannot read {args.spec}: {exc.strerror or exc}") from exc
    if getattr(args, "prior", None):
        kind = getattr(args, "prior_kind", None) or "general"
        spec = spec.with_prior(Prior.from_values(_prior_arg(args.prior), kind))
    elif getattr(args, "prior_kind", None):
        spec = spec.with_prior(Prior(spec.prior.exact, args.prior_kind))
    if getattr(args, "tolerance_delta", None) is not None:
        spec = spec.with_tolerance(delta=args.tolerance_delta)
    return spec


# ------------------------------------------------------------ commands


def cmd_solve(args) -> RunReport:
    spec = _load(args)
    sol = solve(spec)
    rep = RunReport("solve", _digest(spec), _solution_summary(sol))
    rep.warnings.extend(sol.warnings)
    return rep


def _flags_to_warnings(rep: RunReport, flags: dict):
    for name, item in flags.items():
        if not item["ok"]:
            rep.warnings.append(f"precondition {name} failed: {item['message']}")


def cmd_certify(args) -> RunReport:
    spec = _load(args)
    sol = solve(spec)
    rng = sum_range(spec)
    delta = float(spec.tolerance.delta) if args.delta is None else args.delta
    if args.mode == "value":
        if args.eta is None:
            raise CLIError("--eta is required in value mode")
        params = {"eta": args.eta, "delta": delta}
    else:
        if args.theta is None:
            raise CLIError("--theta is required in distance mode")
        params = {"theta": args.theta, "delta": delta}
    rep = RunReport("certify", _digest(spec), _solution_summary(sol))
    rep.warnings.extend(sol.warnings)
    conc: dict = {"delta": delta, "epsilon": args.epsilon, "rho_norm": args.rho_norm}
    try:
        tr = threshold(sol, rng, mode=args.mode, params=params, epsilon=args.epsilon, rho_norm=args.rho_norm, eta_condition=args.eta_condition)
    except NoConcentration as exc:
        rep.warnings.append(f"no concentration: {exc}")
        rep.concentration = conc
        return rep
    conc.update(tr.as_dict())
    _flags_to_warnings(rep, conc["preconditions"])
    if args.scale is not None:
        c = args.scale
        if spec.prior.is_density:
            lb = prob_ratio_bound(sol, rng, mode=args.mode, params=params, c=c)
            conc["scaled_bound_kind"] = "probability ratio"
        else:
            ssp = scale_spec(spec, c)
            ssol = solve(ssp)
            srng = sum_range(ssp)
            if args.mode == "value":
                lb, fl = value_ratio_bound(ssol, srng, eta=args.eta, delta=delta, rho_norm=args.rho_norm)
            else:
                lb, fl = distance_ratio_bound(ssol, srng, theta=args.theta, delta=delta, rho_norm=args.rho_norm)
            conc["scaled_bound_kind"] = "realization ratio"
            _flags_to_warnings(rep, {f"scaled_{k}": v for k, v in fl.as_dict().items()})
        conc["scale"] = c
        conc["scaled_log10_bound"] = lb / math.log(10)
    rep.concentration = conc
    return rep


def cmd_enumerate(args) -> RunReport:
    spec = _load(args)
    delta = float(spec.tolerance.delta) if args.delta is None else args.delta
    cap = args.cap if args.cap is not None else args.max_points
    try:
        pts = enumerate_points(spec, delta, cap=cap)
    except EnumerationCapExceeded as exc:
        rep = RunReport("enumerate", _digest(spec))
        rep.warnings.append(f"enumeration cap exceeded ({exc}); the instance is too large, use `certify` for bounds instead")
        return rep
    universe = [CountVector(tuple(int(v) for v in p)) for p in pts]
    mu = spec.prior
    winners, best = argmax_realizations(universe, mu)
    win = {w.entries for w in winners}
    rows = []
    cls = {}
    enum: dict = {"size": len(universe), "delta": delta}
    sol = None
    if args.classify:
        mode, _, val = args.classify.partition(":")
        if mode not in ("value", "distance") or not val:
            raise CLIError("--classify expects value:ETA or distance:THETA")
        sol = solve(spec)
        es = classify(universe, sol, mode, float(val), delta=delta)
        cls = {v.entries: "A" for v in es.members_A}
        cls.update({v.entries: "B" for v in es.members_B})
        ratio, pair = exact_ratio(sol, es)
        enum.update(
            {
                "mode": mode,
                "parameter": float(val),
                "size_A": len(es.members_A),
                "size_B": len(es.members_B),
                "total_A": es.realizations_A if es.realizations_A is not None else f"exp({es.log_realizations_A:.6g})",
                "total_B": es.realizations_B if es.realizations_B is not None else f"exp({es.log_realizations_B:.6g})",
                "ratio": ratio,
                "ratio_exact": None if pair is None else f"{pair[0]}/{pair[1]}",
                "nu_star": list(sol.nu_star.entries),
            }
        )
    for v in universe:
        rc = realizations(v, mu)
        rows.append(
            {
                "nu": list(v.entries),
                "n": v.n,
                "count": rc.value if rc.value is not None else f"exp({rc.log_value:.10g})",
                "class": cls.get(v.entries, ""),
                "argmax": v.entries in win,
            }
        )
    enum["argmax"] = [list(w) for w in sorted(win)]
    enum["argmax_count"] = best
    enum["rows"] = rows
    rep = RunReport("enumerate", _digest(spec), _solution_summary(sol) if sol else None, enumeration=enum)
    if len(win) > 1:
        rep.extra["ties"] = len(win)
    return rep


def cmd_compare(args) -> RunReport:
    spec = _load(args)
    rep = RunReport("compare", _digest(spec))
    md = solve_minidiv(spec)
    mu = spec.prior.values
    v_hat = round_to_counts(md.u_star)
    cmp: dict = {
        "u_star": _vec(md.u_star),
        "v_hat": list(v_hat.entries),
        "D_min": float(md.d_min),
        "G_u_star": g_rel_entropy(md.u_star, mu),
        "G_v_hat": g_rel_entropy(v_hat.as_array(), mu),
    }
    try:
        sol = solve(spec)
    except (SolverError, LPError) as exc:
        rep.warnings.append(f"MAXGRENT side not available: {exc}")
        rep.extra["compare"] = cmp
        return rep
    rep.solution = _solution_summary(sol)
    rep.warnings.extend(sol.warnings)
    x = sol.x_star
    cmp["linf_v_hat_x_star"] = float(np.abs(v_hat.as_array() - x).max())
    cmp["linf_v_hat_nu_star"] = float(np.abs(v_hat.as_array() - sol.nu_star.as_array()).max())
    cmp["linf_u_star_x_star"] = float(np.abs(md.u_star - x).max())
    # prior transfer both ways
    t1 = solve_minidiv(prior_transfer(sol, spec, "maxgrent-to-minidiv"))
    r1 = float(np.abs(t1.u_star - x).max() / max(1.0, np.abs(x).max()))
    sp2 = prior_transfer(md, spec, "minidiv-to-maxgrent")
    t2 = solve(sp2)
    r2 = float(np.abs(t2.x_star - md.u_star).max() / max(1.0, np.abs(md.u_star).max()))
    cmp["transfer_residual_maxgrent_to_minidiv"] = r1
    cmp["transfer_residual_minidiv_to_maxgrent"] = r2
    for name, r in (("maxgrent-to-minidiv", r1), ("minidiv-to-maxgrent", r2)):
        if r > 1e-5:
            rep.warnings.append(f"prior transfer {name} residual {r:.3g} exceeds 1e-5")
    rep.extra["compare"] = cmp
    return rep


def cmd_reproduce(args) -> RunReport:
    if args.table not in TABLE_IDS:
        raise CLIError(f"unknown table {args.table!r}; choose from {', '.join(TABLE_IDS)}")
    res = reproduce(args.table, rho_norm=args.rho_norm)
    rep = RunReport("reproduce")
    rep.extra["table"] = res.as_dict()
    rep.extra["notes"] = list(res.warnings)
    if not res.ok:
        bad = [c.label for c in res.cells if not c.ok and not c.skipped]
        rep.extra["mismatches"] = bad
    return rep


# ------------------------------------------------------------ rendering


def _render_solution(s: dict, out):
    print(f"s*  = {s['s_star']:.4f}", file=out)
    print(f"G*  = {s['G_star']:.1f}", file=out)
    print(f"n*  = {s['n_star']}", file=out)
    print(f"{'variable':>10} {'x*':>12} {'chi*':>10} {'nu*':>6}", file=out)
    for name, x, c, v in zip(s["variables"], s["x_star"], s["chi_star"], s["nu_star"]):
        print(f"{name:>10} {x:12.4f} {c:10.6f} {v:6d}", file=out)
    print("lambda = " + " ".join(f"{v:.6g}" for v in s["lambda"]), file=out)
    print("zeta   = " + " ".join(f"{v:.6g}" for v in s["zeta"]), file=out)


def _render(rep: RunReport, args, out):
    d = rep.as_dict()
    if rep.command == "enumerate" and rep.enumeration and args.csv:
        w = csv.writer(out, lineterminator="\n")
        e = rep.enumeration
        nvar = len(e["rows"][0]["nu"]) if e["rows"] else 0
        w.writerow([f"v{j + 1}" for j in range(nvar)] + ["n", "count", "class", "argmax"])
        for r in e["rows"]:
            w.writerow(r["nu"] + [r["n"], r["count"], r["class"], "*" if r["argmax"] else ""])
        print(f"# size={e['size']} argmax={e['argmax']} count={e['argmax_count']}", file=out)
        if "total_A" in e:
            print(f"# total_A={e['total_A']} total_B={e['total_B']} ratio={e['ratio_exact'] or e['ratio']}", file=out)
    elif rep.command == "reproduce":
        t = d["table"]
        print(f"table {t['table']}: {'OK' if t['ok'] else 'MISMATCH'}", file=out)
        for c in t["cells"]:
            status = "skip" if c["skipped"] else ("ok" if c["ok"] else "FAIL")
            print(f"  [{status:>4}] {c['label']}: expected {c['expected']} observed {c['observed']} ({c['tolerance']})", file=out)
        for n in d.get("notes", []):
            print(f"note: {n}", file=out)
    else:
        if rep.solution:
            _render_solution(rep.solution, out)
        if rep.concentration:
            c = rep.concentration
            if "c_hat" in c:
                print(f"mode = {c['mode']}  prior = {c['prior_kind']}  rho_inf = {c['rho_inf']:.4g}", file=out)
                print(f"ratio bound = {_sci(c['log10_ratio_bound'])} (log10 {c['log10_ratio_bound']:.2f})", file=out)
                c2 = "n/a" if c["c2"] is None else f"{c['c2']:.4g}"
                print(f"c1 = {c['c1']:.4g}  c2 = {c2}  c3 = {c['c3']:.4g}  c_hat = {c['c_hat']:.4g}", file=out)
                print(f"alpha = {c['alpha']:.4g}  beta = {c['beta']:.4g}  -ln K = {-c['log_K']:.4g}", file=out)
                for name, f in c["preconditions"].items():
                    print(f"  [{'ok' if f['ok'] else 'no':>2}] {name}: {f['message']}", file=out)
            if "scaled_log10_bound" in c:
                print(f"scaled (c = {c['scale']:g}) {c['scaled_bound_kind']} bound = {_sci(c['scaled_log10_bound'])} (log10 {c['scaled_log10_bound']:.2f})", file=out)
        if rep.enumeration:
            e = rep.enumeration
            for r in e["rows"]:
                mark = " *" if r["argmax"] else ""
                print(f"{tuple(r['nu'])}  n={r['n']}  #={r['count']} {r['class']}{mark}", file=out)
            print(f"size = {e['size']}  argmax = {e['argmax']} with {e['argmax_count']}", file=out)
            if "total_A" in e:
                print(f"#A = {e['total_A']}  #B = {e['total_B']}  ratio = {e['ratio_exact'] or e['ratio']}", file=out)
        if "compare" in d:
            c = d["compare"]
            print(f"G(u*||mu) = {c['G_u_star']:.1f}   G(v_hat||mu) = {c['G_v_hat']:.1f}", file=out)
            print("u*    = " + " ".join(f"{v:.3f}" for v in c["u_star"]), file=out)
            print("v_hat = " + " ".join(str(v) for v in c["v_hat"]), file=out)
            for k in ("linf_v_hat_x_star", "linf_v_hat_nu_star", "transfer_residual_maxgrent_to_minidiv", "transfer_residual_minidiv_to_maxgrent"):
                if k in c:
                    print(f"{k} = {c[k]:.4g}", file=out)
    pre = "# " if rep.command == "enumerate" and getattr(args, "csv", False) else ""
    for w in rep.warnings:
        print(f"{pre}warning: {w}", file=out)
    if rep.timestamp:
        print(f"{pre}timestamp: {rep.timestamp}", file=out)


# ------------------------------------------------------------ parser


def _global(parser: argparse.ArgumentParser, suppress: bool):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--json", action="store_true", help="emit one JSON report", **kw)
    parser.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field", **kw)
    parser.add_argument("--tolerance-delta", type=float, help="override the spec's relative tolerance", **({"default": argparse.SUPPRESS} if suppress else {"default": None}))
    parser.add_argument("--max-points", type=int, help="enumeration cap", **({"default": argparse.SUPPRESS} if suppress else {"default": CLI_CAP}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxgrent", description="Maximum generalized relative entropy inference over count vectors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def spec_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global(sp, suppress=True)
        sp.add_argument("spec", help="problem spec (JSON)")
        sp.add_argument("--prior", help="comma-separated prior values overriding the spec")
        sp.add_argument("--prior-kind", choices=("count", "density", "general"))
        return sp

    spec_cmd("solve", "solve the MAXGRENT problem")

    c = spec_cmd("certify", "concentration bounds and thresholds")
    c.add_argument("--mode", choices=("value", "distance"), default="value")
    c.add_argument("--eta", type=float)
    c.add_argument("--theta", type=float)
    c.add_argument("--delta", type=float, help="tolerance delta (defaults to the spec's)")
    c.add_argument("--epsilon", type=float, default=1e-3)
    c.add_argument("--scale", type=float, help="evaluate the ratio bound on the problem scaled by c")
    c.add_argument("--rho-norm", choices=("row-l1", "max-abs"), default="row-l1")
    c.add_argument("--eta-condition", choices=("printed", "derived"), default="printed")

    e = spec_cmd("enumerate", "exact enumeration of the count vectors")
    e.add_argument("--delta", type=float)
    e.add_argument("--classify", help="value:ETA or distance:THETA")
    e.add_argument("--cap", type=int, help="maximum number of points")
    e.add_argument("--csv", action="store_true", help="CSV output")

    spec_cmd("compare", "compare MAXGRENT with MINIDIV")

    r = sub.add_parser("reproduce", help="regenerate a stored table and diff it")
    _global(r, suppress=True)
    r.add_argument("table", help=f"one of {', '.join(TABLE_IDS)}")
    r.add_argument("--rho-norm", choices=("row-l1", "max-abs"), default="row-l1")
    return p


COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "enumerate": cmd_enumerate,
    "compare": cmd_compare,
    "reproduce": cmd_reproduce,
}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        rep = COMMANDS[args.command](args)
    except (CLIError, SpecError, SolverError, LPError, PreconditionError, EnumerationCapExceeded, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ERROR
    except Exception as exc:  # never a traceback on malformed input
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_ERROR
    if not args.no_timestamp:
        rep.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if args.json:
        print(json.dumps(_jsonable(rep.as_dict()), indent=2, sort_keys=True), file=out)
    else:
        buf = io.StringIO()
        _render(rep, args, buf)
        out.write(buf.getvalue())
    if rep.command == "reproduce":
        return EXIT_OK if rep.extra["table"]["ok"] else EXIT_WARN
    return EXIT_WARN if rep.warnings else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
