"""Command-line front end.

Every subcommand writes its outputs plus an echo of the effective
configuration (``config.txt``) into ``--out``; ``--config config.txt``
replays a run, with explicit flags taking precedence.  Tables go to stdout
as aligned text and to ``<name>.csv`` / ``<name>.txt`` in the output
directory.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import competing_risks as cr
from . import trend_tests as tt
from .config import format_config, parse_bool, read_config
from .cube import EDGES, fit_cube
from .diagnostics import cox_snell_residuals, cumulative_count, nelson_aalen, ttt_plot
from .distributions import Lifetime, frailty_from_variance, renewal_from_name
from .errors import DataError, DomainError, NumericalError, QuadratureError
from .events import parse_dataset, write_dataset
from .fitting import ModelFamily, fit
from .models import LogLinearModulatedModel, TRPModel, VirtualAgeModel
from .repair import policy_from_name
from .simulation import SimulationPlan, simulate
from .trends import trend_from_name

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# parameter syntax


def _value(text: str):
    text = text.strip()
    if "/" in text:
        return tuple(float(x) for x in text.split("/"))
    try:
        return float(text)
    except ValueError:
        return text


def parse_spec(text: str | None) -> tuple:
    """``"family:key=value,key=value"`` to ``(family, {key: value})``.

    Numbers become floats and ``a/b/c`` becomes a tuple of floats; a bare
    ``key=value`` list has an empty family name.
    """
    if text is None:
        return "", {}
    text = text.strip()
    if ":" in text:
        name, rest = text.split(":", 1)
    elif "=" in text:
        name, rest = "", text
    else:
        name, rest = text, ""
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise UsageError(f"expected key=value in {text!r}, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = _value(v)
        except ValueError:
            raise UsageError(f"bad number in {text!r}: {v!r}") from None
    return name.strip().lower(), params


def _numbers(params: dict, text: str) -> dict:
    for k, v in params.items():
        if isinstance(v, str):
            raise UsageError(f"parameter {k}={v!r} in {text!r} is not a number")
    return params


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}" if math.isfinite(v) else str(v)
    if isinstance(v, (np.floating,)):
        return _fmt(float(v))
    return str(v)


def emit_table(rows: list, name: str, out: Path, stream=None) -> None:
    """Print ``rows`` aligned and write ``name.txt`` and ``name.csv``."""
    stream = stream or sys.stdout
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    cells = [[_fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    text = "\n".join(lines) + "\n"
    stream.write(text)
    (out / f"{name}.txt").write_text(text, encoding="utf-8")
    with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(r[c])) if isinstance(r.get(c), (float, np.floating)) else r.get(c, "") for c in cols])


# --------------------------------------------------------------------------
# argument groups


def _add_common(p):
    p.add_argument("--out", default="repairable-out", help="output directory")
    p.add_argument("--config", help="flat 'section.key = value' file; explicit flags win")


def _add_data(p):
    p.add_argument("--events", help="events CSV (system_id,time[,mark])")
    p.add_argument("--windows", "--tau-file", dest="windows", help="windows CSV (system_id,censor_time)")
    p.add_argument("--tau", type=float, help="common window end when no windows file is given")
    p.add_argument("--covariates", help="covariates CSV (system_id,z1,...)")


def _add_family(p):
    p.add_argument("--model", default="trp", choices=["trp", "virtual-age", "loglinear-modulated"])
    p.add_argument("--renewal", default="weibull", help="exponential, weibull or gamma")
    p.add_argument("--trend", default="power", help="constant, power or loglinear")
    p.add_argument("--frailty", default="none", help="none or gamma")
    p.add_argument("--policy", default="perfect", help="virtual-age repair policy, e.g. age-reduction-full")
    p.add_argument("--links", default="identity,identity", help="g1,g2 for loglinear-modulated")
    p.add_argument("--init", help="starting values key=value,...")
    p.add_argument("--tol", type=float, default=1e-8)


def _add_cr(p):
    p.add_argument("--components", help="comma-separated component labels (default 1..n)")
    p.add_argument("--family", default="independent", help="gumbel:theta=... or independent")
    p.add_argument("--component-laws", default="exponential;exponential",
                   help="';'-separated per-component laws for the independent family, e.g. 'weibull:s=2,c=1;exponential:c=2'")
    p.add_argument("--policy", default="perfect-all",
                   help="perfect-all, minimal-all, partial, age-reduction-full:rho=a/b, "
                        "age-reduction-increment:rho=a/b or equal-age-two-type:rho=a/b")


def build_parser() -> tuple:
    parser = _Parser(prog="repairable", description="Repairable-systems reliability toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = subs["simulate"] = sub.add_parser("simulate", help="simulate a single-type model")
    _add_common(p)
    p.add_argument("--model", default="trp", choices=["trp", "virtual-age", "loglinear-modulated"])
    p.add_argument("--renewal", default="exponential", help="law[:s=..|gamma=..][,c=.. for virtual-age]")
    p.add_argument("--trend", default="constant:rate=1", help="constant:rate=..|power:c=..,b=..|loglinear:a0=..,a1=..")
    p.add_argument("--frailty", default="none", help="none or gamma:v=...")
    p.add_argument("--policy", default="perfect", help="virtual-age policy, e.g. kijima1:d=uniform")
    p.add_argument("--modulated", help="b0=..,b1=..,b2=..,g1=identity,g2=identity")
    p.add_argument("--beta", help="covariate coefficients a/b/...")
    p.add_argument("--covariates", help="covariates CSV keyed by simulated system ids")
    p.add_argument("--systems", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--prefix", default="s")

    p = subs["fit"] = sub.add_parser("fit", help="maximum-likelihood fit")
    _add_common(p)
    _add_data(p)
    _add_family(p)

    p = subs["cube"] = sub.add_parser("cube", help="fit the eight-corner model cube")
    _add_common(p)
    _add_data(p)
    p.add_argument("--renewal", default="weibull")
    p.add_argument("--trend", default="power")
    p.add_argument("--frailty", default="gamma")
    p.add_argument("--tol", type=float, default=1e-8)

    p = subs["trend-test"] = sub.add_parser("trend-test", help="trend tests")
    _add_common(p)
    _add_data(p)
    p.add_argument("--method", default="laplace", choices=sorted(tt.TESTS))
    p.add_argument("--alternative", default="two-sided", choices=["two-sided", "deteriorating", "improving"])
    p.add_argument("--resample", type=int, default=0, help="permutation replicates (0 = analytic p)")
    p.add_argument("--seed", type=int)

    p = subs["diagnose"] = sub.add_parser("diagnose", help="Nelson-Aalen, TTT and cumulative-count plot data")
    _add_common(p)
    _add_data(p)
    p.add_argument("--svg", action="store_true", help="also write .svg renderings")

    p = subs["residuals"] = sub.add_parser("residuals", help="integrated-intensity residual checks")
    _add_common(p)
    _add_data(p)
    _add_family(p)
    p.add_argument("--at", help="evaluate at these parameters (key=value,...) instead of fitting")

    p = subs["cr-simulate"] = sub.add_parser("cr-simulate", help="simulate a marked competing-risks process")
    _add_common(p)
    _add_cr(p)
    p.add_argument("--systems", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--prefix", default="s")

    p = subs["cr-loglik"] = sub.add_parser("cr-loglik", help="marked log-likelihood")
    _add_common(p)
    _add_data(p)
    _add_cr(p)
    p.add_argument("--frailty-variances", help="per-type gamma frailty variances a/b/...")
    return parser, subs


# --------------------------------------------------------------------------
# helpers


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"{args.command}: --{n.replace('_', '-')} is required")


def _load(args):
    _require(args, "events")
    if args.windows is None and args.tau is None:
        raise UsageError(f"{args.command}: give --windows/--tau-file or --tau")
    return parse_dataset(args.events, args.windows, tau=args.tau, covariates=args.covariates)


def _frailty(text):
    name, p = parse_spec(text)
    if name in ("", "none"):
        return frailty_from_variance(0.0)
    if name != "gamma":
        raise UsageError(f"unknown frailty {name!r}; expected none or gamma")
    return frailty_from_variance(float(p.get("v", p.get("variance", 0.0))))


def _policy(text):
    name, p = parse_spec(text)
    return policy_from_name(name, **p)


def _sim_model(args):
    frailty = _frailty(args.frailty)
    beta = None
    if args.beta:
        beta = tuple(float(x) for x in args.beta.split("/"))
    if args.model == "trp":
        rname, rp = parse_spec(args.renewal)
        tname, tp = parse_spec(args.trend)
        return TRPModel(renewal_from_name(rname, **_numbers(rp, args.renewal)),
                        trend_from_name(tname, **_numbers(tp, args.trend)), frailty, beta)
    if args.model == "virtual-age":
        rname, rp = parse_spec(args.renewal)
        rp = _numbers(rp, args.renewal)
        life = Lifetime(renewal_from_name(rname, **rp), rp.get("c", rp.get("rate", 1.0)))
        return VirtualAgeModel(life, _policy(args.policy), frailty, beta)
    _, mp = parse_spec(args.modulated or "")
    return LogLinearModulatedModel(
        float(mp.get("b0", 0.0)), float(mp.get("b1", 0.0)), float(mp.get("b2", 0.0)),
        str(mp.get("g1", "identity")), str(mp.get("g2", "identity")), frailty, beta,
    )


def _family(args, d) -> ModelFamily:
    frailty = parse_spec(args.frailty)[0] not in ("", "none")
    policy = _policy(args.policy) if args.model == "virtual-age" else None
    links = tuple(s.strip() for s in args.links.split(","))
    return ModelFamily(
        args.model, parse_spec(args.renewal)[0], parse_spec(args.trend)[0], frailty, policy, links,
        d.covariate_dim,
    )


def _cr_setup(args):
    fname, fp = parse_spec(args.family)
    if fname == "gumbel":
        fam = cr.GumbelBivariateExponential(float(fp.get("theta", 0.0)))
    elif fname == "independent":
        laws = []
        for item in filter(None, (s.strip() for s in args.component_laws.split(";"))):
            n, p = parse_spec(item)
            p = _numbers(p, item)
            laws.append(Lifetime(renewal_from_name(n, **p), p.get("c", p.get("rate", 1.0))))
        fam = cr.IndependentComponents(laws)
    else:
        raise UsageError(f"unknown competing-risks family {fname!r}; expected gumbel or independent")
    comps = cr.ComponentSet.of(args.components.split(",") if args.components else fam.n)
    pname, pp = parse_spec(args.policy)
    policy = cr.multi_policy_from_name(pname, pp.get("rho"))
    return fam, comps, policy


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, out):
    _require(args, "systems", "tau", "seed")
    spec = _sim_model(args)
    cov = None
    if args.covariates:
        from .events import read_covariates

        table = read_covariates(args.covariates)
        ids = [f"{args.prefix}{i + 1}" for i in range(args.systems)]
        missing = [i for i in ids if i not in table]
        if missing:
            raise DataError(f"covariates missing for system {missing[0]}")
        cov = np.array([table[i] for i in ids])
    d = simulate(SimulationPlan(spec, args.systems, args.tau, args.seed, cov, args.prefix))
    write_dataset(d, out / "events.csv", out / "windows.csv", out / "covariates.csv" if cov is not None else None)
    emit_table([{"systems": len(d), "events": d.n_events, "mean_events": d.n_events / len(d)}], "summary", out)


def cmd_fit(args, out):
    d = _load(args)
    fam = _family(args, d)
    init = _numbers(parse_spec(args.init)[1], args.init) if args.init else None
    res = fit(fam, d, init=init, tol=args.tol)
    rows = [{"parameter": k, "estimate": float(v), "boundary": bool(res.boundary.get(k, False))}
            for k, v in res.estimates.items()]
    emit_table(rows, "estimates", out)
    summary = {"model": res.corner, "loglik": float(res.loglik), "converged": res.converged,
               "iterations": res.iterations}
    summary.update({k: str(v) for k, v in res.flags.items()})
    emit_table([summary], "fit", out)
    if not res.converged:
        raise NumericalError(f"optimizer did not converge: {res.message}")


def cmd_cube(args, out):
    d = _load(args)
    rep = fit_cube(d, args.renewal, args.trend, args.frailty, tol=args.tol)
    text = rep.render()
    print(text)
    (out / "cube_render.txt").write_text(text + "\n", encoding="utf-8")
    emit_table(rep.records(), "cube", out)
    edges = []
    for p, r in EDGES:
        e = rep.edge(p, r)
        edges.append({"poorer": p, "richer": r, "2dl": float(e.statistic), "df": e.df,
                      "p_naive": float(e.p_naive), "p_boundary": float(e.p_boundary)})
    emit_table(edges, "edges", out)
    if not rep.monotone():
        print("warning: cube log-likelihoods are not monotone along every edge", file=sys.stderr)


def cmd_trend_test(args, out):
    d = _load(args)
    if args.resample and args.seed is None:
        raise UsageError("trend-test: --seed is required with --resample")
    test = tt.TESTS[args.method]
    rows = []

    def run(x, seed):
        if args.resample:
            return tt.resampled_null(test, x, args.resample, seed, args.alternative)
        try:
            return test(x, alternative=args.alternative)
        except TypeError:
            return test(x)

    if args.method in tt.PER_SYSTEM:
        for i, h in enumerate(d.systems):
            row = {"system_id": h.system_id}
            try:
                row.update(run(h, (args.seed or 0) + i).to_record())
            except DataError as exc:
                row.update({"method": args.method, "statistic": math.nan, "p": math.nan, "note": str(exc)})
            rows.append(row)
    else:
        rows.append({"system_id": "pooled", **run(d, args.seed or 0).to_record()})
    emit_table(rows, "trend_test", out)


def cmd_diagnose(args, out):
    d = _load(args)
    mcf = nelson_aalen(d)
    mcf.to_csv(out / "nelson_aalen.csv")
    ttt = ttt_plot(d)
    ttt.to_csv(out / "ttt.csv")
    if len(d) == 1:
        cumulative_count(d.systems[0]).to_csv(out / "cumulative_count.csv")
    if args.svg:
        mcf.to_svg(out / "nelson_aalen.svg", "Nelson-Aalen mean cumulative function")
        ttt.to_svg(out / "ttt.svg", "TTT plot")
    emit_table([{"systems": len(d), "events": d.n_events, "mcf_end": float(mcf.value[-1]),
                 "ttt_concavity": ttt.concavity, "ttt_max_deviation": ttt.max_deviation}], "diagnose", out)


def cmd_residuals(args, out):
    d = _load(args)
    fam = _family(args, d)
    if args.at:
        values = dict(fam.fixed_values())
        values.update(_numbers(parse_spec(args.at)[1], args.at))
        missing = [n for n in fam.param_names if n not in values]
        if missing:
            raise UsageError(f"residuals: --at lacks parameter {missing[0]!r}")
        target = fam.build(values)
    else:
        target = fit(fam, d, tol=args.tol)
    rep = cox_snell_residuals(target, d)
    rows = [{"system_id": sid, "index": i + 1, "increment": float(x)}
            for sid, inc in rep.increments.items() for i, x in enumerate(inc)]
    with open(out / "residuals.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system_id", "index", "increment"])
        for r in rows:
            w.writerow([r["system_id"], r["index"], repr(r["increment"])])
    emit_table(rep.to_records(), "residual_checks", out)


def cmd_cr_simulate(args, out):
    _require(args, "systems", "tau", "seed")
    fam, comps, policy = _cr_setup(args)
    d = cr.simulate_marked_dataset(policy, fam, args.systems, args.tau, args.seed, comps, args.prefix)
    write_dataset(d, out / "events.csv", out / "windows.csv")
    counts = {f"n_{c}": sum(h.marks.count(c) for h in d.systems) for c in comps.labels}
    emit_table([{"systems": len(d), "events": d.n_events, **counts}], "summary", out)


def cmd_cr_loglik(args, out):
    _require(args, "events")
    if args.windows is None and args.tau is None:
        raise UsageError("cr-loglik: give --windows/--tau-file or --tau")
    fam, comps, policy = _cr_setup(args)
    d = parse_dataset(args.events, args.windows, tau=args.tau, mark_set=comps.labels)
    if args.frailty_variances:
        deltas = [float(x) for x in args.frailty_variances.split("/")]
        rep = cr.marked_loglik_frailty(policy, fam, d, deltas, comps)
    else:
        rep = cr.marked_loglik(policy, fam, d, comps)
    rows = [{"system_id": s, "loglik": float(v)} for s, v in zip(rep.system_ids, rep.per_system)]
    rows.append({"system_id": "total", "loglik": float(rep.total)})
    emit_table(rows, "cr_loglik", out)


COMMANDS = {
    "simulate": cmd_simulate, "fit": cmd_fit, "cube": cmd_cube, "trend-test": cmd_trend_test,
    "diagnose": cmd_diagnose, "residuals": cmd_residuals, "cr-simulate": cmd_cr_simulate,
    "cr-loglik": cmd_cr_loglik,
}

_NOT_ECHOED = {"command", "config"}


def _apply_config(args, argv, parser, subs):
    cfg = read_config(args.config)
    sub = subs[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for section in ("common", args.command):
        for key, text in cfg.get(section, {}).items():
            if key in _NOT_ECHOED or key not in actions or key == "help":
                raise UsageError(f"config key {section}.{key} is not an option of {args.command}")
            a = actions[key]
            if isinstance(a, argparse._StoreTrueAction):
                defaults[key] = parse_bool(text)
            elif a.type is not None:
                try:
                    defaults[key] = a.type(text)
                except ValueError:
                    raise UsageError(f"config key {section}.{key}: bad value {text!r}") from None
            else:
                defaults[key] = text
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(f"missing subcommand; choose one of {', '.join(COMMANDS)}")
    if args.config:
        args = _apply_config(args, argv, parser, subs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED}
    (out / "config.txt").write_text(format_config(args.command, echo), encoding="utf-8")
    COMMANDS[args.command](args, out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QuadratureError as exc:
        print(f"numerical failure: {exc} (best estimate {exc.estimate!r}, gap {exc.gap!r})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
