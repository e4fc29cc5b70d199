"""Command-line front end: run simulations, analyze samples, export curves.

Subcommands: simulate, analyze, sweep, fp, hierarchy, family. Exit codes:
0 success, 2 bad user input, 3 internal invariant failure. All output data
files are byte-stable across reruns; timestamps appear only in metadata
and are suppressed by --deterministic.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import (
    EmpiricalDistribution,
    entropy as hist_entropy,
    fit_exponential,
    fit_gamma,
    fit_pareto_tail,
    histogram,
    lorenz_curve,
    pair_sum_samples,
    two_class_fit,
)
from .engine import ModelSpec, run_replicas
from .errors import ConfigError, InternalInvariantError, KinexError
from .fokker_planck import (DriftDiffusion, beta_from_gamma, beta_from_lambda,
                            default_grid, pdf_interpolating, stationary_solution)
from .kinetic import (
    Bank,
    FirmEconomy,
    FirmParams,
    FixedAmount,
    FixedDirectedLinks,
    Limit,
    NoDebt,
    Proportional,
    RandomFractionOfMean,
    RandomFractionOfPairMean,
    RandomSaving,
    Saving,
    UniformSymmetric,
    Unlimited,
)
from .rng import RngStream
from .wealth import Additive, GrowthExchange, Market, MeanFieldGrowth, Multiplicative, hierarchy_incomes


def _count(text: str) -> int:
    """Integer argument accepting scientific notation like 1e7."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    rounded = int(round(value))
    if abs(value - rounded) > 1e-9 * max(1.0, abs(value)):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return rounded


def _fraction(text: str) -> float:
    """Float argument accepting p/q fractions like 1/3."""
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad fraction: {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _value_list(text: str) -> list[float]:
    return [_fraction(tok) for tok in text.split(",") if tok.strip()]


_MODEL_NAMES = ["fixed", "frac-mean", "frac-pair-mean", "proportional",
                "saving", "random-saving", "growth", "meanfield", "market", "firm"]


def _add_model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", choices=_MODEL_NAMES, help="exchange rule to run")
    sub.add_argument("--amount", type=float, help="transfer size for the fixed rule")
    sub.add_argument("--gamma", type=_fraction, help="transfer fraction (proportional/growth)")
    sub.add_argument("--lambda", dest="lam", type=_fraction, help="saving propensity")
    sub.add_argument("--zeta", type=float, help="growth factor per trade (growth rule)")
    sub.add_argument("--J", type=float, help="redistribution coupling (meanfield)")
    sub.add_argument("--mean-eta", type=float, help="mean growth rate (meanfield)")
    sub.add_argument("--sigma2", type=float, help="noise half-variance (meanfield)")
    sub.add_argument("--dt", type=float, help="integration step (meanfield)")
    sub.add_argument("--shares", type=float, help="initial shares per agent (market)")
    sub.add_argument("--redraw-prob", type=float, help="preference redraw probability (market)")
    sub.add_argument("--v", type=float, help="demand scale (firm)")
    sub.add_argument("--eta", type=float, help="demand elasticity exponent (firm)")
    sub.add_argument("--chi", type=float, help="labor exponent (firm)")
    sub.add_argument("--wage", type=float, help="wage per worker (firm)")
    sub.add_argument("--interest", type=float, help="interest per unit capital (firm)")
    sub.add_argument("--credit", choices=["none", "limit", "bank", "unlimited"],
                     default="none", help="credit policy")
    sub.add_argument("--max-debt", type=float, help="per-agent debt limit (credit=limit)")
    sub.add_argument("--reserve-ratio", type=_fraction, help="bank reserve ratio (credit=bank)")
    sub.add_argument("--pairing", choices=["uniform", "directed"], default="uniform")
    sub.add_argument("--pairing-seed", type=int, help="seed for the directed-link orientation")
    sub.add_argument("--agents", type=_count, default=1000, help="population size")
    sub.add_argument("--m0", type=float, default=1000.0, help="initial balance per agent")
    sub.add_argument("--steps", type=_count, default=1_000_000, help="transaction attempts")
    sub.add_argument("--stride", type=_count, help="snapshot stride (default steps/10)")


def _require(args, names: list[str], model: str) -> list[float]:
    vals = []
    for name in names:
        v = getattr(args, name)
        if v is None:
            raise ConfigError(f"--model {model} requires --{name.replace('_', '-')}")
        vals.append(v)
    return vals


def _rule_from_args(args):
    model = args.model
    if model is None:
        raise ConfigError("give --model or --config")
    if model == "fixed":
        return FixedAmount(args.amount if args.amount is not None else 1.0)
    if model == "frac-mean":
        return RandomFractionOfMean()
    if model == "frac-pair-mean":
        return RandomFractionOfPairMean()
    if model == "proportional":
        (gamma,) = _require(args, ["gamma"], model)
        return Proportional(gamma)
    if model == "saving":
        (lam,) = _require(args, ["lam"], model)
        return Saving(lam)
    if model == "random-saving":
        return RandomSaving()
    if model == "growth":
        gamma, zeta = _require(args, ["gamma", "zeta"], model)
        return GrowthExchange(gamma, zeta)
    if model == "meanfield":
        kwargs = {}
        if args.J is not None:
            kwargs["J"] = args.J
        if args.mean_eta is not None:
            kwargs["mean_eta"] = args.mean_eta
        if args.sigma2 is not None:
            kwargs["sigma2"] = args.sigma2
        if args.dt is not None:
            kwargs["dt"] = args.dt
        return MeanFieldGrowth(**kwargs)
    if model == "market":
        shares = args.shares if args.shares is not None else 1.0
        return Market(initial_shares=shares, redraw_prob=args.redraw_prob)
    if model == "firm":
        v, eta, chi, wage, interest = _require(
            args, ["v", "eta", "chi", "wage", "interest"], model)
        return FirmEconomy(FirmParams(v=v, eta=eta, chi=chi, wage=wage, interest=interest))
    raise ConfigError(f"unknown model {model!r}")


def _credit_from_args(args):
    if args.credit == "none":
        return NoDebt()
    if args.credit == "limit":
        if args.max_debt is None:
            raise ConfigError("--credit limit requires --max-debt")
        return Limit(args.max_debt)
    if args.credit == "bank":
        if args.reserve_ratio is None:
            raise ConfigError("--credit bank requires --reserve-ratio")
        return Bank(args.reserve_ratio)
    return Unlimited()


def _pairing_from_args(args):
    if args.pairing == "directed":
        return FixedDirectedLinks(seed=args.pairing_seed)
    return UniformSymmetric()


def _spec_from_args(args) -> ModelSpec:
    rule = _rule_from_args(args)
    stride = args.stride if args.stride is not None else max(1, args.steps // 10)
    return ModelSpec(
        exchange_rule=rule,
        agent_count=args.agents,
        initial_balance=args.m0,
        step_budget=args.steps,
        snapshot_stride=stride,
        credit_policy=_credit_from_args(args),
        pairing_policy=_pairing_from_args(args),
        seed=args.seed if args.seed is not None else 0,
    )


def _workers() -> int | None:
    raw = os.environ.get("KINEX_WORKERS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"KINEX_WORKERS must be an integer, got {raw!r}") from None
    return None


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    if args.config:
        if args.model is not None:
            raise ConfigError("give either --config or model flags, not both")
        doc = io.load_config(args.config)
        spec = io.config_to_spec(doc)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
        replicas = args.replicas if args.replicas is not None else doc.get("replicas", 1)
        out = args.out or doc.get("out")
        deterministic = args.deterministic or doc.get("deterministic", False)
        analysis_tasks = doc.get("analysis", [])
    else:
        spec = _spec_from_args(args)
        replicas = args.replicas if args.replicas is not None else 1
        out = args.out
        deterministic = args.deterministic
        analysis_tasks = []
    if not out:
        raise ConfigError("an output directory is required (--out)")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trajectories = run_replicas(spec, replicas, workers=_workers())

    if replicas == 1:
        io.write_snapshots_csv(out_dir / "snapshots.csv", trajectories[0])
        io.write_entropy_csv(out_dir / "entropy.csv", trajectories[0])
    else:
        for traj in trajectories:
            rep_dir = out_dir / f"replica-{traj.spec.stream_id}"
            rep_dir.mkdir(exist_ok=True)
            io.write_snapshots_csv(rep_dir / "snapshots.csv", traj)
            io.write_entropy_csv(rep_dir / "entropy.csv", traj)
    io.write_meta_json(out_dir / "meta.json", trajectories, deterministic=deterministic)

    if analysis_tasks:
        final = trajectories[0].final_balances()
        dist = EmpiricalDistribution(values=final)
        reports = _run_tasks(dist, analysis_tasks, out_dir)
        io.write_report_json(out_dir / "report.json", reports)
    print(f"wrote {out_dir} ({replicas} replica{'s' if replicas != 1 else ''}, "
          f"{spec.step_budget} steps)")
    return 0


# ---------------------------------------------------------------------------
# analyze

def _task_fit(dist: EmpiricalDistribution, task: dict) -> dict:
    model = task.get("model")
    if model == "exponential":
        rng = task.get("range")
        fit_range = (rng[0], rng[1]) if rng else (0.0, math.inf)
        report = fit_exponential(dist, fit_range=fit_range,
                                 method=task.get("method", "mle"))
    elif model == "gamma":
        report = fit_gamma(dist)
    elif model == "pareto":
        threshold = task.get("threshold")
        if threshold is None:
            raise ConfigError("pareto fit needs a threshold")
        report = fit_pareto_tail(dist, threshold)
    elif model == "two-class":
        report = two_class_fit(dist)
    else:
        raise ConfigError(f"unknown fit model {model!r}")
    return report.to_dict()


def _run_tasks(dist: EmpiricalDistribution, tasks: list[dict], out_dir: Path) -> dict:
    reports: dict = {}
    for task in tasks:
        kind = task["task"]
        if kind == "fit":
            key = f"fit-{task.get('model')}"
            reports[key] = _task_fit(dist, task)
        elif kind == "lorenz":
            curve = lorenz_curve(dist)
            io.write_lorenz_csv(out_dir / "lorenz.csv", curve)
            reports["lorenz"] = {"gini": curve.gini, "points": int(curve.x.shape[0]),
                                 "csv": "lorenz.csv"}
        elif kind == "entropy":
            hist = histogram(dist, bins=task.get("bins", 100))
            reports["entropy"] = {"entropy": hist_entropy(hist),
                                  "bins": len(hist.counts)}
        elif kind == "histogram":
            hist = histogram(dist, bins=task.get("bins", 100))
            io.write_histogram_csv(out_dir / "histogram.csv", hist)
            reports["histogram"] = {"bins": len(hist.counts),
                                    "total": hist.total, "csv": "histogram.csv"}
        elif kind == "ccdf":
            io.write_ccdf_csv(out_dir / "ccdf.csv", dist)
            reports["ccdf"] = {"points": dist.n, "csv": "ccdf.csv"}
        else:
            raise ConfigError(f"unknown task {kind!r}")
    return reports


def _load_samples(args) -> EmpiricalDistribution:
    path = Path(args.infile)
    with open(path, newline="") as fh:
        first = fh.readline().strip()
    if first.startswith("step,agent_id,balance"):
        steps, balances, _shares = io.read_snapshots_csv(path)
        if args.step is not None:
            if args.step not in balances:
                raise ConfigError(
                    f"step {args.step} not stored; stored steps: {sorted(balances)}")
            vec = balances[args.step]
        else:
            vec = balances[steps[-1]]
        return EmpiricalDistribution(values=vec)
    return io.read_income_csv(path)


def cmd_analyze(args) -> int:
    dist = _load_samples(args)
    tasks: list[dict] = []
    for model in args.fit or []:
        task = {"task": "fit", "model": model}
        if args.threshold is not None:
            task["threshold"] = args.threshold
        if args.fit_range is not None:
            task["range"] = args.fit_range
        if args.method != "mle":
            task["method"] = args.method
        tasks.append(task)
    if args.lorenz:
        tasks.append({"task": "lorenz"})
    if args.entropy:
        tasks.append({"task": "entropy", "bins": args.bins})
    if args.histogram:
        tasks.append({"task": "histogram", "bins": args.bins})
    if args.ccdf:
        tasks.append({"task": "ccdf"})
    if not tasks:
        raise ConfigError("no analysis tasks given "
                          "(--fit/--lorenz/--entropy/--histogram/--ccdf)")
    out_dir = Path(args.out) if args.out else Path(args.infile).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = _run_tasks(dist, tasks, out_dir)
    io.write_report_json(out_dir / "report.json", reports)
    json.dump(reports, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    if not args.out:
        raise ConfigError("an output CSV path is required (--out)")
    values = args.values
    if not values:
        raise ConfigError("empty --values")
    seed = args.seed if args.seed is not None else 0
    rows: list[list] = []
    if args.param == "lam":
        header = ["param", "value", "fitted_beta", "theory_beta", "deviation"]
        for val in values:
            spec = _sweep_spec(args, Saving(val), NoDebt(), seed)
            beta_hat = _fitted_beta(spec)
            theory = beta_from_lambda(val)
            rows.append(["lam", val, beta_hat, theory, beta_hat - theory])
    elif args.param == "gamma":
        header = ["param", "value", "fitted_beta", "theory_beta", "deviation"]
        for val in values:
            spec = _sweep_spec(args, Proportional(val), NoDebt(), seed)
            beta_hat = _fitted_beta(spec)
            theory = beta_from_gamma(val)
            rows.append(["gamma", val, beta_hat, theory, beta_hat - theory])
    elif args.param == "reserve-ratio":
        header = ["param", "value", "fitted_T_plus", "theory_T_plus", "dev_plus",
                  "fitted_T_minus", "theory_T_minus", "dev_minus"]
        for val in values:
            spec = _sweep_spec(args, RandomFractionOfMean(), Bank(val), seed)
            t_plus, t_minus = _fitted_two_sided(spec)
            th_plus = args.m0 / val
            th_minus = args.m0 * (1.0 - val) / val
            rows.append(["reserve-ratio", val, t_plus, th_plus, t_plus - th_plus,
                         t_minus, th_minus, t_minus - th_minus])
    else:
        raise ConfigError(f"unsupported sweep parameter {args.param!r}")
    with open(args.out, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[0]] + [io.fmt(x) for x in row[1:]])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _sweep_spec(args, rule, credit, seed) -> ModelSpec:
    return ModelSpec(exchange_rule=rule, agent_count=args.agents,
                     initial_balance=args.m0, step_budget=args.steps,
                     snapshot_stride=args.steps or 1, credit_policy=credit, seed=seed)


def _fitted_beta(spec: ModelSpec) -> float:
    from .engine import run_simulation

    traj = run_simulation(spec)
    report = fit_gamma(EmpiricalDistribution(values=traj.final_balances()))
    return report.params["beta"]


def _fitted_two_sided(spec: ModelSpec) -> tuple[float, float]:
    from .engine import run_simulation

    traj = run_simulation(spec)
    final = traj.final_balances()
    pos = EmpiricalDistribution(values=final[final >= 0.0])
    neg = EmpiricalDistribution(values=-final[final < 0.0])
    t_plus = fit_exponential(pos).params["T"]
    t_minus = fit_exponential(neg).params["T"]
    return t_plus, t_minus


# ---------------------------------------------------------------------------
# fp (stationary density export)

def cmd_fp(args) -> int:
    if not args.out:
        raise ConfigError("an output CSV path is required (--out)")
    model = DriftDiffusion(A0=args.A0, a=args.a, B0=args.B0, b=args.b)
    if args.rmin is None and args.rmax is None:
        if not (model.A0 > 0 and model.B0 > 0):
            raise ConfigError("give --rmin and --rmax for this coefficient family")
        grid = default_grid(model, args.points if args.points else 4096)
    else:
        if args.rmin is None or args.rmax is None:
            raise ConfigError("give both --rmin and --rmax, or neither")
        points = args.points if args.points else 512
        if args.log:
            if not (args.rmin > 0):
                raise ConfigError("--log needs --rmin > 0")
            grid = np.geomspace(args.rmin, args.rmax, points)
        else:
            grid = np.linspace(args.rmin, args.rmax, points)
    sol = stationary_solution(model, grid)
    header = ["r", "density"]
    cols = [sol.r, sol.density]
    closed = _fp_closed_form(model, grid)
    if closed is not None:
        header.append("closed_form")
        cols.append(closed)
    io.write_columns_csv(args.out, header, cols)
    print(f"wrote {args.out} ({grid.shape[0]} points)")
    return 0


def _fp_closed_form(model: DriftDiffusion, grid: np.ndarray) -> np.ndarray | None:
    """Reference column: the closed form this coefficient family reduces to."""
    if model.a == 0 and model.b == 0:
        temp = model.B0 / model.A0
        return np.exp(-grid / temp) / temp
    if model.A0 == 0 and model.B0 == 0:
        p = 2.0 + model.a / model.b
        lo, hi = grid[0], grid[-1]
        norm = (p - 1.0) / (lo ** (1.0 - p) - hi ** (1.0 - p))
        return norm * grid ** (-p)
    if model.A0 > 0 and model.a > 0 and model.B0 > 0 and model.b > 0:
        return pdf_interpolating(grid, temperature=model.B0 / model.A0,
                                 exponent_ratio=model.a / (2.0 * model.b),
                                 r0=math.sqrt(model.B0 / model.b))
    return None


# ---------------------------------------------------------------------------
# hierarchy and family

def cmd_hierarchy(args) -> int:
    if not args.out:
        raise ConfigError("an output CSV path is required (--out)")
    if (args.step is None) == (args.factor is None):
        raise ConfigError("give exactly one of --step or --factor")
    increment = Additive(args.step) if args.step is not None else Multiplicative(args.factor)
    dist = hierarchy_incomes(args.levels, args.branching, args.base, increment)
    io.write_samples_csv(args.out, dist)
    print(f"wrote {args.out} ({dist.n} levels)")
    return 0


def cmd_family(args) -> int:
    if not args.out:
        raise ConfigError("an output CSV path is required (--out)")
    dist = _load_samples(args)
    rng = RngStream(args.seed if args.seed is not None else 0, 0)
    pairs = pair_sum_samples(dist, rng)
    io.write_samples_csv(args.out, pairs)
    print(f"wrote {args.out} ({pairs.n} pair sums)")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinex",
        description="Kinetic exchange simulations and income-distribution analysis.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_count, help="base RNG seed")
    common.add_argument("--replicas", type=_count, help="number of replicas")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--deterministic", action="store_true",
                        help="omit timestamps from metadata")
    common.add_argument("--config", help="JSON experiment configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run a model and write snapshots")
    _add_model_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", parents=[common],
                          help="fit and summarize sample data")
    p_an.add_argument("--in", dest="infile", required=True, help="input CSV")
    p_an.add_argument("--final", action="store_true",
                      help="use the final stored snapshot (default)")
    p_an.add_argument("--step", type=_count, help="use the snapshot at this step")
    p_an.add_argument("--fit", action="append",
                      choices=["exponential", "gamma", "pareto", "two-class"],
                      help="fit this model (repeatable)")
    p_an.add_argument("--threshold", type=float, help="tail threshold for pareto")
    p_an.add_argument("--range", dest="fit_range", type=float, nargs=2,
                      metavar=("LO", "HI"), help="fit range for exponential")
    p_an.add_argument("--method", choices=["mle", "ccdf-lsq"], default="mle")
    p_an.add_argument("--lorenz", action="store_true", help="write the Lorenz curve")
    p_an.add_argument("--entropy", action="store_true", help="report binned entropy")
    p_an.add_argument("--histogram", action="store_true", help="write a histogram CSV")
    p_an.add_argument("--ccdf", action="store_true", help="write the empirical CCDF")
    p_an.add_argument("--bins", type=_count, default=100, help="bin count")
    p_an.set_defaults(func=cmd_analyze)

    p_sw = sub.add_parser("sweep", parents=[common],
                          help="sweep one parameter, tabulate fit vs theory")
    p_sw.add_argument("--param", required=True,
                      choices=["lam", "gamma", "reserve-ratio"])
    p_sw.add_argument("--values", type=_value_list, required=True,
                      help="comma-separated values (fractions like 1/3 allowed)")
    p_sw.add_argument("--agents", type=_count, default=1000)
    p_sw.add_argument("--m0", type=float, default=1000.0)
    p_sw.add_argument("--steps", type=_count, default=2_000_000)
    p_sw.set_defaults(func=cmd_sweep)

    p_fp = sub.add_parser("fp", parents=[common],
                          help="export a stationary drift-diffusion density")
    p_fp.add_argument("--A0", type=float, default=0.0, help="constant drift")
    p_fp.add_argument("--a", type=float, default=0.0, help="linear drift slope")
    p_fp.add_argument("--B0", type=float, default=0.0, help="constant diffusion")
    p_fp.add_argument("--b", type=float, default=0.0, help="quadratic diffusion")
    p_fp.add_argument("--rmin", type=float, help="grid start (default: built from the coefficients)")
    p_fp.add_argument("--rmax", type=float, help="grid end (default: built from the coefficients)")
    p_fp.add_argument("--points", type=_count, help="grid size (default 4096 geometric, 512 explicit)")
    p_fp.add_argument("--log", action="store_true", help="log-spaced grid")
    p_fp.set_defaults(func=cmd_fp)

    p_h = sub.add_parser("hierarchy", parents=[common],
                         help="generate hierarchical incomes")
    p_h.add_argument("--levels", type=_count, required=True)
    p_h.add_argument("--branching", type=_fraction, required=True)
    p_h.add_argument("--base", type=float, required=True)
    p_h.add_argument("--step", type=float, help="additive increment per level")
    p_h.add_argument("--factor", type=float, help="multiplicative factor per level")
    p_h.set_defaults(func=cmd_hierarchy)

    p_f = sub.add_parser("family", parents=[common],
                         help="pair-sum samples (two-earner combination)")
    p_f.add_argument("--in", dest="infile", required=True, help="input CSV")
    p_f.add_argument("--step", type=_count, help="use the snapshot at this step")
    p_f.set_defaults(func=cmd_family)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalInvariantError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return 3
    except KinexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
