"""Benchmark harness CLI: seeded runs, grid searches, and trace checks.

Subcommands: run, grid, check, trace-dump. Run records and step traces are
emitted as CSV with fixed headers (missing values are empty fields):

    run record:  step,epoch,loss,accuracy,gamma_mean,gamma_max,alpha_mean,alpha_max,ainv_mean,subopt
    step trace:  k,i,g,v_raw,v_clipped,branch,r,gamma,alpha,a

Exit codes: 0 success, 1 check/assertion failure, 2 usage/config error.
Output CSVs are byte-deterministic for a fixed seed; wall-clock timing only
appears in the stderr summary.
"""

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import verify
from .core import SGD, Adam, AdaGrad, GradaGrad, HyperParams, ScalarGradaGrad, StepTrace
from .data import LibsvmParseError, load_dataset, normalize_labels
from .problems import AbsValue, LogisticRegression, Quadratic

RUN_HEADER = [
    "step", "epoch", "loss", "accuracy",
    "gamma_mean", "gamma_max", "alpha_mean", "alpha_max", "ainv_mean", "subopt",
]
TRACE_HEADER = ["k", "i", "g", "v_raw", "v_clipped", "branch", "r", "gamma", "alpha", "a"]
CHECK_HEADER = ["name", "passed", "worst_violation", "step", "coord", "details"]

TRACE_OPTIMIZERS = ("gradagrad", "gradagrad-scalar")
CHECK_NAMES = ("errnegativity", "monotone", "reparam")
DEFAULT_GRID = "0.015625,0.03125,0.0625,0.125,0.25,0.5,1,2,4"

# config-file keys accepted for run/grid (key=value, flag spelling without --)
CONFIG_KEYS = {
    "problem", "dataset", "dim", "diag", "noise-std", "x0", "optimizer",
    "gamma0", "rho", "beta", "g-inf", "d-inf", "r", "mode", "steps", "epochs",
    "batch-size", "seed", "eval-every", "trace", "out",
    "grid-param", "grid-values", "seeds",
}


class ConfigError(Exception):
    """Bad configuration; maps to exit code 2."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path, header, rows):
    if path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit value")
    return value


# ---------------------------------------------------------------------------
# construction from flags
# ---------------------------------------------------------------------------

def _build_problem(args):
    """Returns (problem, x0, batches_per_epoch_or_None)."""
    if args.problem == "abs":
        dim = args.dim if args.dim is not None else 1
        problem = AbsValue(dim)
        x0_default = np.ones(dim)
    elif args.problem == "quadratic":
        if args.diag is not None:
            diag = np.array(_parse_floats(args.diag))
        else:
            diag = np.ones(args.dim if args.dim is not None else 1)
        problem = Quadratic(diag, noise_std=args.noise_std)
        x0_default = np.ones(problem.dim)
    elif args.problem == "logistic":
        if args.dataset is None:
            raise ConfigError("--problem logistic requires --dataset")
        dataset = normalize_labels(load_dataset(args.dataset))
        problem = LogisticRegression(dataset, batch_size=args.batch_size)
        x0_default = np.zeros(problem.dim)
    else:  # pragma: no cover - argparse choices guard this
        raise ConfigError(f"unknown problem {args.problem!r}")

    if args.x0 is not None:
        vals = _parse_floats(args.x0)
        if len(vals) == 1:
            x0 = np.full(problem.dim, vals[0])
        elif len(vals) == problem.dim:
            x0 = np.array(vals)
        else:
            raise ConfigError(f"--x0 has {len(vals)} entries but the problem has dim {problem.dim}")
    else:
        x0 = x0_default
    n_batches = None
    if args.problem == "logistic":
        n_batches = math.ceil(problem.n / problem.batch_size)
    return problem, x0, n_batches


def _build_hyperparams(args) -> HyperParams:
    if args.r == "adaptive":
        r_fixed = None
    else:
        try:
            r_fixed = float(args.r)
        except ValueError:
            raise ConfigError(f"--r must be a number or 'adaptive', got {args.r!r}") from None
    try:
        return HyperParams(
            gamma0=args.gamma0, rho=args.rho, beta=args.beta,
            g_inf=args.g_inf, d_inf=args.d_inf, r_fixed=r_fixed, mode=args.mode,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_optimizer(args, x0):
    # --gamma0 doubles as the learning rate for the sgd/adam baselines
    if args.optimizer == "gradagrad":
        return GradaGrad(x0, _build_hyperparams(args))
    if args.optimizer == "gradagrad-scalar":
        return ScalarGradaGrad(x0, _build_hyperparams(args))
    try:
        if args.optimizer == "adagrad":
            return AdaGrad(x0, gamma=args.gamma0)
        if args.optimizer == "sgd":
            return SGD(x0, lr=args.gamma0)
        if args.optimizer == "adam":
            return Adam(x0, lr=args.gamma0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown optimizer {args.optimizer!r}")  # pragma: no cover


def _resolve_steps(args, n_batches):
    if (args.steps is None) == (args.epochs is None):
        raise ConfigError("exactly one of --steps or --epochs is required")
    if args.epochs is not None:
        if n_batches is None:
            raise ConfigError("--epochs only applies to dataset problems; use --steps")
        if args.epochs < 1:
            raise ConfigError("--epochs must be >= 1")
        return args.epochs * n_batches
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    return args.steps


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _eval_row(step, n_batches, problem, opt):
    loss = problem.loss_full(opt.x)
    stats = opt.stats()
    subopt = loss - problem.f_star if problem.f_star is not None else None
    return [
        step,
        step // n_batches if n_batches else None,
        loss,
        problem.accuracy(opt.x),
        stats.get("gamma_mean"),
        stats.get("gamma_max"),
        stats.get("alpha_mean"),
        stats.get("alpha_max"),
        stats.get("ainv_mean"),
        subopt,
    ]


def _execute_run(problem, opt, steps, eval_every, n_batches, state, collect_traces):
    rows = [_eval_row(0, n_batches, problem, opt)]
    traces = [] if collect_traces else None
    t0 = time.perf_counter()
    for k in range(1, steps + 1):
        g = problem.grad_sample(opt.x, state)
        trace = opt.step(g)
        if traces is not None:
            traces.append(trace)
        if k % eval_every == 0 or k == steps:
            if rows[-1][0] != k:
                rows.append(_eval_row(k, n_batches, problem, opt))
    wall = time.perf_counter() - t0
    return rows, traces, wall


def cmd_run(args) -> int:
    problem, x0, n_batches = _build_problem(args)
    steps = _resolve_steps(args, n_batches)
    opt = _build_optimizer(args, x0)
    if args.trace:
        if args.optimizer not in TRACE_OPTIMIZERS:
            raise ConfigError(f"--trace requires one of {TRACE_OPTIMIZERS}")
        if args.out is None:
            raise ConfigError("--trace requires --out (the trace path derives from it)")
    eval_every = args.eval_every or (n_batches if n_batches else 100)
    state = problem.init_state(args.seed)
    rows, traces, wall = _execute_run(
        problem, opt, steps, eval_every, n_batches, state, collect_traces=args.trace
    )
    _write_csv(args.out, RUN_HEADER, [[_fmt(v) for v in row] for row in rows])
    if args.trace:
        trace_path = Path(args.out).with_suffix(".trace.csv")
        _write_csv(trace_path, TRACE_HEADER, _trace_rows(traces))
        print(f"trace written to {trace_path}", file=sys.stderr)
    final_loss = rows[-1][2]
    avg_loss = problem.loss_full(opt.averaged_iterate()) if opt.k > 0 else final_loss
    print(
        f"run complete: steps={steps} final_loss={final_loss!r} "
        f"averaged_iterate_loss={avg_loss!r} wall={wall:.3f}s",
        file=sys.stderr,
    )
    return 0


def _trace_rows(traces):
    rows = []
    for tr in traces:
        for i, branch in enumerate(tr.branch):
            rows.append([
                tr.k, i, _fmt(float(tr.g[i])), _fmt(float(tr.v_raw[i])),
                _fmt(float(tr.v_clipped[i])), branch, _fmt(float(tr.r[i])),
                _fmt(float(tr.gamma_after[i])), _fmt(float(tr.alpha_after[i])),
                _fmt(float(tr.a_after[i])),
            ])
    return rows


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

GRID_PARAMS = ("gamma0", "rho", "beta", "g_inf", "d_inf")


def _selection_metric(rows):
    """(kind, value): mean accuracy over the last <=10 evaluations if the
    problem reports accuracy, else the final loss."""
    acc = [row[3] for row in rows if row[3] is not None]
    if acc:
        tail = acc[-10:]
        return "accuracy", float(np.mean(tail))
    return "loss", float(rows[-1][2])


def cmd_grid(args) -> int:
    values = _parse_floats(args.grid_values)
    if not values:
        raise ConfigError("empty grid")
    param = args.grid_param.replace("-", "_")
    if param not in GRID_PARAMS:
        raise ConfigError(f"--grid-param must be one of {GRID_PARAMS}, got {args.grid_param!r}")
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")

    table = []
    metric_kind = None
    for vi, value in enumerate(sorted(values)):
        run_args = argparse.Namespace(**vars(args))
        setattr(run_args, param, value)
        scores = []
        for si in range(args.seeds):
            problem, x0, n_batches = _build_problem(run_args)
            steps = _resolve_steps(run_args, n_batches)
            opt = _build_optimizer(run_args, x0)
            eval_every = run_args.eval_every or (n_batches if n_batches else 100)
            run_seed = int(np.random.SeedSequence([args.seed, vi, si]).generate_state(1, np.uint64)[0])
            state = problem.init_state(run_seed)
            rows, _, _ = _execute_run(problem, opt, steps, eval_every, n_batches, state, False)
            kind, score = _selection_metric(rows)
            metric_kind = kind
            scores.append(score)
        table.append((value, float(np.mean(scores))))

    best_idx = 0
    for idx in range(1, len(table)):
        if metric_kind == "accuracy":
            better = table[idx][1] > table[best_idx][1]
        else:
            better = table[idx][1] < table[best_idx][1]
        if better:  # exact ties keep the earlier (smaller) value
            best_idx = idx

    out_rows = [
        [args.grid_param, _fmt(value), metric_kind, _fmt(score), _fmt(idx == best_idx)]
        for idx, (value, score) in enumerate(table)
    ]
    _write_csv(args.out, ["param", "value", "metric", "score", "winner"], out_rows)
    winner_value, winner_score = table[best_idx]
    print(
        f"grid complete: winner {args.grid_param}={winner_value!r} "
        f"{metric_kind}={winner_score!r} over {args.seeds} seed(s)",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# check / trace-dump
# ---------------------------------------------------------------------------

def read_trace_csv(path) -> list[StepTrace]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty trace file") from None
        if header != TRACE_HEADER:
            missing = [c for c in TRACE_HEADER if c not in header]
            raise ConfigError(
                f"{path}: bad trace header, missing columns {missing}" if missing
                else f"{path}: bad trace header {header}"
            )
        grouped: dict[int, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise ConfigError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields")
            try:
                k = int(row[0])
                i = int(row[1])
                floats = [float(row[j]) if row[j] != "" else math.nan for j in (2, 3, 4, 6, 7, 8, 9)]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric field") from None
            grouped.setdefault(k, []).append((i, row[5], floats))
    traces = []
    for k in sorted(grouped):
        records = sorted(grouped[k])
        cols = list(zip(*[rec[2] for rec in records]))
        traces.append(StepTrace(
            k=k,
            g=np.array(cols[0]),
            v_raw=np.array(cols[1]),
            v_clipped=np.array(cols[2]),
            branch=[rec[1] for rec in records],
            r=np.array(cols[3]),
            gamma_after=np.array(cols[4]),
            alpha_after=np.array(cols[5]),
            a_after=np.array(cols[6]),
        ))
    return traces


def _run_checks(traces, names, d_inf):
    reports = []
    for name in names:
        if name == "errnegativity":
            reports.append(verify.check_errnegativity(traces))
        elif name == "monotone":
            reports.append(verify.check_monotone_and_cap(traces, d_inf=d_inf))
        elif name == "reparam":
            reports.append(verify.check_reparam_invariance(traces, d_inf=d_inf))
        else:
            raise ConfigError(f"unknown check {name!r}; choose from {CHECK_NAMES} or 'all'")
    return reports


def _check_run_record(path, d_inf):
    """Schema-level check of a run record: steps strictly increase and every
    recorded gamma stays at or below the cap."""
    worst = 0.0
    location = None
    details = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader)
        prev_step = None
        for row in reader:
            step = int(row[0])
            if prev_step is not None and step <= prev_step:
                worst = max(worst, 1.0)
                location = (step, 0)
                details.append(f"step {step} does not increase past {prev_step}")
            prev_step = step
            if d_inf is not None and row[5]:
                over = (float(row[5]) - d_inf) / d_inf
                if over > worst:
                    worst = over
                    location = (step, 0)
    cap_note = f", gamma_max <= {d_inf:g}" if d_inf is not None else ""
    return verify.CheckReport(
        name="run_record",
        passed=worst <= 0.0,
        worst_violation=worst,
        location=location,
        details="; ".join(details[:3]) or f"steps strictly increasing{cap_note}",
    )


def cmd_check(args) -> int:
    with open(args.trace, "r", newline="", encoding="utf-8") as f:
        header = next(csv.reader(f), None)
    names = list(CHECK_NAMES) if args.checks == "all" else [
        tok.strip() for tok in args.checks.split(",") if tok.strip()
    ]
    if not names:
        raise ConfigError("no checks requested")
    if header == RUN_HEADER:
        if args.checks not in ("all", "record"):
            raise ConfigError("run record files support only the 'record' check")
        reports = [_check_run_record(args.trace, args.d_inf)]
    else:
        traces = read_trace_csv(args.trace)
        reports = _run_checks(traces, names, args.d_inf)
    rows = []
    for rep in reports:
        step, coord = rep.location if rep.location is not None else (None, None)
        rows.append([
            rep.name, _fmt(rep.passed), _fmt(rep.worst_violation),
            _fmt(step), _fmt(coord), rep.details,
        ])
        status = "PASS" if rep.passed else "FAIL"
        print(f"{rep.name}: {status} (worst={rep.worst_violation:g})", file=sys.stderr)
    _write_csv(args.out, CHECK_HEADER, rows)
    return 0 if all(rep.passed for rep in reports) else 1


def cmd_trace_dump(args) -> int:
    traces = read_trace_csv(args.trace)
    n_coords = len(traces[0].branch) if traces else 0
    counts = {}
    for tr in traces:
        for branch in tr.branch:
            counts[branch] = counts.get(branch, 0) + 1
    print(f"steps: {len(traces)}  coordinates: {n_coords}")
    print("branches: " + " ".join(f"{b}={counts.get(b, 0)}" for b in ("init", "capped", "positive", "negative")))
    if traces:
        gammas = np.concatenate([tr.gamma_after for tr in traces])
        alphas = np.concatenate([tr.alpha_after for tr in traces])
        print(f"gamma in [{gammas.min():g}, {gammas.max():g}]  alpha in [{alphas.min():g}, {alphas.max():g}]")
    print("  ".join(TRACE_HEADER))
    shown = 0
    for tr in traces:
        for i in range(len(tr.branch)):
            if shown >= args.head:
                return 0
            print(
                f"{tr.k}  {i}  {tr.g[i]:.6g}  {tr.v_raw[i]:.6g}  {tr.v_clipped[i]:.6g}  "
                f"{tr.branch[i]}  {'' if math.isnan(tr.r[i]) else format(tr.r[i], '.6g')}  "
                f"{tr.gamma_after[i]:.6g}  {tr.alpha_after[i]:.6g}  {tr.a_after[i]:.6g}"
            )
            shown += 1
    return 0


# ---------------------------------------------------------------------------
# parser / entry
# ---------------------------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--problem", choices=("abs", "quadratic", "logistic"), required=True)
    p.add_argument("--dataset", help="LIBSVM file (logistic problem)")
    p.add_argument("--dim", type=int, help="dimension for synthetic problems")
    p.add_argument("--diag", help="comma-separated quadratic diagonal (overrides --dim)")
    p.add_argument("--noise-std", type=float, default=0.0, help="gradient noise (quadratic)")
    p.add_argument("--x0", help="initial point: one value (broadcast) or comma-separated")
    p.add_argument("--optimizer", choices=("gradagrad", "gradagrad-scalar", "adagrad", "sgd", "adam"),
                   default="gradagrad")
    p.add_argument("--gamma0", type=float, default=1.0,
                   help="step-size numerator; also the sgd/adam learning rate")
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--g-inf", type=float, default=1.0)
    p.add_argument("--d-inf", type=float, default=1e10)
    p.add_argument("--r", default="1", help="scalar-variant clip: a number or 'adaptive'")
    p.add_argument("--mode", choices=("theory", "practical"), default="practical")
    p.add_argument("--steps", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=_parse_seed, default=0)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--trace", action="store_true", help="also write a step-trace CSV")
    p.add_argument("--out", help="run record CSV path (stdout when omitted)")
    p.add_argument("--config", help="key=value config file; flags override file values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradagrad",
        description="Non-monotone adaptive gradient benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_grid = sub.add_parser("grid", help="grid-search one parameter over seeded runs")
    _add_run_flags(p_grid)
    p_grid.add_argument("--grid-param", default="gamma0")
    p_grid.add_argument("--grid-values", default=DEFAULT_GRID,
                        help="comma-separated values (default: powers of 2)")
    p_grid.add_argument("--seeds", type=int, default=10, help="replicates per grid point")
    p_grid.set_defaults(func=cmd_grid)

    p_check = sub.add_parser("check", help="run invariant checks on a run-record or step-trace CSV")
    p_check.add_argument("trace")
    p_check.add_argument("--checks", default="all",
                         help=f"comma-separated subset of {CHECK_NAMES} or 'all' "
                              "(run-record files support 'record')")
    p_check.add_argument("--d-inf", type=float,
                         help="gamma cap to assert; by default cap binding is "
                              "self-detected from the trace and no cap bound is asserted")
    p_check.add_argument("--out", help="check report CSV path (stdout when omitted)")
    p_check.set_defaults(func=cmd_check)

    p_dump = sub.add_parser("trace-dump", help="summarize a step-trace CSV")
    p_dump.add_argument("trace")
    p_dump.add_argument("--head", type=int, default=10, help="records to print")
    p_dump.set_defaults(func=cmd_trace_dump)

    return parser


def _load_config_flags(path) -> list[str]:
    flags = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key = key.strip().replace("_", "-")
            value = value.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            if key == "trace":
                if value.lower() in ("1", "true", "yes"):
                    flags.append("--trace")
                elif value.lower() not in ("0", "false", "no"):
                    raise ConfigError(f"{path}:{lineno}: trace must be true or false")
                continue
            flags.extend([f"--{key}", value])
    return flags


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            # config values become flags ahead of the user's, so the
            # command line keeps the last word
            argv = [argv[0]] + _load_config_flags(args.config) + argv[1:]
            args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LibsvmParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # contract violations from bad flag combinations surface here
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
