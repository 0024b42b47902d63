"""Command-line entry point: ingest, recurring, forecast, evaluate, tune, cluster."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

from . import __version__
from .cluster import Linkage, cluster_balances
from .dtw import Corpus, DtwConfig
from .evaluation import (
    MethodSuite,
    evaluate_forecasts,
    evaluate_recurring,
    keyword_extractor,
    run_account_experiment,
    sample_test_windows,
    write_metrics_table,
    write_step_curves,
)
from .forecast import (
    ForecastConfig,
    ForecastError,
    ForecastResult,
    Grids,
    Method,
    TunedParameters,
    read_forecasts,
    tune_by_class,
    write_forecasts,
)
from .ingest import (
    load_pkdd99,
    load_wagegoal_csv,
    load_balances_csv,
    split_point,
    write_balances_csv,
    write_wagegoal_csv,
)
from .model import Ledger, LedgerError
from .recurring import extract_all_recurring, predict_next, unexpected_large_expenses
from .synth import read_truth
from .textsim import SimilarityConfig

log = logging.getLogger("ledgercast")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------- parsing

def _split(text: str) -> float | date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        return float(text)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--input", required=needs_input, help="ledger CSV or PKDD'99 trans.asc")
    g.add_argument("--balances", help="current balances CSV (wagegoal format)")
    g.add_argument("--format", choices=("wagegoal", "pkdd99"), default="wagegoal")
    g.add_argument("--split", type=_split, help="train/test boundary: fraction in (0,1) or ISO date")
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--config", help="key=value parameter file; flags win")


def _params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--query-len", type=int, default=31, help="query length L")
    g.add_argument("--match-len", type=int, default=20, help="matched prefix length L1")
    g.add_argument("--horizon", type=int, default=31, help="forecast steps S")
    g.add_argument("--matches", type=int, default=10, help="number of matches M")
    g.add_argument("--penalty", type=float, default=1.0, help="anomaly penalty lambda")
    g.add_argument("--switch-step", type=int, default=3, help="hybrid switch step tau")
    g.add_argument("--k-neighbors", type=int, default=10)
    g.add_argument("--threshold", type=float, default=0.75, help="description similarity threshold")
    g.add_argument("--dtw-window", type=int, default=2)
    g.add_argument("--params", help="tuned parameter file written by 'tune'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ledgercast", description="Account balance forecasting from transaction ledgers")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="normalize a ledger to the canonical CSV")
    _common(p)

    p = sub.add_parser("recurring", help="extract recurring charges and large expenses")
    _common(p)
    _params(p)
    p.add_argument("--as-of", type=date.fromisoformat, help="extraction date (default: last transaction)")

    p = sub.add_parser("forecast", help="forecast one account's balance")
    _common(p)
    _params(p)
    p.add_argument("--account", required=True)
    p.add_argument("--origin", type=date.fromisoformat, required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.HYBRID.value)

    p = sub.add_parser("tune", help="grid-search M, lambda and tau on the training period")
    _common(p)
    _params(p)
    p.add_argument("--grid-matches", type=_ints, default=Grids().n_matches)
    p.add_argument("--grid-penalty", type=_floats, default=Grids().penalty)
    p.add_argument("--grid-switch", type=_ints, default=Grids().switch_step)
    p.add_argument("--holdout-windows", type=int, default=5)

    p = sub.add_parser("evaluate", help="backtest methods on sampled test windows")
    _common(p)
    _params(p)
    p.add_argument("--methods", default="hybrid,subseqls,histavg,nn,knn")
    p.add_argument("--windows", type=int, default=25)
    p.add_argument("--external", action="append", default=[], help="external predictions CSV (forecast layout)")
    p.add_argument("--truth", help="planted recurring truth CSV; adds extraction metrics")
    p.add_argument("--iterations", type=int, default=2, help="pkdd99: repeated random subsets")
    p.add_argument("--accounts", type=int, default=20, help="pkdd99: accounts per iteration")

    p = sub.add_parser("cluster", help="cluster users' last-month balance sequences")
    _common(p)
    _params(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--linkage", choices=[x.value for x in Linkage], default=Linkage.COMPLETE.value)
    p.add_argument("--start", type=date.fromisoformat)
    p.add_argument("--end", type=date.fromisoformat)
    return parser


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse flags; values from ``--config`` fill in whatever flags left unset."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
        known = {a.dest: a for a in sub._actions}  # noqa: SLF001
        defaults = {}
        for key, value in read_config_file(args.config).items():
            action = known.get(key)
            if action is None or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            defaults[key] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def forecast_config(args: argparse.Namespace) -> ForecastConfig:
    try:
        return ForecastConfig(
            query_len=args.query_len,
            match_len=args.match_len,
            horizon=args.horizon,
            n_matches=args.matches,
            penalty=args.penalty,
            switch_step=min(args.switch_step, args.horizon),
            k_neighbors=args.k_neighbors,
            dtw=DtwConfig(args.dtw_window),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def similarity(args: argparse.Namespace) -> SimilarityConfig:
    if not 0 <= args.threshold <= 1:
        raise UsageError("threshold must lie in [0, 1]")
    return SimilarityConfig(args.threshold)


def load_ledger(args: argparse.Namespace) -> tuple[Ledger, int]:
    path = Path(args.input)
    if not path.exists():
        raise UsageError(f"input {path} does not exist")
    if args.format == "pkdd99":
        ledger, unrecognized = load_pkdd99(path), 0
    else:
        if not args.balances:
            raise UsageError("--balances is required for wagegoal input")
        ledger, unrecognized = load_wagegoal_csv(path, load_balances_csv(args.balances))
    if args.split is not None:
        ledger = Ledger(ledger.accounts, ledger.transactions, split_point(ledger, args.split), ledger.step)
    elif ledger.train_end is None:
        ledger = Ledger(ledger.accounts, ledger.transactions, split_point(ledger, 0.75), ledger.step)
    return ledger, unrecognized


def _writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


# ------------------------------------------------------------ tuned params

def write_params(tuned: dict[str, TunedParameters], classes: dict[str, list[str]], base: ForecastConfig, path: Path) -> None:
    doc = {
        "base": {"query_len": base.query_len, "match_len": base.match_len, "horizon": base.horizon},
        "classes": {
            name: {
                "n_matches": tp.n_matches,
                "switch_step": tp.switch_step,
                "held_out_mae": tp.held_out_mae,
                "accounts": classes.get(name, []),
                "penalties": tp.penalties,
            }
            for name, tp in sorted(tuned.items())
        },
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_params(path: str | Path, base: ForecastConfig) -> dict[str, ForecastConfig]:
    """Per-account configs from a tuned parameter file."""
    doc = json.loads(Path(path).read_text())
    out = {}
    for name, c in doc["classes"].items():
        tp = TunedParameters(name, c["n_matches"], c["switch_step"], c["penalties"])
        for acc in c["accounts"]:
            out[acc] = tp.config_for(acc, base)
    return out


# -------------------------------------------------------------- commands

def cmd_ingest(args: argparse.Namespace) -> int:
    ledger, unrecognized = load_ledger(args)
    if not ledger.transactions:
        raise LedgerError("no transactions in input")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_wagegoal_csv(ledger, out / "ledger.csv")
    write_balances_csv(ledger, out / "balances.csv")
    lo, hi = ledger.date_range()
    fh, w = _writer(out / "summary.csv")
    with fh:
        w.writerow(["accounts", "users", "transactions", "first_date", "last_date", "train_end", "unrecognized_categories"])
        w.writerow([len(ledger.accounts), len(ledger.users()), len(ledger.transactions), lo, hi, ledger.train_end, unrecognized])
    print(f"{len(ledger.accounts)} accounts, {len(ledger.transactions)} transactions, {lo} to {hi}")
    return EXIT_OK


def cmd_recurring(args: argparse.Namespace) -> int:
    ledger, _ = load_ledger(args)
    simcfg = similarity(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fh, w = _writer(out / "recurring.csv")
    with fh:
        w.writerow(["account_id", "frequency", "description", "mean_amount", "last_date", "next_date"])
        for acc in sorted(ledger.accounts):
            txs = ledger.account_transactions(acc)
            if not txs:
                continue
            as_of = args.as_of or txs[-1].date
            for r in extract_all_recurring(txs, as_of, simcfg):
                nxt = predict_next(r)
                w.writerow([acc, r.frequency.label, r.representative_description, f"{r.mean_amount:.2f}", r.last_date, nxt.predicted_date])
    fh, w = _writer(out / "large_expenses.csv")
    with fh:
        w.writerow(["description", "approximate_cost", "source_user"])
        for e in sorted(unexpected_large_expenses(ledger, simcfg), key=lambda e: (-e.approximate_cost, e.description, e.source_user)):
            w.writerow([e.description, f"{e.approximate_cost:.2f}", e.source_user])
    return EXIT_OK


def _suite(args: argparse.Namespace, train: Ledger) -> MethodSuite:
    base = forecast_config(args)
    accounts = read_params(args.params, base) if args.params else {}
    return MethodSuite(train, base, accounts, similarity(args))


def cmd_forecast(args: argparse.Namespace) -> int:
    ledger, _ = load_ledger(args)
    if args.account not in ledger.accounts:
        raise UsageError(f"unknown account {args.account!r}")
    view = ledger.truncate(args.origin)
    suite = _suite(args, view)
    suite.use_recurring = args.format != "pkdd99"
    method = Method(args.method)
    preds = suite.run(method, view, args.account, args.origin)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_forecasts([ForecastResult(args.account, method, args.origin, preds)], out / "forecast.csv")
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    ledger, _ = load_ledger(args)
    train = ledger.truncate(ledger.train_end)
    base = forecast_config(args)
    grids = Grids(args.grid_matches, args.grid_penalty, tuple(min(t, base.horizon) for t in args.grid_switch))
    if not (grids.n_matches and grids.penalty and grids.switch_step):
        raise UsageError("grids must be non-empty")
    simcfg = similarity(args)
    from .forecast.tuning import classify_account

    classes: dict[str, list[str]] = {}
    for acc in sorted(train.accounts):
        if train.account_transactions(acc):
            classes.setdefault(classify_account(train, acc, train.train_end, simcfg), []).append(acc)
    tuned = tune_by_class(train, base, grids, simcfg=simcfg, n_windows=args.holdout_windows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_params(tuned, classes, base, out / "params.json")
    for name, tp in sorted(tuned.items()):
        print(f"{name}: M={tp.n_matches} tau={tp.switch_step} held-out MAE={tp.held_out_mae:.4f}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    ledger, _ = load_ledger(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        methods = [Method(m.strip()) for m in args.methods.split(",") if m.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    base = forecast_config(args)
    if args.format == "pkdd99":
        res = run_account_experiment(ledger, base, methods, args.iterations, args.accounts, args.windows, args.seed, threads=args.threads)
        fh, w = _writer(out / "experiment.csv")
        with fh:
            w.writerow(["method", "mean_mae", "std_mae"])
            mean, std = res.mean_mae(), res.std_mae()
            for name in sorted(mean):
                w.writerow([name, f"{mean[name]:.6f}", f"{std[name]:.6f}"])
        return EXIT_OK
    train = ledger.truncate(ledger.train_end)
    suite = _suite(args, train)
    sample = sample_test_windows(ledger, None, args.windows, base.horizon, args.seed, base.query_len)
    if sample.shortfall:
        log.warning("only %d feasible test windows", sample.feasible)
    external = {}
    for path in args.external:
        external.update(read_forecasts(path))
    report = evaluate_forecasts(methods, sample.windows, ledger, suite, external, args.threads)
    write_metrics_table(report, out / "forecast_metrics.csv")
    write_step_curves(report, out / "step_errors.csv")
    if args.truth:
        truth = read_truth(args.truth)
        simcfg = similarity(args)
        fh, w = _writer(out / "recurring_metrics.csv")
        with fh:
            w.writerow(["method", "avg_extracted_per_user", "precision", "mean_day_error", "recall"])
            for name, extractor in (("proposed", None), ("keyword", keyword_extractor(simcfg=simcfg))):
                m = evaluate_recurring(ledger, truth, args.windows, 5, args.seed, simcfg, extractor)
                w.writerow([name, f"{m.avg_extracted_per_user:.6f}", f"{m.precision:.6f}", f"{m.mean_day_error:.6f}", f"{m.recall:.6f}"])
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace) -> int:
    ledger, _ = load_ledger(args)
    end = args.end or ledger.date_range()[1]
    start = args.start or end - timedelta(days=30)
    users = len(ledger.users())
    if args.k < 1 or args.k > users:
        raise UsageError(f"k must lie in [1, {users}]")
    res = cluster_balances(ledger, (start, end), args.k, DtwConfig(args.dtw_window), Linkage(args.linkage))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fh, w = _writer(out / "cluster_assignments.csv")
    with fh:
        w.writerow(["user_id", "cluster"])
        for user in sorted(res.assignments):
            w.writerow([user, res.assignments[user]])
    fh, w = _writer(out / "cluster_profiles.csv")
    with fh:
        w.writerow(["cluster", "category", "mean_spend"])
        for cid, prof in sorted(res.category_profiles.items()):
            for cat, v in prof.items():
                w.writerow([cid, cat.value, f"{v:.2f}"])
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "recurring": cmd_recurring,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "tune": cmd_tune,
    "cluster": cmd_cluster,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"ledgercast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse: --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("ledgercast: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ledgercast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LedgerError, ForecastError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ledgercast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
