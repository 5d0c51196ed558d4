"""Command-line front end.

    cellload gen-scenario --seed 7 --out scenario.json
    cellload gen-data --scenario scenario.json --k 100 --eps 0.05 --out data.csv
    cellload feasible --scenario scenario.json --rates queries.csv
    cellload fit --data data.csv --eps 0.05 --out model.json
    cellload predict --model model.json --rates queries.csv --out loads.csv
    cellload bench --config bench.json --out report.csv

Exit status: 0 on success, 1 for usage/input errors, 2 for numerical failures.
Diagnostics go to stderr; results go to ``--out`` or stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, learner
from .bench import BenchConfig, run_benchmark
from .loadmodel import IndeterminateFeasibilityError, NetworkScenario, is_feasible
from .scenario import (
    InfeasibleRangeError,
    ScenarioParams,
    TrainingSet,
    generate_dataset,
    generate_scenario,
)

log = logging.getLogger("cellload")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON ({exc.msg} at line {exc.lineno})")


def _scenario_params(args, nested: bool = False) -> ScenarioParams:
    doc = _load_json(args.config) if getattr(args, "config", None) else {}
    doc = dict(doc.get("scenario_params", {} if nested else doc))
    overrides = {
        "seed": getattr(args, "seed", None),
        "num_bs": getattr(args, "m", None),
        "num_tp": getattr(args, "n", None),
        "rate_min": getattr(args, "rate_min", None),
        "rate_max": getattr(args, "rate_max", None),
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ScenarioParams.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad scenario parameters: {exc}")


def _read_scenario(path) -> NetworkScenario:
    try:
        return NetworkScenario.from_dict(_load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not a valid scenario: {exc}")


def _read_rates(args, expected: int) -> np.ndarray:
    """Rate vectors from ``--rate`` or a CSV file (header optional; ``y_`` columns ignored)."""
    if args.rate is not None:
        try:
            rows = [[float(v) for v in args.rate.split(",")]]
        except ValueError:
            raise UsageError("--rate must be a comma-separated list of numbers")
    elif args.rates is not None:
        try:
            text = Path(args.rates).read_text()
        except FileNotFoundError:
            raise UsageError(f"file not found: {args.rates}")
        records = [r for r in csv.reader(io.StringIO(text)) if r]
        keep = None
        if records and not _numeric(records[0]):
            header = [h.strip() for h in records.pop(0)]
            keep = [k for k, h in enumerate(header) if not h.startswith("y_")]
        try:
            rows = [[float(rec[k]) for k in (keep or range(len(rec)))] for rec in records]
        except (ValueError, IndexError):
            raise UsageError(f"{args.rates} contains a malformed row")
    else:
        raise UsageError("give the demand with --rates FILE or --rate r1,r2,...")
    if not rows:
        raise UsageError("no rate vectors given")
    widths = {len(r) for r in rows}
    if widths != {expected}:
        raise UsageError(
            f"rate vectors have {sorted(widths)} entries but {expected} are expected"
        )
    return np.asarray(rows, dtype=float)


def _numeric(record) -> bool:
    try:
        [float(v) for v in record]
    except ValueError:
        return False
    return True


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_scenario(args):
    params = _scenario_params(args)
    _emit(generate_scenario(params).to_json() + "\n", args.out)


def cmd_gen_data(args):
    params = _scenario_params(args)
    scenario = _read_scenario(args.scenario)
    data = generate_dataset(scenario, params, args.k, args.eps, args.seed)
    _emit(data.to_csv(), args.out)


def cmd_feasible(args):
    scenario = _read_scenario(args.scenario)
    rates = _read_rates(args, scenario.num_tp)
    if np.any(rates <= 0):
        raise UsageError("rates must be strictly positive")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["verdict", "eigval"])
    for r in rates:
        verdict = is_feasible(scenario, r)
        writer.writerow(["feasible" if verdict.feasible else "infeasible", repr(verdict.eigval)])
    _emit(buf.getvalue(), args.out)


def cmd_fit(args):
    try:
        data = TrainingSet.from_csv(Path(args.data).read_text(), noise_bound=args.eps)
    except FileNotFoundError:
        raise UsageError(f"file not found: {args.data}")
    except ValueError as exc:
        raise UsageError(f"{args.data}: {exc}")
    if args.method == "minimax":
        model = learner.fit(data, args.eps)
    elif args.method == "kernel":
        model = baselines.kernel_fit(data)
    else:
        model = baselines.knn_fit(data, args.neighbors)
    _emit(json.dumps(model.to_dict()) + "\n", args.out)


def cmd_predict(args):
    doc = _load_json(args.model)
    try:
        model = baselines.model_from_json(json.dumps(doc))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{args.model} is not a valid model: {exc}")
    rates = _read_rates(args, model.anchors.shape[1])
    pred = np.atleast_2d(model.predict(rates))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"y_{i + 1}" for i in range(pred.shape[1])])
    for row in pred:
        writer.writerow([repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.out)


def cmd_bench(args):
    doc = _load_json(args.config) if args.config else {}
    params = _scenario_params(args, nested=True)
    doc["scenario_params"] = params
    if args.eps is not None:
        doc["noise_eps"] = args.eps
    if args.k is not None:
        doc["k_grid"] = args.k
    for key in ("num_test", "num_seeds", "workers", "mono_pairs"):
        if getattr(args, key) is not None:
            doc[key] = getattr(args, key)
    if args.no_timings:
        doc["record_timings"] = False
    try:
        config = BenchConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad benchmark configuration: {exc}")
    report = run_benchmark(config)
    _emit(report.to_csv(), args.out)
    if args.summary:
        report.summary_csv(args.summary)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cellload", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_flags(p, seed_default=None):
        p.add_argument("--config", help="JSON file with scenario parameters")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--m", type=int, help="number of base stations")
        p.add_argument("--n", type=int, help="number of test points")
        p.add_argument("--rate-min", type=float)
        p.add_argument("--rate-max", type=float)

    p = sub.add_parser("gen-scenario", help="draw a random deployment")
    scenario_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("gen-data", help="sample a noisy training set")
    scenario_flags(p, seed_default=0)
    p.add_argument("--scenario", required=True)
    p.add_argument("--k", type=int, required=True, help="number of samples")
    p.add_argument("--eps", type=float, default=0.05, help="noise bound")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("feasible", help="conditional-eigenvalue feasibility test")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rates", help="CSV with one rate vector per row")
    p.add_argument("--rate", help="single rate vector r1,r2,...")
    p.add_argument("--out")
    p.set_defaults(func=cmd_feasible)

    p = sub.add_parser("fit", help="fit a load predictor to a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--eps", type=float, default=0.05, help="noise bound")
    p.add_argument("--method", choices=("minimax", "kernel", "knn"), default="minimax")
    p.add_argument("--neighbors", type=int, default=2, help="k for the knn method")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict loads for rate vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--rates", help="CSV with one rate vector per row")
    p.add_argument("--rate", help="single rate vector r1,r2,...")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="learning-curve benchmark")
    scenario_flags(p)
    p.add_argument("--k", type=_int_list, help="training sizes, e.g. 25,50,100")
    p.add_argument("--eps", type=float)
    p.add_argument("--num-test", type=int)
    p.add_argument("--num-seeds", type=int)
    p.add_argument("--mono-pairs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-timings", action="store_true",
                   help="write zero timings so reports are byte-reproducible")
    p.add_argument("--summary", help="also write a per-(k, method) summary CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"cellload {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndeterminateFeasibilityError, InfeasibleRangeError, learner.SmoothingError,
            learner.DuplicateAnchorError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"cellload {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
