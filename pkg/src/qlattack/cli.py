"""Command-line entry point: ``qlattack {train,attack,sweep,report}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attack import AttackProblem, BOConfig, DirectConfig, RandomSearchConfig, bo_attack, random_search_attack, write_trace
from .calibration import CalibrationError
from .data import SPAM, DataError, TrainingError, load_spambase, split_and_train
from .direct import InfeasibleStepError
from .experiment import (ConfigError, SweepConfig, aggregate, attack_bounds, aggregate_and_emit, query_ratios,
                         read_raw, run_sweep, write_aggregate)
from .gp import ConditioningError
from .oracle import CountingOracle, load_model, predict, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("qlattack")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


TEST_SET_NAME = "test_set.csv"


def write_test_set(path, X, y, seed_pool):
    pool = set(int(i) for i in seed_pool)
    with open(path, "w") as fh:
        fh.write("index,label,in_seed_pool," + ",".join(f"f{j}" for j in range(X.shape[1])) + "\n")
        for i, (row, lab) in enumerate(zip(X, y)):
            fh.write(f"{i},{int(lab)},{int(i in pool)}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_test_set(path):
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw[:, 3:], raw[:, 1].astype(int)


def cmd_train(args):
    ds = load_spambase(args.data)
    split = split_and_train(ds, args.seed, normalize=not args.raw_scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind, model in split.models.items():
        save_model(model, out / f"{kind}.json")
    write_test_set(out / TEST_SET_NAME, split.X_test, split.y_test, split.seed_pool)
    summary = {"source": ds.source, "seed": args.seed, "n_train": len(split.train_idx),
               "n_test": len(split.test_idx), "accuracy": split.accuracies}
    (out / "training.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    for kind, acc in split.accuracies.items():
        print(f"{kind:>10s}  test accuracy {acc:.4f}")
    return EXIT_OK


def cmd_attack(args):
    model = load_model(args.model)
    test_path = Path(args.test_set) if args.test_set else Path(args.model).parent / TEST_SET_NAME
    X, _ = read_test_set(test_path)
    if not 0 <= args.seed_index < len(X):
        raise DataError(f"seed index {args.seed_index} outside test set of {len(X)} rows")
    x_A = X[args.seed_index]
    base = predict(model, x_A).label
    if base != SPAM:
        log.warning("seed %d is classified as ham by this model", args.seed_index)
    oracle = CountingOracle(model)
    bounds = attack_bounds(x_A, model.domain_upper)
    if args.method == "bo":
        problem = AttackProblem(x_A, base, args.C, args.max_iter, bounds=bounds)
        bo = BOConfig(kappa=args.kappa, orientation=args.orientation, seed_origin=not args.no_seed_origin,
                      refit_every=args.refit_every, box=args.box)
        outcome = bo_attack(oracle, problem, bo, DirectConfig(args.inner_budget))
    else:
        problem = AttackProblem(x_A, base, args.C, 1, bounds=bounds)
        outcome = random_search_attack(oracle, problem, RandomSearchConfig(args.epsilon, args.cap), args.rng_seed)
    if args.trace:
        write_trace(outcome, x_A, args.trace)
    print(json.dumps({"success": outcome.success, "queries": outcome.queries, "oracle_calls": oracle.count,
                      "l1_cost": problem.cost(outcome.x_star) if outcome.success else None,
                      "message": outcome.message}, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args):
    cfg_path = Path(args.config)
    cfg = SweepConfig.from_file(cfg_path)
    if args.jobs is not None:
        cfg.n_jobs = args.jobs
    if not cfg.dataset:
        raise ConfigError("config must set dataset")
    data_path = Path(cfg.dataset)
    if not data_path.is_absolute():
        data_path = cfg_path.parent / data_path
    split = split_and_train(load_spambase(data_path), cfg.rng_seed, cfg.n_train, kinds=cfg.models,
                            normalize=cfg.normalize)
    for kind in cfg.models:
        print(f"{kind:>10s}  test accuracy {split.accuracies[kind]:.4f}")
    rows = run_sweep(split.models, split.X_test, split.seed_pool, cfg)
    aggregate_and_emit(rows, args.out)
    return EXIT_OK


def cmd_report(args):
    agg = aggregate(read_raw(args.raw))
    out = Path(args.out) if args.out else Path(args.raw).with_name("aggregate.csv")
    write_aggregate(agg, out)
    for (model, C), ratio in query_ratios(agg).items():
        print(f"{model:>10s}  C={C:<6g} BO/random mean-query ratio = {ratio:.3f}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="qlattack", description="Query-limited black-box attacks on spam classifiers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train the three target models")
    t.add_argument("--data", required=True, help="spambase-format CSV")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--raw-scale", action="store_true",
                   help="skip min-max normalization; budgets are then in raw feature units")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", help="attack one seed instance")
    a.add_argument("--model", required=True, help="model file written by train")
    a.add_argument("--test-set", help=f"model-input test rows (default: {TEST_SET_NAME} next to the model)")
    a.add_argument("--seed-index", type=int, required=True, help="row of the test set to attack")
    a.add_argument("--C", type=float, required=True, help="L1 budget in model input units (normalized unless trained with --raw-scale)")
    a.add_argument("--method", choices=("bo", "random"), default="bo")
    a.add_argument("--kappa", type=float, default=2.0)
    a.add_argument("--orientation", choices=("minimization-consistent", "paper-literal"),
                   default="minimization-consistent")
    a.add_argument("--inner-budget", type=int, default=500, help="DIRECT evaluations per BO step")
    a.add_argument("--max-iter", type=int, default=50)
    a.add_argument("--no-seed-origin", action="store_true", help="start the GP with no observations")
    a.add_argument("--box", choices=("reach", "symmetric"), default="reach",
                   help="DIRECT search box: reach (each side to its own bound) or symmetric about the seed")
    a.add_argument("--refit-every", type=int, default=0, metavar="K",
                   help="refit the GP lengthscale by marginal likelihood every K queries (0: never)")
    a.add_argument("--epsilon", type=float, default=0.05)
    a.add_argument("--cap", type=int, default=500)
    a.add_argument("--rng-seed", type=int, default=0)
    a.add_argument("--trace", help="write a JSON-lines query trace here")
    a.set_defaults(func=cmd_attack)

    s = sub.add_parser("sweep", help="run the budget sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, help="override n_jobs")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="aggregate a raw rows CSV")
    r.add_argument("--raw", required=True)
    r.add_argument("--out", help="aggregate CSV path (default: aggregate.csv next to the raw file)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConditioningError, CalibrationError, InfeasibleStepError, TrainingError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
