"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal
error. Every output file is written atomically.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io as wio
from .eval import METHODS, param_sweep, run_benchmark
from .forest import Forest, ForestParams, fit, predict_measure
from .forest.model import default_threads
from .hte import HTEModel, estimate_cate, estimate_pi, fit_hte, lambda_p, oob_lambda
from .measure import MeasureError
from .synth import KINDS, ScenarioSpec, generate

log = logging.getLogger("wrforest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _forest_flags(p):
    p.add_argument("--criterion", choices=["intra", "inter"], default="intra")
    p.add_argument("--p", type=float, default=2.0, help="Wasserstein order for --criterion inter")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--subsample", type=int, default=500)
    p.add_argument("--replace", action="store_true", help="draw subsamples with replacement")
    p.add_argument("--mtry", type=int, default=None, help="default: all covariates")
    p.add_argument("--nodesize", type=int, default=2)
    p.add_argument("--kind", choices=["wrf", "ert", "mondrian"], default="wrf")
    p.add_argument("--standardize", action="store_true",
                   help="scale each response coordinate by its standard deviation when splitting")
    p.add_argument("--seed", type=int, default=0)


def _threads_flag(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $WRF_THREADS or all cores)")


def _query_flags(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", help="one comma-separated query vector")
    g.add_argument("--x-file", help="headerless CSV, one query vector per line")


def _bench_flags(p):
    p.add_argument("--scenario", choices=KINDS, default="main")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="training-data seed")
    p.add_argument("--forest-seed", type=int, default=0)
    p.add_argument("--methods", default="intra,inter2,inter1,ert,mondrian")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--subsample", type=int, default=500)
    p.add_argument("--replace", action="store_true")
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--nodesize", type=int, default=2)
    p.add_argument("--arms", default="0,1")
    p.add_argument("--orders", default="1,2")
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--m-ref", type=int, default=2000)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--mse", action="store_true", help="also report conditional-mean MSE")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", default=None, help="flattened report CSV")
    _threads_flag(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wrf", description="Wasserstein random forests")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="draw a synthetic observational dataset")
    p.add_argument("--scenario", choices=KINDS, default="main")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one forest")
    p.add_argument("--data", required=True)
    p.add_argument("--arm", type=int, choices=[0, 1], default=None,
                   help="train on the rows of one arm only")
    _forest_flags(p)
    _threads_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-hte", help="train control and treated forests")
    p.add_argument("--data", required=True)
    _forest_flags(p)
    _threads_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="predicted conditional measure")
    p.add_argument("--model", required=True)
    p.add_argument("--arm", type=int, choices=[0, 1], default=None,
                   help="arm to query when the model is a treatment-effect model")
    _query_flags(p)
    p.add_argument("--out", required=True)

    for name, help_ in (("cate", "estimated CATE per query"),
                        ("lambda", "estimated Lambda_p per query")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True)
        _query_flags(p)
        if name == "lambda":
            p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--out", required=True)

    p = sub.add_parser("oob-lambda", help="out-of-bag Lambda_p at every training row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="the CSV the model was trained on")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="average-Wasserstein benchmark")
    _bench_flags(p)

    p = sub.add_parser("sweep", help="parameter sweep")
    _bench_flags(p)
    p.add_argument("--axis", choices=["mtry", "nodesize", "subsample_size"], required=True)
    p.add_argument("--values", required=True, help="comma-separated grid")
    return parser


def _meta(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("verbose", "threads")}
    return {"command": args.command, "flags": flags}


def _params(args, d: int) -> ForestParams:
    criterion = "intra_l2" if args.criterion == "intra" else "inter_wp"
    return ForestParams(
        m_trees=args.trees, subsample_size=args.subsample, with_replacement=args.replace,
        mtry=d if args.mtry is None else args.mtry, nodesize=args.nodesize,
        criterion=criterion, p=args.p if criterion == "inter_wp" else 2.0, seed=args.seed,
        kind=args.kind, standardize=args.standardize)


def _threads(args) -> int:
    return args.threads if getattr(args, "threads", None) else default_threads()


def _load_model(path):
    obj = wio.read_json(path)
    if "forest0" in obj:
        return HTEModel.from_dict(obj)
    return Forest.from_dict(obj)


def _queries(args, d: int) -> np.ndarray:
    if args.x is not None:
        return wio.parse_vector(args.x, d).reshape(1, -1)
    return wio.read_matrix_csv(args.x_file, d)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def cmd_simulate(args):
    data = generate(ScenarioSpec(args.scenario, args.n, args.d, args.seed))
    wio.write_dataset_csv(args.out, data.x, data.y, data.t)


def cmd_train(args):
    x, y, t = wio.read_dataset_csv(args.data)
    if args.arm is not None:
        x, y = x[t == args.arm], y[t == args.arm]
    forest = fit(x, y, _params(args, x.shape[1]), threads=_threads(args))
    wio.write_json(args.out, {**forest.to_dict(), "meta": _meta(args)})


def cmd_train_hte(args):
    x, y, t = wio.read_dataset_csv(args.data)
    model = fit_hte(x, y, t, _params(args, x.shape[1]), threads=_threads(args))
    wio.write_json(args.out, {**model.to_dict(), "meta": _meta(args)})


def cmd_predict(args):
    model = _load_model(args.model)
    if isinstance(model, HTEModel):
        if args.arm is None:
            raise UsageError("predict: --arm is required for a treatment-effect model")
        d = model.forest0.d
        get = lambda x: estimate_pi(model, args.arm, x)
    else:
        d = model.d
        get = lambda x: predict_measure(model, x)
    xs = _queries(args, d)
    measures = [get(x).to_dict() for x in xs]
    if args.x is not None:
        out = {**measures[0], "meta": _meta(args)}
    else:
        out = {"measures": measures, "meta": _meta(args)}
    wio.write_json(args.out, out)


def _hte_model(path) -> HTEModel:
    model = _load_model(path)
    if not isinstance(model, HTEModel):
        raise ValueError(f"{path} is a single-forest model; this command needs train-hte output")
    return model


def cmd_cate(args):
    model = _hte_model(args.model)
    xs = _queries(args, model.forest0.d)
    rows = [[i, repr(estimate_cate(model, x))] for i, x in enumerate(xs)]
    wio.write_rows(args.out, ["row", "cate"], rows)


def cmd_lambda(args):
    model = _hte_model(args.model)
    xs = _queries(args, model.forest0.d)
    rows = [[i, repr(lambda_p(model, x, args.p))] for i, x in enumerate(xs)]
    wio.write_rows(args.out, ["row", "lambda"], rows)


def cmd_oob_lambda(args):
    model = _hte_model(args.model)
    x, _, _ = wio.read_dataset_csv(args.data)
    res = oob_lambda(model, x, args.p)
    wio.write_rows(args.out, ["row", "lambda"],
                   [[r, repr(v)] for r, v in zip(res.rows, res.values)])
    if res.skipped:
        log.warning("%d rows had no out-of-bag tree and were skipped: %s", len(res.skipped),
                    ",".join(map(str, res.skipped[:20])))


def _bench_setup(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {','.join(sorted(METHODS))}")
    spec = ScenarioSpec(args.scenario, args.n, args.d, args.seed)
    params = ForestParams(m_trees=args.trees, subsample_size=args.subsample,
                          with_replacement=args.replace,
                          mtry=args.d if args.mtry is None else args.mtry,
                          nodesize=args.nodesize, seed=args.forest_seed)
    arms = tuple(int(a) for a in _floats(args.arms))
    if any(a not in (0, 1) for a in arms):
        raise UsageError("--arms takes 0 and/or 1")
    return methods, spec, params, arms, tuple(_floats(args.orders))


def cmd_bench(args):
    methods, spec, params, arms, orders = _bench_setup(args)
    report = run_benchmark(methods, spec, params, arms=arms, orders=orders, n_test=args.n_test,
                           m_ref=args.m_ref, eval_seed=args.eval_seed, with_mse=args.mse,
                           threads=_threads(args))
    report.meta["cli"] = _meta(args)
    report.write(args.out, args.csv)


def cmd_sweep(args):
    methods, spec, params, arms, orders = _bench_setup(args)
    values = [int(v) for v in _floats(args.values)]
    report = param_sweep(args.axis, values, params, spec, methods, arms=arms, orders=orders,
                         n_test=args.n_test, m_ref=args.m_ref, eval_seed=args.eval_seed,
                         with_mse=True, threads=_threads(args))
    report.meta["cli"] = _meta(args)
    report.write(args.out, args.csv)


COMMANDS = {
    "simulate": cmd_simulate, "train": cmd_train, "train-hte": cmd_train_hte,
    "predict": cmd_predict, "cate": cmd_cate, "lambda": cmd_lambda,
    "oob-lambda": cmd_oob_lambda, "bench": cmd_bench, "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (wio.DataFormatError, MeasureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
