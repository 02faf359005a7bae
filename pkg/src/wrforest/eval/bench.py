"""Benchmarks: several methods trained on one draw, scored on shared test points."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from ..forest import ForestParams
from ..io import write_json, write_rows
from ..synth import ScenarioSpec, generate
from .baselines import Method, fit_estimator, method
from .metrics import (EvalSet, draw_test_points, make_eval_set, mean_stderr,
                      mse_conditional_mean, per_point_wasserstein)

SWEEP_AXES = ("mtry", "nodesize", "subsample_size")


@dataclass
class BenchReport:
    scenario: str
    train_seed: int
    cells: List[dict] = field(default_factory=list)
    sweeps: List[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    # fitted estimators keyed by (method, arm); kept in memory only
    estimators: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "train_seed": self.train_seed,
                "cells": self.cells, "sweeps": self.sweeps, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def cell(self, method: str, t: int, p: float) -> dict:
        for c in self.cells:
            if c["method"] == method and c["t"] == t and c["p"] == p:
                return c
        raise KeyError((method, t, p))

    def flat_rows(self):
        """One CSV row per (cell) and per (sweep value, method, t, p)."""
        header = ["kind", "axis", "value", "method", "t", "p", "mean", "stderr", "n_test",
                  "m_ref", "mse", "runtime_s"]
        rows = []
        for c in self.cells:
            rows.append(["cell", "", "", c["method"], c["t"], c["p"], c.get("mean"),
                         c.get("stderr"), c["n_test"], c["m_ref"], c.get("mse"),
                         c.get("runtime_s")])
        for s in self.sweeps:
            for c in s["cells"]:
                rows.append(["sweep", s["axis"], s["value"], s["method"], c["t"], c["p"],
                             c.get("mean"), c.get("stderr"), c["n_test"], c["m_ref"],
                             c.get("mse"), c.get("runtime_s")])
        return header, [["" if v is None else v for v in r] for r in rows]

    def write(self, json_path, csv_path=None) -> None:
        write_json(json_path, self.to_dict())
        if csv_path is not None:
            header, rows = self.flat_rows()
            write_rows(csv_path, header, rows)


def _as_method(m: Union[str, Method]) -> Method:
    return m if isinstance(m, Method) else method(m)


def _params_for(m: Method, params) -> ForestParams:
    if isinstance(params, ForestParams):
        return params
    return params[m.name]


def _arm_data(data, t):
    idx = np.flatnonzero(data.t == t)
    return data.x[idx], data.y[idx]


def _evaluate(est, eval_sets: Dict[int, EvalSet], arm: int, orders, with_mse: bool):
    out = []
    es = eval_sets[arm]
    mse = mse_conditional_mean(est, es.spec, arm, xs=es.xs) if with_mse else None
    for p in orders:
        t0 = time.perf_counter()
        mean, se = mean_stderr(per_point_wasserstein(est, es, p))
        out.append({"t": arm, "p": p, "mean": mean, "stderr": se, "n_test": len(es.xs),
                    "m_ref": es.m_ref, "mse": mse, "eval_s": time.perf_counter() - t0})
    return out


def run_benchmark(methods: Iterable, spec: ScenarioSpec, params, arms=(0, 1), orders=(1.0, 2.0),
                  n_test: int = 200, m_ref: int = 2000, eval_seed: int = 0,
                  with_mse: bool = False, threads: Optional[int] = None,
                  eval_sets: Optional[Dict[int, EvalSet]] = None,
                  keep_estimators: bool = False) -> BenchReport:
    """Train every method per arm on ``generate(spec)`` and score each (arm, p) cell.

    ``params`` is one ForestParams for all methods or a dict keyed by method
    name. A failing method is recorded with an ``error`` entry; the run goes on.
    """
    methods = [_as_method(m) for m in methods]
    if not methods:
        raise ValueError("at least one method is required")
    data = generate(spec)
    if eval_sets is None:
        xs = draw_test_points(spec, n_test, eval_seed)
        eval_sets = {t: make_eval_set(spec, t, n_test, m_ref, eval_seed, xs=xs) for t in arms}
    report = BenchReport(spec.kind, spec.seed, meta={
        "n": spec.n, "d": spec.d, "eval_seed": eval_seed, "arms": list(arms),
        "orders": list(orders), "methods": [m.name for m in methods]})
    for m in methods:
        for arm in arms:
            x, y = _arm_data(data, arm)
            try:
                t0 = time.perf_counter()
                est = fit_estimator(m, x, y, _params_for(m, params), threads=threads)
                fit_s = time.perf_counter() - t0
                if keep_estimators:
                    report.estimators[(m.name, arm)] = est
                for c in _evaluate(est, eval_sets, arm, orders, with_mse):
                    c["runtime_s"] = fit_s + c.pop("eval_s")
                    c["fit_s"] = fit_s
                    report.cells.append({"method": m.name, **c})
            except Exception as exc:  # recorded per method, the run continues
                for p in orders:
                    report.cells.append({"method": m.name, "t": arm, "p": p, "mean": None,
                                         "stderr": None, "n_test": n_test, "m_ref": m_ref,
                                         "runtime_s": None, "error": f"{type(exc).__name__}: {exc}"})
    return report


def _check_axis_value(axis: str, value: int, base: ForestParams, d: int):
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
    value = int(value)
    if axis == "mtry" and not 1 <= value <= d:
        raise ValueError(f"mtry={value} outside [1, {d}]")
    if axis == "nodesize" and not 2 <= value <= base.subsample_size:
        raise ValueError(f"nodesize={value} outside [2, {base.subsample_size}]")
    if axis == "subsample_size" and value < max(2, base.nodesize):
        raise ValueError(f"subsample_size={value} below nodesize")
    return value


def param_sweep(axis: str, values, base: ForestParams, spec: ScenarioSpec, methods,
                arms=(0,), orders=(1.0, 2.0), n_test: int = 200, m_ref: int = 2000,
                eval_seed: int = 0, with_mse: bool = True,
                threads: Optional[int] = None) -> BenchReport:
    """Refit and rescore each method for every value on one tuning axis.

    All values share the same training draw and evaluation points.
    """
    values = [_check_axis_value(axis, v, base, spec.d) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    methods = [_as_method(m) for m in methods]
    xs = draw_test_points(spec, n_test, eval_seed)
    eval_sets = {t: make_eval_set(spec, t, n_test, m_ref, eval_seed, xs=xs) for t in arms}
    report = BenchReport(spec.kind, spec.seed, meta={
        "axis": axis, "values": values, "eval_seed": eval_seed, "n": spec.n, "d": spec.d})
    for v in values:
        params = base.replace(**{axis: v})
        sub = run_benchmark(methods, spec, params, arms=arms, orders=orders, n_test=n_test,
                            m_ref=m_ref, eval_seed=eval_seed, with_mse=with_mse,
                            threads=threads, eval_sets=eval_sets)
        for m in methods:
            report.sweeps.append({"axis": axis, "value": v, "method": m.name,
                                  "cells": [c for c in sub.cells if c["method"] == m.name]})
    return report
