"""End-to-end commands behind the CLI: cluster, partition, train, eval, bench."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import report as rp
from .datasets import Dataset, load_dataset, standardize
from .hierarchy import Hierarchy, build_hierarchy
from .metrics import ami
from .parallel import resolve_workers
from .partition import OrganizedData, PartitionPlan, organize, plan_partition
from .regress import (
    DEFAULT_GRIDS,
    MODEL_KINDS,
    RegressionEnsemble,
    evaluate,
    fit_ensemble,
    load_ensemble,
    save_ensemble,
    train_lr,
    tune,
)


@dataclass
class RunConfig:
    data: str | None = None
    format: str = "auto"
    target: str | None = None
    standardize: bool | None = None  # None: on for regression data, off for shape files
    model: str = "krr"
    grid: dict | None = None
    p: int = 1
    workers: int | None = None
    delta: float = 0.25
    level: int | None = None
    group_size: float | None = None
    seed: int = 0
    out: str = "out"
    ensemble: str | None = None
    test: str | None = None
    models: list[str] = field(default_factory=lambda: list(MODEL_KINDS))
    ps: list[int] = field(default_factory=lambda: [1, 4, 16])
    assignments: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ValueError(f"models must be drawn from {MODEL_KINDS}, got {kind!r}")


class Timer:
    """Wall-clock totals per phase (monotonic clock)."""

    def __init__(self):
        self.totals: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] = self.totals.get(name, 0.0) + time.perf_counter() - start

    def write(self, path) -> None:
        rep = rp.Report()
        total = sum(self.totals.values()) or 1.0
        for name, secs in self.totals.items():
            rep.add("timing", name, seconds=round(secs, 6), percent=round(100 * secs / total, 2))
        rep.write(path)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg: RunConfig, path: str | None = None) -> tuple[Dataset, bool]:
    ds = load_dataset(path or cfg.data, cfg.format, cfg.target)
    scale = cfg.standardize if cfg.standardize is not None else ds.format != "xyl"
    return ds, scale


def _prepare(ds: Dataset, scale: bool):
    if scale:
        return standardize(ds.X)
    return ds.X, None, None


def _header(rep: rp.Report, ds: Dataset, scale: bool, cfg: RunConfig) -> None:
    rep.add("run", "dataset", name=ds.name, n=ds.n, d=ds.d, format=ds.format, standardized=scale)


def _levels(rep: rp.Report, h: Hierarchy) -> None:
    rep.add("levels", 0, clusters=h.n, hci="")
    for lv, score in zip(h.levels, h.hci):
        rep.add("levels", lv.index, clusters=lv.n_clusters, hci=score)
    rep.add("run", "hierarchy", levels=len(h.levels), optimal_level=h.optimal_level)


def _partition_rows(rep: rp.Report, plan: PartitionPlan) -> None:
    rep.add("run", "partition", p=plan.p, delta=plan.delta, groups=len(plan.groups), max_load=plan.max_load,
            load_bound=plan.load_bound)
    for proc, (load, gids) in enumerate(zip(plan.loads, plan.assignments)):
        rep.add("partition", proc, load=load, groups=" ".join(str(g) for g in gids))


def cmd_cluster(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    timer = Timer()
    with timer.phase("cluster_io"):
        ds, scale = _load(cfg)
        Z, _, _ = _prepare(ds, scale)
    with timer.phase("clustering"):
        h = build_hierarchy(Z, workers=cfg.workers)
    rep = rp.Report()
    _header(rep, ds, scale, cfg)
    _levels(rep, h)
    result = {"hierarchy": h, "dataset": ds, "ami": None}
    if ds.labels is not None:
        score = ami(ds.labels, h.optimal.assignment)
        rep.add("quality", "ami", level=h.optimal_level, value=score)
        result["ami"] = score
    rep.write(out / "report.csv")
    rp.write_json(out / "hierarchy.json", h.to_dict(assignments=cfg.assignments))
    rp.plot_hierarchy(out / "hci.svg", h.cluster_counts(), h.hci, h.optimal_level)
    if ds.d == 2:
        rp.plot_clusters(out / "clusters.svg", ds.X, h.optimal.assignment,
                         title=f"{ds.name}: level {h.optimal_level}, {h.optimal.n_clusters} clusters")
    timer.write(out / "timing.csv")
    result["report"] = rep
    return result


def _cluster_and_plan(cfg: RunConfig, Z, y, timer: Timer, p: int | None = None):
    with timer.phase("clustering"):
        h = build_hierarchy(Z, workers=cfg.workers)
        org = organize(Z, h, y)
        plan = plan_partition(org, h, cfg.p if p is None else p, cfg.delta, level=cfg.level,
                              group_size=cfg.group_size)
    return h, org, plan


def cmd_partition(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    timer = Timer()
    with timer.phase("cluster_io"):
        ds, scale = _load(cfg)
        Z, _, _ = _prepare(ds, scale)
    h, org, plan = _cluster_and_plan(cfg, Z, ds.y, timer)
    rep = rp.Report()
    _header(rep, ds, scale, cfg)
    _levels(rep, h)
    _partition_rows(rep, plan)
    rep.write(out / "report.csv")
    rp.write_json(out / "hierarchy.json", h.to_dict(assignments=cfg.assignments))
    payload = plan.to_dict()
    payload["order"] = org.order.tolist()
    rp.write_json(out / "partition.json", payload)
    rp.plot_loads(out / "loads.svg", plan.loads, plan.load_bound)
    timer.write(out / "timing.csv")
    return {"hierarchy": h, "organized": org, "plan": plan, "report": rep}


def train_pipeline(cfg: RunConfig, ds: Dataset, scale: bool, timer: Timer | None = None, p: int | None = None):
    if ds.y is None:
        raise ValueError(f"{ds.name} has no regressand column; training needs one")
    timer = timer or Timer()
    Z, mean, sd = _prepare(ds, scale)
    h, org, plan = _cluster_and_plan(cfg, Z, ds.y, timer, p=p)
    with timer.phase("regression"):
        grid = cfg.grid if cfg.grid is not None else DEFAULT_GRIDS[cfg.model]
        params, scores = tune(org, plan, cfg.model, grid, seed=cfg.seed, workers=cfg.workers)
        ens = fit_ensemble(org, plan, cfg.model, params, workers=cfg.workers)
    ens.feature_mean, ens.feature_scale = mean, sd
    return {"hierarchy": h, "organized": org, "plan": plan, "ensemble": ens, "scores": scores}


def _regression_rows(rep: rp.Report, ens: RegressionEnsemble, scores) -> None:
    rep.add("regression", "model", kind=ens.kind, params=ens.params, base_sigma=ens.base_sigma,
            groups=ens.n_groups)
    for i, (params, score) in enumerate(scores):
        rep.add("validation", i, params=params, mse=score)


def cmd_train(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    timer = Timer()
    with timer.phase("cluster_io"):
        ds, scale = _load(cfg)
    res = train_pipeline(cfg, ds, scale, timer)
    with timer.phase("regression_io"):
        save_ensemble(out / "ensemble.bin", res["ensemble"])
    rep = rp.Report()
    _header(rep, ds, scale, cfg)
    _levels(rep, res["hierarchy"])
    _partition_rows(rep, res["plan"])
    _regression_rows(rep, res["ensemble"], res["scores"])
    rep.write(out / "report.csv")
    rp.write_json(out / "hierarchy.json", res["hierarchy"].to_dict(assignments=cfg.assignments))
    rp.plot_hierarchy(out / "hci.svg", res["hierarchy"].cluster_counts(), res["hierarchy"].hci,
                      res["hierarchy"].optimal_level)
    rp.plot_loads(out / "loads.svg", res["plan"].loads, res["plan"].load_bound)
    timer.write(out / "timing.csv")
    res["report"] = rep
    return res


def cmd_eval(cfg: RunConfig) -> dict:
    if not cfg.ensemble:
        raise ValueError("eval needs an ensemble file")
    if not Path(cfg.ensemble).exists():
        raise FileNotFoundError(f"{cfg.ensemble}: no such ensemble file")
    out = _outdir(cfg)
    timer = Timer()
    with timer.phase("regression_io"):
        ens = load_ensemble(cfg.ensemble)
        ds, _ = _load(cfg)
    if ds.y is None:
        raise ValueError(f"{ds.name} has no regressand column; evaluation needs one")
    with timer.phase("regression"):
        result = evaluate(ds.X, ds.y, ens, workers=cfg.workers)
    rep = rp.Report()
    rep.add("run", "dataset", name=ds.name, n=ds.n, d=ds.d, format=ds.format)
    rep.add("regression", "model", kind=ens.kind, params=ens.params, groups=ens.n_groups, p=ens.p)
    rep.add("evaluation", "test", k=result.k, mse=result.mse)
    for proc, (err, cnt) in enumerate(zip(result.process_errors, result.process_counts)):
        rep.add("evaluation", f"process {proc}", squared_error=err, samples=cnt)
    rep.write(out / "report.csv")
    timer.write(out / "timing.csv")
    return {"evaluation": result, "ensemble": ens, "report": rep}


def cmd_bench(cfg: RunConfig) -> dict:
    """Every model kind at every process count, plus a single global linear
    model as a sanity baseline.

    Groups are cut with a fixed size (``group_size``, default ``n / max(ps)``)
    so the models, and therefore the MSE, do not depend on ``p``.
    """
    if not cfg.test:
        raise ValueError("bench needs a test file")
    out = _outdir(cfg)
    timer = Timer()
    with timer.phase("cluster_io"):
        ds, scale = _load(cfg)
        test, _ = _load(cfg, cfg.test)
    if ds.y is None or test.y is None:
        raise ValueError("bench needs regressands in both the training and test files")
    Z, mean, sd = _prepare(ds, scale)
    group_size = cfg.group_size or ds.n / max(cfg.ps)
    with timer.phase("clustering"):
        h = build_hierarchy(Z, workers=cfg.workers)
        org = organize(Z, h, ds.y)

    rep = rp.Report()
    _header(rep, ds, scale, cfg)
    _levels(rep, h)
    rep.add("run", "bench", group_size=group_size, delta=cfg.delta, seed=cfg.seed)
    table: dict[str, dict[int, float]] = {}
    for kind in cfg.models:
        grid = DEFAULT_GRIDS[kind]
        with timer.phase("clustering"):
            base_plan = plan_partition(org, h, 1, cfg.delta, level=cfg.level, group_size=group_size)
        with timer.phase("regression"):
            params, _ = tune(org, base_plan, kind, grid, seed=cfg.seed, workers=cfg.workers)
        for p in cfg.ps:
            with timer.phase("clustering"):
                plan = plan_partition(org, h, p, cfg.delta, level=cfg.level, group_size=group_size)
            with timer.phase("regression"):
                ens = fit_ensemble(org, plan, kind, params, workers=cfg.workers)
                ens.feature_mean, ens.feature_scale = mean, sd
            with timer.phase("reduce"):
                result = evaluate(test.X, test.y, ens, workers=cfg.workers)
            table.setdefault(kind, {})[p] = result.mse
            rep.add("bench", f"{kind} p={p}", model=kind, p=p, groups=ens.n_groups, params=params,
                    max_load=plan.max_load, mse=result.mse)

    with timer.phase("regression"):
        baseline = train_lr(Z, ds.y)
        Zt, _, _ = standardize(test.X, mean, sd) if scale else (test.X, None, None)
        resid = baseline.predict(Zt) - test.y
        rep.add("bench", "global lr", model="lr-global", p=1, groups=1, params={}, max_load=ds.n,
                mse=float(resid @ resid / resid.size))
    rep.write(out / "report.csv")
    rp.plot_mse(out / "mse.svg", table)
    rp.plot_hierarchy(out / "hci.svg", h.cluster_counts(), h.hci, h.optimal_level)
    timer.write(out / "timing.csv")
    return {"table": table, "report": rep, "hierarchy": h}


COMMANDS = {
    "cluster": cmd_cluster,
    "partition": cmd_partition,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def run(command: str, cfg: RunConfig) -> dict:
    resolve_workers(cfg.workers)
    return COMMANDS[command](cfg)
