"""Per-group model ensembles with nearest-centre routing.

Every group of a partition plan trains its own model. A test sample is
predicted by the model whose group centre is closest; squared errors are
summed per owning process and combined in one final reduction.
"""

from __future__ import annotations

import itertools
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ..bfgraph import distance_block
from ..parallel import chunk_ranges, pmap
from ..partition import OrganizedData, PartitionPlan
from .models import Kernel, KrrModel, LinearModel, median_sigma, train_krr, train_lr
from .svr import SvrModel, train_svr

MODEL_KINDS = ("lr", "krr", "svr")
ROUTE_BLOCK = 256

DEFAULT_GRIDS = {
    "lr": {},
    "krr": {"lam": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0], "sigma_scale": [0.5, 1.0, 2.0]},
    "svr": {"C": [1.0, 10.0], "epsilon": [0.05, 0.2], "sigma_scale": [1.0]},
}


def expand_grid(grid: dict) -> list[dict]:
    if not grid:
        return [{}]
    keys = sorted(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def train_model(kind: str, X, y, params: dict, base_sigma: float = 1.0):
    if kind == "lr":
        return train_lr(X, y)
    kernel = Kernel("rbf", base_sigma * params.get("sigma_scale", 1.0))
    if kind == "krr":
        return train_krr(X, y, params["lam"], kernel, center=True)
    if kind == "svr":
        return train_svr(X, y, params["epsilon"], params["C"], kernel, center=True)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


@dataclass
class RegressionEnsemble:
    kind: str
    params: dict
    base_sigma: float
    centers: np.ndarray
    process: np.ndarray
    models: list
    p: int
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_groups(self) -> int:
        return len(self.models)

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.feature_mean is not None:
            X = (X - self.feature_mean) / self.feature_scale
        return X

    def predict(self, X, workers=None, transformed: bool = False) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if not transformed:
            X = self.transform(X)
        groups = route_batch(X, self.centers, workers)
        return _predict_routed(self.models, X, groups, workers)


def route(x, centers) -> int:
    """Index of the nearest centre; the lowest index wins ties."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return int(route_batch(x, centers)[0])


def route_batch(X, centers, workers=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))

    def work(block):
        return np.argmin(distance_block(X[block[0] : block[1]], C), axis=1)

    parts = pmap(work, chunk_ranges(X.shape[0], ROUTE_BLOCK), workers)
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def _predict_routed(models, X, groups, workers=None) -> np.ndarray:
    out = np.empty(X.shape[0])
    gids = np.unique(groups)

    def work(g):
        rows = np.flatnonzero(groups == g)
        return rows, models[g].predict(X[rows])

    for rows, values in pmap(work, gids, workers):
        out[rows] = values
    return out


def fit_ensemble(organized: OrganizedData, plan: PartitionPlan, kind: str, params: dict,
                 base_sigma: float | None = None, mask=None, workers=None) -> RegressionEnsemble:
    """Train one model per plan group.

    ``mask`` (over the organized array) restricts which rows each group
    trains on; groups left without rows are dropped.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if organized.y is None:
        raise ValueError("organized data carries no regressand")
    if base_sigma is None:
        base_sigma = median_sigma(organized.X)
    owner = plan.process_of()

    def work(g):
        rows = np.arange(g.start, g.stop)
        if mask is not None:
            rows = rows[mask[rows]]
        if rows.size == 0:
            return None
        Xg, yg = organized.X[rows], organized.y[rows]
        return Xg.mean(axis=0), train_model(kind, Xg, yg, params, base_sigma), int(owner[g.id])

    fitted = [f for f in pmap(work, plan.groups, workers) if f is not None]
    return RegressionEnsemble(
        kind=kind,
        params=dict(params),
        base_sigma=base_sigma,
        centers=np.array([f[0] for f in fitted]),
        process=np.array([f[2] for f in fitted], dtype=np.int64),
        models=[f[1] for f in fitted],
        p=plan.p,
    )


@dataclass
class EvalReport:
    mse: float
    k: int
    process_errors: list[float]
    process_counts: list[int]


def evaluate(X_test, y_test, ensemble: RegressionEnsemble, workers=None, transformed: bool = False) -> EvalReport:
    """Route, predict, accumulate squared error per process, reduce once."""
    X = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    y = np.asarray(y_test, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError(f"need matching, non-empty test arrays, got {X.shape[0]} and {y.shape[0]}")
    if not transformed:
        X = ensemble.transform(X)
    groups = route_batch(X, ensemble.centers, workers)
    pred = _predict_routed(ensemble.models, X, groups, workers)
    sq = (pred - y) ** 2
    owner = ensemble.process[groups]
    errors = [math.fsum(sq[owner == q]) for q in range(ensemble.p)]
    counts = [int(np.count_nonzero(owner == q)) for q in range(ensemble.p)]
    return EvalReport(mse=math.fsum(errors) / y.shape[0], k=int(y.shape[0]), process_errors=errors,
                      process_counts=counts)


def tune(organized: OrganizedData, plan: PartitionPlan, kind: str, grid: dict | None = None,
         seed: int = 0, val_fraction: float = 0.1, workers=None):
    """Pick hyperparameters on a seeded held-out slice of the training rows.

    Returns ``(best_params, [(params, validation_mse), ...])``; the first
    candidate wins ties.
    """
    grid = DEFAULT_GRIDS[kind] if grid is None else grid
    candidates = expand_grid(grid)
    base_sigma = median_sigma(organized.X)
    if len(candidates) == 1:
        return candidates[0], [(candidates[0], float("nan"))]
    rng = np.random.default_rng(seed)
    n = organized.n
    held = np.zeros(n, dtype=bool)
    held[rng.choice(n, size=max(1, int(round(val_fraction * n))), replace=False)] = True
    scores = []
    for params in candidates:
        ens = fit_ensemble(organized, plan, kind, params, base_sigma=base_sigma, mask=~held, workers=workers)
        rep = evaluate(organized.X[held], organized.y[held], ens, workers=workers, transformed=True)
        scores.append((params, rep.mse))
    best = min(range(len(scores)), key=lambda i: (scores[i][1], i))
    return scores[best][0], scores


# -- serialization ----------------------------------------------------------

MAGIC = b"BFCENS"
FORMAT_VERSION = 1


def _model_header(model) -> dict:
    if isinstance(model, LinearModel):
        return {"type": "lr"}
    if isinstance(model, KrrModel):
        return {"type": "krr", "lam": model.lam, "kernel": model.kernel.to_dict(), "offset": model.offset}
    if isinstance(model, SvrModel):
        return {"type": "svr", "epsilon": model.epsilon, "C": model.C, "bias": model.bias,
                "kernel": model.kernel.to_dict(), "offset": model.offset}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _model_from(header: dict, arrays: dict):
    kind = header["type"]
    if kind == "lr":
        return LinearModel(w=arrays["w"])
    kernel = Kernel(**header["kernel"])
    if kind == "krr":
        return KrrModel(alpha=arrays["alpha"], support=arrays["support"], lam=header["lam"], kernel=kernel,
                        offset=header["offset"])
    if kind == "svr":
        return SvrModel(coef=arrays["coef"], bias=header["bias"], epsilon=header["epsilon"], C=header["C"],
                        kernel=kernel, support=arrays["support"], offset=header["offset"])
    raise ValueError(f"unknown model type {kind!r} in ensemble file")


def save_ensemble(path, ens: RegressionEnsemble) -> None:
    """Binary layout: magic, u16 version, u32 header length, JSON header,
    then every array as little-endian float64 in header order."""
    arrays: list[np.ndarray] = []
    specs: list[dict] = []

    def put(name, arr):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        specs.append({"name": name, "shape": list(arr.shape)})
        arrays.append(arr)

    put("centers", ens.centers)
    put("process", ens.process.astype(np.float64))
    if ens.feature_mean is not None:
        put("feature_mean", ens.feature_mean)
        put("feature_scale", ens.feature_scale)
    models = []
    for g, model in enumerate(ens.models):
        models.append(_model_header(model))
        for name, arr in model.arrays().items():
            put(f"m{g}.{name}", arr)
    header = {
        "kind": ens.kind,
        "params": ens.params,
        "base_sigma": ens.base_sigma,
        "p": ens.p,
        "models": models,
        "arrays": specs,
        "extra": ens.extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(arr.tobytes())


def load_ensemble(path) -> RegressionEnsemble:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path} is not an ensemble file")
    version, hlen = struct.unpack_from("<HI", raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported ensemble format version {version}")
    offset = len(MAGIC) + struct.calcsize("<HI")
    header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(spec["shape"]).copy()
        offset += 8 * count
    models = []
    for g, mh in enumerate(header["models"]):
        prefix = f"m{g}."
        models.append(_model_from(mh, {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}))
    return RegressionEnsemble(
        kind=header["kind"],
        params=header["params"],
        base_sigma=header["base_sigma"],
        centers=arrays["centers"],
        process=arrays["process"].astype(np.int64),
        models=models,
        p=header["p"],
        feature_mean=arrays.get("feature_mean"),
        feature_scale=arrays.get("feature_scale"),
        extra=header.get("extra", {}),
    )
