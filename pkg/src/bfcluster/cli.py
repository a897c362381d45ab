"""Command-line entry point: ``bfc {cluster,partition,train,eval,bench}``."""

from __future__ import annotations

import argparse
import json
import sys

from .parallel import WORKERS_ENV
from .regress import MODEL_KINDS
from .runner import RunConfig, run


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_data(sp, required=True):
    sp.add_argument("--data", required=required, help="input file (.csv[.gz], .libsvm, or whitespace x y label)")
    sp.add_argument("--format", default="auto", choices=["auto", "csv", "libsvm", "xyl"])
    sp.add_argument("--target", help="CSV column holding the regressand (default: last column)")
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                    help="z-score features (default: on for csv/libsvm, off for shape files)")


def _add_common(sp):
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--workers", type=int, default=None, help=f"worker threads (default: ${WORKERS_ENV} or 1)")


def _add_partition(sp):
    sp.add_argument("--p", type=int, default=1, help="virtual processes")
    sp.add_argument("--delta", type=float, default=0.25, help="allowed overload above n/p before splitting")
    sp.add_argument("--level", type=int, default=None, help="hierarchy level to partition (default: HCI optimum)")
    sp.add_argument("--group-size", type=float, default=None,
                    help="fixed split target; keeps groups identical across p")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bfc", description="Best Friend Clustering and per-cluster regression")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("cluster", help="build the hierarchy and pick the optimal level")
    _add_data(sp)
    _add_common(sp)
    sp.add_argument("--assignments", action="store_true", help="include per-sample assignments in hierarchy.json")

    sp = sub.add_parser("partition", help="balanced partition of the optimal level")
    _add_data(sp)
    _add_common(sp)
    _add_partition(sp)
    sp.add_argument("--assignments", action="store_true")

    sp = sub.add_parser("train", help="train one model per group and save the ensemble")
    _add_data(sp)
    _add_common(sp)
    _add_partition(sp)
    sp.add_argument("--model", default="krr", choices=MODEL_KINDS)
    sp.add_argument("--grid", type=json.loads, default=None,
                    help='hyperparameter grid as JSON, e.g. \'{"lam": [0.01, 0.1]}\'')
    sp.add_argument("--seed", type=int, default=0, help="seed for the validation split")

    sp = sub.add_parser("eval", help="evaluate a saved ensemble on a test file")
    _add_data(sp)
    _add_common(sp)
    sp.add_argument("--ensemble", required=True)

    sp = sub.add_parser("bench", help="all models across process counts on a train/test pair")
    _add_data(sp)
    _add_common(sp)
    sp.add_argument("--test", required=True)
    sp.add_argument("--models", type=_str_list, default=list(MODEL_KINDS))
    sp.add_argument("--ps", type=_int_list, default=[1, 4, 16])
    sp.add_argument("--delta", type=float, default=0.25)
    sp.add_argument("--level", type=int, default=None)
    sp.add_argument("--group-size", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
    if "group_size" in fields:
        fields["group_size"] = float(fields["group_size"])
    try:
        result = run(args.command, RunConfig(**fields))
    except Exception as exc:  # reported as one machine-readable line
        print("error: " + json.dumps({"type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    summary = {"command": args.command, "out": fields.get("out", "out")}
    if "hierarchy" in result:
        h = result["hierarchy"]
        summary.update(levels=len(h.levels), optimal_level=h.optimal_level)
    if result.get("ami") is not None:
        summary["ami"] = result["ami"]
    if "plan" in result:
        summary["max_load"] = result["plan"].max_load
    if "evaluation" in result:
        summary["mse"] = result["evaluation"].mse
    if "table" in result:
        summary["mse"] = result["table"]
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
