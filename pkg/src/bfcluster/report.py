"""Report tables and figures.

``report.csv`` is long-format (``section,row,field,value``) so tables of
different shapes share one file. Figures are SVGs rendered with matplotlib
with fixed metadata so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "svg.hashsalt": "bfcluster",
        "svg.fonttype": "path",
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)
SVG_META = {"Date": None, "Creator": None}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


class Report:
    def __init__(self):
        self.rows: list[tuple[str, str, str, str]] = []

    def add(self, section: str, row, **fields) -> None:
        for field, value in fields.items():
            self.rows.append((section, fmt(row), field, fmt(value)))

    def section(self, name: str) -> dict[str, dict[str, str]]:
        out: dict[str, dict[str, str]] = {}
        for sec, row, field, value in self.rows:
            if sec == name:
                out.setdefault(row, {})[field] = value
        return out

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["section", "row", "field", "value"])
            writer.writerows(self.rows)


def read_report(path) -> Report:
    rep = Report()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rep.rows = [tuple(r) for r in reader]
    return rep


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=SVG_META, bbox_inches="tight")
    plt.close(fig)


def plot_clusters(path, X, labels, title: str = "") -> None:
    X = np.asarray(X)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(X[:, 0], X[:, 1], c=labels, cmap="tab20", s=6, linewidths=0)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_hierarchy(path, counts, hci_values, optimal_level: int) -> None:
    levels = np.arange(1, len(hci_values) + 1)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(5, 4.5), sharex=True)
    top.semilogy(np.arange(len(counts)), counts, marker="o", color="0.3")
    top.set_ylabel("clusters")
    bottom.plot(levels, hci_values, marker="o", color="tab:blue")
    bottom.axvline(optimal_level, color="tab:red", lw=0.8, ls="--")
    bottom.set_ylabel("HCI")
    bottom.set_xlabel("level")
    _save(fig, path)


def plot_loads(path, loads, bound: float) -> None:
    fig, ax = plt.subplots(figsize=(max(4, 0.12 * len(loads) + 2), 3))
    ax.bar(np.arange(len(loads)), loads, color="0.55", width=0.8)
    ax.axhline(bound, color="tab:red", lw=0.8, ls="--")
    ax.axhline(sum(loads) / len(loads), color="0.2", lw=0.8)
    ax.set_xlabel("process")
    ax.set_ylabel("samples")
    _save(fig, path)


def plot_mse(path, table: dict[str, dict[int, float]]) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3))
    for kind, by_p in sorted(table.items()):
        ps = sorted(by_p)
        ax.plot(ps, [by_p[p] for p in ps], marker="o", label=kind)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("virtual processes")
    ax.set_ylabel("test MSE")
    ax.legend(frameon=False)
    _save(fig, path)
