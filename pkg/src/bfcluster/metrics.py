"""Partition similarity (adjusted mutual information) and regression error."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # rows: true labels, columns: predicted clusters

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency(labels_true, labels_pred) -> ContingencyTable:
    a = np.asarray(labels_true).ravel()
    b = np.asarray(labels_pred).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"label arrays differ in length: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise ValueError("need at least one label")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return ContingencyTable(table)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(table: ContingencyTable) -> float:
    n = table.n
    nij = table.counts
    outer = np.outer(table.row_sums, table.col_sums)
    nz = nij > 0
    return float(np.sum(nij[nz] / n * (np.log(n * nij[nz]) - np.log(outer[nz]))))


def expected_mutual_info(table: ContingencyTable) -> float:
    """Mutual information expected under random labelings with the same
    cluster sizes (hypergeometric model)."""
    n = table.n
    a = table.row_sums
    b = table.col_sums
    lg_n = gammaln(n + 1)
    total = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            k = np.arange(lo, hi + 1, dtype=np.float64)
            log_prob = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(k + 1) - gammaln(ai - k + 1) - gammaln(bj - k + 1)
                - gammaln(n - ai - bj + k + 1)
            )
            term = k / n * (np.log(n * k) - math.log(ai * bj))
            total += float(np.sum(term * np.exp(log_prob)))
    return total


def ami(labels_true, labels_pred) -> float:
    """Adjusted mutual information, normalised by the larger entropy."""
    table = contingency(labels_true, labels_pred)
    r, s = table.counts.shape
    if r == 1 and s == 1:
        return 1.0
    if r == 1 or s == 1:
        return 0.0
    n = table.n
    mi = mutual_info(table)
    emi = expected_mutual_info(table)
    h = max(_entropy(table.row_sums, n), _entropy(table.col_sums, n))
    denom = h - emi
    if abs(denom) <= 1e-15 * max(1.0, h):
        # only reachable when both sides put every sample in its own cluster
        return 1.0 if r == s == n else 0.0
    return (mi - emi) / denom


def mse(pred, truth) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"prediction and truth differ in length: {p.shape[0]} vs {t.shape[0]}")
    if p.shape[0] == 0:
        raise ValueError("need at least one prediction")
    r = p - t
    return float(np.dot(r, r) / r.shape[0])
