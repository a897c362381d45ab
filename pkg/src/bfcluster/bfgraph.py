"""Best Friend Graph construction and traversal.

Every vertex points at its nearest neighbour (ties go to the lowest index),
so a graph over n points has exactly n directed edges. Each weakly connected
component holds a single two-vertex cycle (a *mutual pair*); dropping one
edge of that pair leaves a tree that is a minimum spanning tree of the
component's complete graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .parallel import chunk_ranges, pmap

# Rows per block in the distance kernel. Changing it must not change results.
ROW_BLOCK = 32


class GraphError(ValueError):
    pass


def _as_matrix(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise GraphError(f"expected a 2-D array of points, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise GraphError("points contain NaN or Inf")
    return X


def distance(a, b) -> float:
    """Euclidean distance, accumulated feature by feature in index order."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise GraphError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise GraphError("non-finite coordinate")
    acc = np.zeros(1)
    for k in range(a.shape[0]):
        diff = a[k : k + 1] - b[k : k + 1]
        acc += diff * diff
    return float(np.sqrt(acc)[0])


def distance_block(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances between every row of ``A`` and every row of ``B``.

    The squared differences are summed in feature order with elementwise
    operations only, so each entry is bit-identical to :func:`distance`
    and does not depend on how rows are blocked.
    """
    if A.shape[1] != B.shape[1]:
        raise GraphError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return _distance_block_t(A, np.ascontiguousarray(B.T))


def _distance_block_t(A: np.ndarray, BT: np.ndarray) -> np.ndarray:
    # BT is B transposed so each feature row is contiguous
    acc = np.zeros((A.shape[0], BT.shape[1]))
    diff = np.empty_like(acc)
    for k in range(A.shape[1]):
        np.subtract(A[:, k, None], BT[k][None, :], out=diff)
        np.multiply(diff, diff, out=diff)
        acc += diff
    return np.sqrt(acc, out=acc)


def nearest_rows(A: np.ndarray, BT: np.ndarray, exclude_offset: int | None = None):
    """Index and distance of the nearest column of ``BT`` for each row of ``A``.

    ``BT`` holds the candidate points as columns. ``exclude_offset`` marks
    ``A`` as the candidates ``offset .. offset+len(A)`` so each row skips
    itself. Ties resolve to the lowest index.
    """
    dist = _distance_block_t(A, BT)
    rows = np.arange(A.shape[0])
    if exclude_offset is not None:
        dist[rows, rows + exclude_offset] = np.inf
    idx = np.argmin(dist, axis=1)
    return idx, dist[rows, idx]


@dataclass(frozen=True)
class BestFriendGraph:
    """One outgoing edge per vertex: ``target[i]`` at distance ``weight[i]``."""

    target: np.ndarray
    weight: np.ndarray

    @property
    def n(self) -> int:
        return int(self.target.shape[0])

    def edges(self):
        return [(i, int(j), float(w)) for i, (j, w) in enumerate(zip(self.target, self.weight))]

    def mutual_pairs(self) -> np.ndarray:
        """``(lo, hi)`` rows for every pair of vertices pointing at each other."""
        src = np.arange(self.n)
        lo = src[(self.target[self.target] == src) & (src < self.target)]
        return np.column_stack([lo, self.target[lo]])


def build_best_friend_graph(points, workers: int | None = None) -> BestFriendGraph:
    X = _as_matrix(points)
    n = X.shape[0]
    if n < 2:
        raise GraphError(f"need at least 2 points to build a best friend graph, got {n}")

    XT = np.ascontiguousarray(X.T)

    def work(block):
        start, stop = block
        return nearest_rows(X[start:stop], XT, exclude_offset=start)

    parts = pmap(work, chunk_ranges(n, ROW_BLOCK), workers)
    target = np.concatenate([p[0] for p in parts]).astype(np.int64)
    weight = np.concatenate([p[1] for p in parts])
    return BestFriendGraph(target=target, weight=weight)


@dataclass
class Component:
    id: int
    members: np.ndarray
    cycle_pair: tuple[int, int]
    edge_count: int
    weight_sum: float
    compactness: float = field(init=False)

    def __post_init__(self):
        self.compactness = self.weight_sum / self.edge_count

    @property
    def size(self) -> int:
        return int(self.members.shape[0])


class InvariantViolation(RuntimeError):
    """The graph broke a structural guarantee (should be impossible)."""


def _children(target: np.ndarray):
    """CSR layout of the reverse edges: who points at each vertex."""
    order = np.argsort(target, kind="stable")
    counts = np.bincount(target, minlength=target.shape[0])
    starts = np.concatenate([[0], np.cumsum(counts)])
    return order, starts


def _search(start_pair, target, order, starts):
    # iterative DFS over the undirected tree, rooted at the mutual pair
    lo, hi = start_pair
    visited = [lo, hi]
    stack = [lo, hi]
    while stack:
        v = stack.pop()
        for u in order[starts[v] : starts[v + 1]]:
            u = int(u)
            if u != lo and u != hi:
                visited.append(u)
                stack.append(u)
    return visited


def find_components(g: BestFriendGraph, workers: int | None = None) -> list[Component]:
    """Split the graph into its trees, one per mutual pair.

    Components are numbered by their smallest member index.
    """
    pairs = g.mutual_pairs()
    order, starts = _children(g.target)
    target = g.target
    weight = g.weight

    def work(block):
        out = []
        for lo, hi in pairs[block[0] : block[1]]:
            members = np.sort(np.asarray(_search((int(lo), int(hi)), target, order, starts)))
            # both cycle directions carry the same weight; keep one of them
            weight_sum = math.fsum(weight[members[members != hi]])
            out.append((members, (int(lo), int(hi)), weight_sum))
        return out

    found = [c for part in pmap(work, chunk_ranges(len(pairs), 256), workers) for c in part]
    total = sum(c[0].shape[0] for c in found)
    if total != g.n:
        raise InvariantViolation(f"components cover {total} of {g.n} vertices")
    found.sort(key=lambda c: int(c[0][0]))
    return [
        Component(id=k, members=m, cycle_pair=pair, edge_count=m.shape[0] - 1, weight_sum=float(ws))
        for k, (m, pair, ws) in enumerate(found)
    ]


def component_labels(components: list[Component], n: int) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    for comp in components:
        labels[comp.members] = comp.id
    if np.any(labels < 0):
        raise InvariantViolation("some vertices were not assigned to a component")
    return labels


def forest_as_undirected(g: BestFriendGraph, components: list[Component]):
    """Undirected tree edges ``(u, v, w)`` with ``u < v``, grouped by component.

    Drops the ``hi -> lo`` direction of each mutual pair.
    """
    forest = []
    for comp in components:
        hi = comp.cycle_pair[1]
        edges = []
        for v in comp.members:
            v = int(v)
            if v == hi:
                continue
            u = int(g.target[v])
            edges.append((min(u, v), max(u, v), float(g.weight[v])))
        forest.append(edges)
    return forest
