"""Balanced partitioning of a clustering level onto virtual processes.

Samples are first reordered so every cluster at every level is a contiguous
slice (sub-clusters nested inside their parent). Oversized clusters are then
split by walking back down the hierarchy, and the resulting groups are packed
onto ``p`` processes. Each group keeps its own model; packing never mixes
groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import Hierarchy


class PartitionError(ValueError):
    pass


@dataclass
class OrganizedData:
    """Samples permuted so clusters are contiguous at every level.

    ``order[pos]`` is the original index of the sample now at ``pos``;
    ``starts[k][c]`` is where cluster ``c`` of level ``k`` begins.
    """

    order: np.ndarray
    X: np.ndarray
    y: np.ndarray | None
    starts: list[np.ndarray]
    counts: list[np.ndarray]

    @property
    def n(self) -> int:
        return int(self.order.shape[0])

    def range_of(self, level: int, cluster: int) -> tuple[int, int]:
        return int(self.starts[level][cluster]), int(self.counts[level][cluster])


def organize(X, hierarchy: Hierarchy, y=None) -> OrganizedData:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n != hierarchy.n:
        raise PartitionError(f"data has {n} rows but the hierarchy was built on {hierarchy.n}")
    # top level is the primary key, raw index the last tie-break
    keys = [np.arange(n)] + [lv.assignment for lv in hierarchy.levels]
    order = np.lexsort(keys)

    position = np.arange(n)
    starts = [position.copy()]
    counts = [np.ones(n, dtype=np.int64)]
    for lv in hierarchy.levels:
        labels = lv.assignment[order]
        first = np.full(lv.n_clusters, n, dtype=np.int64)
        np.minimum.at(first, labels, position)
        starts.append(first)
        counts.append(lv.counts.copy())
    return OrganizedData(
        order=order,
        X=X[order],
        y=None if y is None else np.asarray(y, dtype=np.float64)[order],
        starts=starts,
        counts=counts,
    )


@dataclass
class Group:
    """A contiguous slice of the organized array that trains one model.

    ``level``/``cluster`` name the hierarchy cluster it came from; a group
    chopped out of a level-1 cluster keeps that cluster as its source.
    """

    start: int
    size: int
    level: int
    cluster: int
    id: int = -1

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass
class PartitionPlan:
    p: int
    n: int
    delta: float
    groups: list[Group]
    assignments: list[list[int]]
    loads: list[int] = field(default_factory=list)

    @property
    def n_p(self) -> float:
        return self.n / self.p

    @property
    def load_bound(self) -> float:
        return (1 + self.delta) * math.ceil(self.n_p)

    @property
    def max_load(self) -> int:
        return max(self.loads)

    def process_of(self) -> np.ndarray:
        owner = np.empty(len(self.groups), dtype=np.int64)
        for proc, gids in enumerate(self.assignments):
            owner[gids] = proc
        return owner

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "delta": self.delta,
            "loads": list(self.loads),
            "processes": [
                [
                    {
                        "group": gid,
                        "start": self.groups[gid].start,
                        "size": self.groups[gid].size,
                        "level": self.groups[gid].level,
                        "cluster": self.groups[gid].cluster,
                    }
                    for gid in gids
                ]
                for gids in self.assignments
            ],
        }


def _children_by_level(hierarchy: Hierarchy, organized: OrganizedData) -> list[list[np.ndarray]]:
    # children[k][c]: clusters of level k-1 inside cluster c of level k, in array order
    out: list[list[np.ndarray]] = [[]]
    for k, lv in enumerate(hierarchy.levels, start=1):
        below = organized.starts[k - 1]
        idx = np.lexsort((below, lv.parent))
        bounds = np.searchsorted(lv.parent[idx], np.arange(lv.n_clusters + 1))
        out.append([idx[bounds[c] : bounds[c + 1]] for c in range(lv.n_clusters)])
    return out


def _chop(group: Group, chunk: int) -> list[Group]:
    pieces = math.ceil(group.size / chunk)
    sizes = [len(a) for a in np.array_split(np.arange(group.size), pieces)]
    out, start = [], group.start
    for size in sizes:
        out.append(Group(start=start, size=size, level=group.level, cluster=group.cluster))
        start += size
    return out


def split_backtrack(group: Group, organized: OrganizedData, hierarchy: Hierarchy, n_p: float, delta: float,
                    _children=None) -> list[Group]:
    """Replace an oversized group by its sub-clusters, recursively.

    A group larger than ``(1 + delta) * n_p`` is swapped for its children one
    level down; children that are still too big are split again. Level-1
    clusters that are still too big are cut into runs of at most
    ``ceil(n_p)`` samples. Output groups are contiguous and in array order.
    """
    limit = (1 + delta) * n_p
    if group.size <= limit:
        return [group]
    children = _children if _children is not None else _children_by_level(hierarchy, organized)
    chunk = max(1, math.ceil(n_p))

    out: list[Group] = []
    stack = [group]
    while stack:
        g = stack.pop()
        if g.size <= limit:
            out.append(g)
        elif g.level <= 1:
            out.extend(_chop(g, chunk))
        else:
            subs = [
                Group(start=int(organized.starts[g.level - 1][c]), size=int(organized.counts[g.level - 1][c]),
                      level=g.level - 1, cluster=int(c))
                for c in children[g.level][g.cluster]
            ]
            stack.extend(reversed(subs))
    out.sort(key=lambda g: g.start)
    return out


def merge_pack(groups: list[Group], p: int, n: int | None = None, delta: float = 0.25) -> PartitionPlan:
    """Pack groups onto ``p`` processes, largest first, each onto the
    currently lightest process (lowest index on ties)."""
    if p < 1:
        raise PartitionError(f"p must be >= 1, got {p}")
    if p > len(groups):
        raise PartitionError(
            f"only {len(groups)} groups for {p} processes; lower p or pass a smaller group size"
        )
    for gid, g in enumerate(groups):
        g.id = gid
    total = sum(g.size for g in groups)
    n = total if n is None else n
    if total != n:
        raise PartitionError(f"groups cover {total} samples, expected {n}")

    loads = [0] * p
    assignments: list[list[int]] = [[] for _ in range(p)]
    for g in sorted(groups, key=lambda g: (-g.size, g.start)):
        proc = min(range(p), key=lambda q: (loads[q], q))
        loads[proc] += g.size
        assignments[proc].append(g.id)
    for gids in assignments:
        gids.sort()
    return PartitionPlan(p=p, n=n, delta=delta, groups=groups, assignments=assignments, loads=loads)


def _split_level(organized, hierarchy, level, target, delta, children) -> list[Group]:
    groups: list[Group] = []
    for c in range(hierarchy.level(level).n_clusters):
        start, size = organized.range_of(level, c)
        groups.extend(split_backtrack(Group(start, size, level, c), organized, hierarchy, target, delta, children))
    groups.sort(key=lambda g: g.start)
    return groups


def plan_partition(organized: OrganizedData, hierarchy: Hierarchy, p: int, delta: float = 0.25,
                   level: int | None = None, group_size: float | None = None) -> PartitionPlan:
    """SPLIT the oversized clusters of ``level`` (default: the optimal one),
    then MERGE-pack the groups onto ``p`` processes.

    By default the split target is ``n / p`` and is halved until the packed
    loads respect ``(1 + delta) * ceil(n / p)``. Passing ``group_size`` fixes
    the split target instead, so the groups (and the models trained on them)
    stay the same for every ``p``.
    """
    n = organized.n
    if not 1 <= p <= n:
        raise PartitionError(f"p must be in 1..{n}, got {p}")
    if delta < 0:
        raise PartitionError(f"delta must be >= 0, got {delta}")
    level = hierarchy.optimal_level if level is None else level
    children = _children_by_level(hierarchy, organized)

    if group_size is not None:
        groups = _split_level(organized, hierarchy, level, group_size, delta, children)
        return merge_pack(groups, p, n, delta)

    target = n / p
    while True:
        groups = _split_level(organized, hierarchy, level, target, delta, children)
        if len(groups) >= p:
            plan = merge_pack(groups, p, n, delta)
            if plan.max_load <= plan.load_bound or target <= 1:
                return plan
        elif target <= 1:
            raise PartitionError(f"cannot form {p} groups from {n} samples")
        target = max(1.0, target / 2)
