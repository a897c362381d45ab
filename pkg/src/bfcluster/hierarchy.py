"""Level-by-level Best Friend Clustering and HCI-based level selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bfgraph import BestFriendGraph, GraphError, build_best_friend_graph, component_labels, find_components


@dataclass
class ClusterLevel:
    """One hierarchy step. Levels are 1-indexed; level 0 is the raw samples.

    ``parent[j]`` is the cluster (at this level) that absorbed cluster ``j`` of
    the level below. ``graph`` is the best friend graph over the level below
    that produced this level.
    """

    index: int
    parent: np.ndarray
    assignment: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    compactness: np.ndarray
    graph: BestFriendGraph
    dispersion: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dispersion is None:
            self.dispersion = np.full(self.n_clusters, np.nan)

    @property
    def n_clusters(self) -> int:
        return int(self.counts.shape[0])

    @property
    def centers(self) -> np.ndarray:
        return self.sums / self.counts[:, None]

    @property
    def hci(self) -> float:
        return hci(self.compactness, self.dispersion)


def cluster_step(centers_in, counts_in, level: int, sums_in=None, assignment_in=None, workers=None) -> ClusterLevel:
    """Group the clusters of one level into the clusters of the next.

    ``sums_in`` (per-cluster coordinate sums over the original samples) keeps
    the new centres equal to the mean of the original samples; without it the
    sums are rebuilt as ``centers * counts``.
    """
    centers_in = np.asarray(centers_in, dtype=np.float64)
    counts_in = np.asarray(counts_in, dtype=np.int64)
    m = centers_in.shape[0]
    if m < 2:
        raise GraphError(f"need at least 2 clusters to take a step, got {m}")
    if sums_in is None:
        sums_in = centers_in * counts_in[:, None]
    if assignment_in is None:
        assignment_in = np.repeat(np.arange(m), counts_in)

    graph = build_best_friend_graph(centers_in, workers=workers)
    components = find_components(graph, workers=workers)
    parent = component_labels(components, m)
    k = len(components)

    counts = np.bincount(parent, weights=counts_in, minlength=k).astype(np.int64)
    sums = np.zeros((k, centers_in.shape[1]))
    np.add.at(sums, parent, sums_in)
    compactness = np.array([c.compactness for c in components])
    return ClusterLevel(
        index=level,
        parent=parent,
        assignment=parent[assignment_in],
        counts=counts,
        sums=sums,
        compactness=compactness,
        graph=graph,
    )


def dispersion_fill(level: ClusterLevel, next_graph: BestFriendGraph) -> ClusterLevel:
    """Fill per-cluster dispersion from the next level's graph.

    The next graph is built over this level's centres, so each cluster's
    best-friend weight there is its distance to the nearest other centre.
    """
    if next_graph.n != level.n_clusters:
        raise ValueError(f"graph has {next_graph.n} vertices but level has {level.n_clusters} clusters")
    level.dispersion = next_graph.weight.copy()
    return level


def hci(compactness, dispersion) -> float:
    """Mean of ``(d - c) / (d + c)`` over clusters.

    A single cluster has no neighbour to be dispersed from and scores 0, as
    does any cluster with ``d + c == 0``.
    """
    c = np.asarray(compactness, dtype=np.float64)
    d = np.asarray(dispersion, dtype=np.float64)
    if c.shape[0] <= 1:
        return 0.0
    if np.any(np.isnan(d)):
        raise ValueError("dispersion has not been filled for this level")
    total = d + c
    terms = np.divide(d - c, total, out=np.zeros_like(total), where=total != 0)
    return float(np.mean(terms))


def select_optimal_level(hci_values) -> int:
    """1-based level with the largest HCI; the earliest level wins ties."""
    values = np.asarray(hci_values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no levels to choose from")
    return int(np.argmax(values)) + 1


@dataclass
class Hierarchy:
    n: int
    levels: list[ClusterLevel]
    hci: list[float]
    optimal_level: int

    def level(self, k: int) -> ClusterLevel:
        if not 1 <= k <= len(self.levels):
            raise IndexError(f"level {k} out of range 1..{len(self.levels)}")
        return self.levels[k - 1]

    @property
    def optimal(self) -> ClusterLevel:
        return self.level(self.optimal_level)

    def cluster_counts(self) -> list[int]:
        """Cluster count per level, starting with the n samples of level 0."""
        return [self.n] + [lv.n_clusters for lv in self.levels]

    def to_dict(self, assignments: bool = False) -> dict:
        out = {
            "n": self.n,
            "optimal_level": self.optimal_level,
            "levels": [],
        }
        for lv, score in zip(self.levels, self.hci):
            entry = {"level": lv.index, "clusters": lv.n_clusters, "hci": score}
            if assignments:
                entry["assignment"] = lv.assignment.tolist()
            out["levels"].append(entry)
        return out


def build_hierarchy(data, workers: int | None = None) -> Hierarchy:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise GraphError(f"need at least 2 samples to cluster, got shape {X.shape}")
    n = X.shape[0]

    sums = X.copy()
    counts = np.ones(n, dtype=np.int64)
    assignment = np.arange(n)
    levels: list[ClusterLevel] = []
    while counts.shape[0] >= 2:
        lv = cluster_step(
            sums / counts[:, None], counts, len(levels) + 1, sums_in=sums, assignment_in=assignment, workers=workers
        )
        if levels:
            dispersion_fill(levels[-1], lv.graph)
        levels.append(lv)
        sums, counts, assignment = lv.sums, lv.counts, lv.assignment

    scores = [lv.hci for lv in levels]
    return Hierarchy(n=n, levels=levels, hci=scores, optimal_level=select_optimal_level(scores))
