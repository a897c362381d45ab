import math
import os
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
SHAPE_DIR = Path(os.environ.get("BFC_SHAPE_DATA", DATA / "shapes"))


# -- independent oracles ----------------------------------------------------


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def brute_nearest(X):
    """Nearest neighbour per row from a full distance matrix, lowest index on ties."""
    n = len(X)
    out = []
    for i in range(n):
        best, best_d = -1, math.inf
        for j in range(n):
            if j == i:
                continue
            d = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(X[i], X[j])))
            if d < best_d:
                best, best_d = j, d
        out.append((best, best_d))
    return out


def kruskal_weight(X, members):
    members = list(members)
    edges = []
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            edges.append((math.dist(X[members[a]], X[members[b]]), a, b))
    edges.sort()
    uf = UnionFind(len(members))
    total, used = 0.0, 0
    for w, a, b in edges:
        if uf.union(a, b):
            total += w
            used += 1
    assert used == len(members) - 1
    return total


def undirected_components(n, edges):
    uf = UnionFind(n)
    for edge in edges:
        uf.union(edge[0], edge[1])
    groups = {}
    for v in range(n):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(tuple(g) for g in groups.values())


def city_instance(level2_distance=None):
    """Twelve 2-D points forming four tight clusters in two pairs.

    Four first-level clusters with tree edges {1}, {7,5,4,3}, {2}, {2,1}
    (compactness 1, 4.75, 2, 1.5), centre pairs 30 and 16 apart, and the two
    second-level clusters ``level2_distance`` apart.
    """
    from scipy.optimize import brentq

    if level2_distance is None:
        # distance giving the second level an HCI of 0.51
        f = lambda d: 0.5 * ((d - 30) / (d + 30) + (d - 16) / (d + 16)) - 0.51
        level2_distance = brentq(f, 31, 1000)
    b = [(0.0, 0.0), (7.0, 0.0), (12.0, 0.0), (16.0, 0.0), (19.0, 0.0)]
    bx = sum(p[0] for p in b) / 5
    a = [(bx - 0.5, 30.0), (bx + 0.5, 30.0)]
    ab_center = np.mean(np.array(a + b), axis=0)
    cx = ab_center[0] + level2_distance
    cy = ab_center[1] - 48.0 / 5.0
    c = [(cx - 1.0, cy), (cx + 1.0, cy)]
    d = [(cx - 5.0 / 3.0, cy + 16.0), (cx + 1.0 / 3.0, cy + 16.0), (cx + 4.0 / 3.0, cy + 16.0)]
    return np.array(a + b + c + d)


@pytest.fixture
def rng():
    return np.random.default_rng(20211)


@pytest.fixture(scope="session")
def cadata():
    from bfcluster.datasets import load_dataset, standardize

    ds = load_dataset(DATA / "cadata_train.csv.gz")
    Z, _, _ = standardize(ds.X)
    return ds, Z


@pytest.fixture(scope="session")
def cadata_hierarchy(cadata):
    from bfcluster.hierarchy import build_hierarchy
    from bfcluster.partition import organize

    ds, Z = cadata
    h = build_hierarchy(Z)
    return h, organize(Z, h, ds.y)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
