"""Best Friend Clustering with HCI level selection, balanced partitioning
and per-cluster regression."""

from .bfgraph import (
    BestFriendGraph,
    Component,
    GraphError,
    build_best_friend_graph,
    component_labels,
    distance,
    find_components,
    forest_as_undirected,
)
from .hierarchy import ClusterLevel, Hierarchy, build_hierarchy, cluster_step, dispersion_fill, hci, select_optimal_level
from .metrics import ami, mse
from .partition import Group, OrganizedData, PartitionError, PartitionPlan, merge_pack, organize, plan_partition, split_backtrack

__version__ = "0.1.0"
