"""Global search interleaved with local refinement, and clustering of evaluations around local maxima."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import networkx as nx
import numpy as np
from numpy.typing import NDArray

from opencqed.design_opt.general_optimizer import EvaluationLog, ObjectiveSpec, ParamBox, check_budget
from opencqed.design_opt.lipo import LipoOptimizer
from opencqed.design_opt.trust_region import TrustRegionOptimizer

logger = logging.getLogger(__name__)

DEFAULT_N_CLUSTERS = 5
CLUSTER_RADIUS_FRACTION = 0.05
ALTERNATE_ROUNDS = 4

Schedule = Literal["global-then-local", "alternate"]


@dataclass(frozen=True)
class Cluster:
    """Evaluations that climb, neighbour by neighbour, to the same local maximum ``root``."""

    root: int
    members: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class RankedDesign:
    rank: int
    point: NDArray[np.float64]
    value: float
    cluster_size: int
    start_value: float

    def to_dict(self, names: tuple[str, ...]) -> dict[str, object]:
        return {
            "rank": self.rank,
            "point": {name: float(v) for name, v in zip(names, self.point)},
            "value": self.value,
            "cluster_size": self.cluster_size,
            "start_value": self.start_value,
        }


def cluster_radius(dim: int) -> float:
    """Linking distance in unit-cube coordinates: a fixed fraction of the box diagonal."""
    return CLUSTER_RADIUS_FRACTION * math.sqrt(dim)


def cluster_evaluations(points: NDArray[np.float64], values: NDArray[np.float64], radius: float) -> list[Cluster]:
    """Groups evaluations into clusters centred on local maxima, best cluster first.

    Every evaluation links to its best neighbour within ``radius`` that scores higher, so each weakly connected
    component of the resulting graph is a tree whose root is a local maximum of the sample. Ties in value are broken
    by evaluation order.
    """
    n = len(values)
    order = np.lexsort((-np.arange(n), values))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    for i in range(n):
        distances = np.linalg.norm(points - points[i], axis=1)
        uphill = np.flatnonzero((distances <= radius) & (rank > rank[i]))
        if uphill.size:
            graph.add_edge(i, int(uphill[np.argmax(rank[uphill])]))

    clusters = []
    for component in nx.weakly_connected_components(graph):
        root = next(node for node in component if graph.out_degree(node) == 0)
        clusters.append(Cluster(root, tuple(sorted(component))))
    clusters.sort(key=lambda c: rank[c.root], reverse=True)
    return clusters


def _shares(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _refine(
    objective: ObjectiveSpec, box: ParamBox, log: EvaluationLog, start: NDArray[np.float64], budget: int
) -> tuple[NDArray[np.float64], float]:
    result = TrustRegionOptimizer(start).maximize(objective, box, budget, log)
    return result.best_point, result.best_value


def _rank(
    box: ParamBox, refined: list[tuple[NDArray[np.float64], float, int, float]], radius: float, n_clusters: int
) -> list[RankedDesign]:
    """Sorts refined designs by value and drops designs within ``radius`` of a better one."""
    kept: list[tuple[NDArray[np.float64], float, int, float]] = []
    for design in sorted(refined, key=lambda d: d[1], reverse=True):
        u = box.to_unit(design[0])
        if all(np.linalg.norm(u - box.to_unit(other[0])) > radius for other in kept):
            kept.append(design)
    return [
        RankedDesign(rank, point, value, size, start_value)
        for rank, (point, value, size, start_value) in enumerate(kept[:n_clusters], start=1)
    ]


def interleaved_search(
    objective: ObjectiveSpec,
    box: ParamBox,
    global_budget: int,
    local_budget: int,
    n_clusters: int = DEFAULT_N_CLUSTERS,
    seed: int = 0,
    *,
    schedule: Schedule = "global-then-local",
    log: EvaluationLog | None = None,
) -> list[RankedDesign]:
    """LIPO search, clustering of its evaluations and trust-region refinement of the best clusters.

    With the default schedule the whole global budget is spent first; the top ``n_clusters`` clusters then share the
    local budget. The ``"alternate"`` schedule splits both budgets over a few rounds, each resuming LIPO on the shared
    evaluation log and then refining the best cluster not refined yet.

    Args:
        objective: score to maximize.
        box: search bounds.
        global_budget: evaluations for the LIPO phase, at least dim + 1.
        local_budget: evaluations shared by the local refinements.
        n_clusters: maximal number of designs returned.
        seed: seed of the LIPO candidate stream.
        schedule: ``"global-then-local"`` or ``"alternate"``.
        log: receives every evaluation, a fresh log when omitted.

    Returns:
        Refined designs, best first, with designs closer than the cluster radius merged.
    """
    check_budget(global_budget, box.dim + 1)
    check_budget(local_budget)
    check_budget(n_clusters)
    log = EvaluationLog() if log is None else log
    radius = cluster_radius(box.dim)
    lipo = LipoOptimizer(seed)

    if schedule == "global-then-local":
        refined = _global_then_local(objective, box, lipo, log, global_budget, local_budget, n_clusters, radius)
    elif schedule == "alternate":
        refined = _alternate(objective, box, lipo, log, global_budget, local_budget, radius)
    else:
        msg = f"unknown search schedule {schedule!r}"
        raise ValueError(msg)

    designs = _rank(box, refined, radius, n_clusters)
    logger.info(
        "interleaved search: %d evaluations, %d designs, best value %.6g", len(log), len(designs), designs[0].value
    )
    return designs


def _global_then_local(
    objective: ObjectiveSpec,
    box: ParamBox,
    lipo: LipoOptimizer,
    log: EvaluationLog,
    global_budget: int,
    local_budget: int,
    n_clusters: int,
    radius: float,
) -> list[tuple[NDArray[np.float64], float, int, float]]:
    lipo.maximize(objective, box, global_budget, log)
    units, values = box.to_unit(log.points()), log.values()
    clusters = cluster_evaluations(units, values, radius)[: min(n_clusters, local_budget)]
    logger.info("refining %d clusters", len(clusters))
    refined = []
    for cluster, share in zip(clusters, _shares(local_budget, len(clusters))):
        start = np.array(log[cluster.root].point)
        point, value = _refine(objective, box, log, start, share)
        refined.append((point, value, cluster.size, float(values[cluster.root])))
    return refined


def _alternate(
    objective: ObjectiveSpec,
    box: ParamBox,
    lipo: LipoOptimizer,
    log: EvaluationLog,
    global_budget: int,
    local_budget: int,
    radius: float,
) -> list[tuple[NDArray[np.float64], float, int, float]]:
    rounds = max(1, min(ALTERNATE_ROUNDS, local_budget, global_budget // (box.dim + 1)))
    global_shares = _shares(global_budget, rounds)
    refined: list[tuple[NDArray[np.float64], float, int, float]] = []
    refined_units: list[NDArray[np.float64]] = []
    for global_share, local_share in zip(global_shares, _shares(local_budget, rounds)):
        lipo.maximize(objective, box, global_share, log)
        units, values = box.to_unit(log.points()), log.values()
        fresh = [
            c
            for c in cluster_evaluations(units, values, radius)
            if all(np.linalg.norm(units[c.root] - u) > radius for u in refined_units)
        ]
        if not fresh:
            continue
        cluster = fresh[0]
        point, value = _refine(objective, box, log, np.array(log[cluster.root].point), local_share)
        refined.append((point, value, cluster.size, float(values[cluster.root])))
        refined_units.extend([units[cluster.root], box.to_unit(point)])
        logger.debug("alternate round: refined cluster of %d evaluations to %.6g", cluster.size, value)
    if not refined:
        best = log.best()
        refined.append((np.array(best.point), best.value, len(log), best.value))
    return refined
