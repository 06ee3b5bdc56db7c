from __future__ import annotations

import numpy as np
import pytest

from opencqed.design_opt.general_optimizer import EvaluationLog, ObjectiveSpec, ParamBox
from opencqed.design_opt.objectives import multi_bump_landscape
from opencqed.design_opt.search import Cluster, Schedule, cluster_evaluations, cluster_radius, interleaved_search


def test_cluster_radius() -> None:
    assert cluster_radius(4) == pytest.approx(0.1)


def test_clusters_climb_to_local_maxima() -> None:
    points = np.array([[0.0], [0.01], [0.02], [0.5], [0.51]])
    values = np.array([1.0, 2.0, 1.0, 3.0, 1.0])
    clusters = cluster_evaluations(points, values, radius=0.05)
    assert clusters == [Cluster(3, (3, 4)), Cluster(1, (0, 1, 2))]
    assert clusters[1].size == 3


def test_ties_go_to_the_earliest_evaluation() -> None:
    clusters = cluster_evaluations(np.array([[0.0], [0.01]]), np.array([1.0, 1.0]), radius=0.05)
    assert clusters == [Cluster(0, (0, 1))]


def test_search_finds_the_global_maximum() -> None:
    hits = 0
    for seed in range(10):
        landscape = multi_bump_landscape(seed)
        designs = interleaved_search(landscape.objective(), landscape.box(), 250, 250, n_clusters=2, seed=seed)
        hits += designs[0].value >= 0.99 * landscape.peak_value
    assert hits >= 8


@pytest.mark.parametrize("schedule", ["global-then-local", "alternate"], ids=["global-then-local", "alternate"])
def test_schedules(schedule: Schedule) -> None:
    landscape = multi_bump_landscape(1, dim=3)
    log = EvaluationLog()
    objective, box = landscape.objective(), landscape.box()
    designs = interleaved_search(objective, box, 60, 60, n_clusters=3, seed=1, schedule=schedule, log=log)
    assert len(log) <= 120
    assert 1 <= len(designs) <= 3
    assert [d.rank for d in designs] == list(range(1, len(designs) + 1))
    values = [d.value for d in designs]
    assert values == sorted(values, reverse=True)
    assert designs[0].value <= max(log.values())
    for first, second in zip(designs, designs[1:]):
        distance = np.linalg.norm(first.point - second.point)
        assert distance > cluster_radius(3) - 1e-12
    assert designs[0].to_dict(box.names)["rank"] == 1


def test_unknown_schedule() -> None:
    landscape = multi_bump_landscape(0, dim=2)
    with pytest.raises(ValueError, match="unknown search schedule"):
        interleaved_search(landscape.objective(), landscape.box(), 10, 10, schedule="random")  # type: ignore[arg-type]


def test_budgets_are_checked() -> None:
    landscape = multi_bump_landscape(0, dim=2)
    with pytest.raises(ValueError, match="at least 3"):
        interleaved_search(landscape.objective(), landscape.box(), 2, 10)


def two_peaks(x: np.ndarray) -> float:
    return float(np.exp(-((x[0] - 0.2) ** 2) / (2 * 0.08**2)) + 0.8 * np.exp(-((x[0] - 0.7) ** 2) / (2 * 0.08**2)))


def test_bimodal_objective_keeps_both_peaks() -> None:
    box = ParamBox(["x"], [0.0], [1.0])
    log = EvaluationLog()
    designs = interleaved_search(ObjectiveSpec(two_peaks), box, 60, 60, seed=0, log=log)
    for location, height in ((0.2, 1.0), (0.7, 0.8)):
        assert any(abs(d.point[0] - location) < 0.01 and abs(d.value - height) < 1e-3 for d in designs)
    assert designs[0].value >= max(e.value for e in log if e.phase == "lipo")


def test_single_cluster_on_a_unimodal_objective() -> None:
    box = ParamBox(["x"], [0.0], [1.0])
    objective = ObjectiveSpec(lambda x: float(-((x[0] - 0.3) ** 2)))
    designs = interleaved_search(objective, box, 20, 40, n_clusters=1, seed=3)
    assert len(designs) == 1
    assert designs[0].point[0] == pytest.approx(0.3, abs=1e-4)
