from itertools import permutations

import pytest

from spotsim.preemption import Candidate
from spotsim.preemption import Need
from spotsim.preemption import minimal_prefix
from spotsim.preemption import select_lifo_victims
from spotsim.preemption import youngest_first


@pytest.fixture()
def running():
    return [
        Candidate(1, 1.01, nodes=16, cores=1024),
        Candidate(2, 2.01, nodes=16, cores=1024),
        Candidate(3, 3.01, nodes=16, cores=1024),
        Candidate(4, 4.01, nodes=16, cores=1024),
    ]


def test_youngest_first_orders_by_recognition_time(running):
    for shuffled in permutations(running):
        assert [c.job_id for c in youngest_first(shuffled)] == [4, 3, 2, 1]


def test_ties_prefer_the_larger_job_id():
    same_time = [Candidate(5, 1.0, nodes=1), Candidate(9, 1.0, nodes=1)]

    assert [c.job_id for c in youngest_first(same_time)] == [9, 5]


def test_need_is_falsy_when_empty():
    assert not Need()
    assert Need(cores=1)
    assert Need(nodes=1)


@pytest.mark.parametrize(
    ("need", "expected"),
    [
        (Need(nodes=1), [4]),
        (Need(nodes=16), [4]),
        (Need(nodes=17), [4, 3]),
        (Need(cores=2048), [4, 3]),
        (Need(nodes=64), [4, 3, 2, 1]),
    ],
)
def test_minimal_prefix(running, need, expected):
    chosen = minimal_prefix(youngest_first(running), need)

    assert [c.job_id for c in chosen] == expected


def test_minimal_prefix_needs_both_dimensions():
    ordered = [Candidate(2, 2.0, nodes=4, cores=4), Candidate(1, 1.0, nodes=1, cores=64)]

    assert [c.job_id for c in minimal_prefix(ordered, Need(cores=8, nodes=1))] == [2, 1]


def test_minimal_prefix_falls_short(running):
    assert minimal_prefix(running, Need(nodes=65)) is None


@pytest.mark.parametrize(
    ("deficit", "expected"),
    [(0, []), (-3, []), (16, [4]), (20, [4, 3]), (64, [4, 3, 2, 1]), (100, [4, 3, 2, 1])],
)
def test_select_lifo_victims(running, deficit, expected):
    assert select_lifo_victims(running, deficit) == expected
