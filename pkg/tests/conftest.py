from functools import lru_cache

import pytest

from spotsim.cluster import ClusterConfig
from spotsim.cluster import Layout
from spotsim.cluster import build_cluster
from spotsim.engine import SimEngine
from spotsim.job import JobSpec
from spotsim.job import JobType
from spotsim.metrics import summarize
from spotsim.runner import run_scenario
from spotsim.scheduler import Scheduler
from spotsim.scheduler import SchedulerConfig
from spotsim.workload import builtin


@lru_cache(maxsize=None)
def _builtin_times(name: str):
    run = run_scenario(builtin(name))
    return tuple(r.scheduling_time for r in summarize(run).records)


@pytest.fixture()
def sched_times():
    "Scheduling times of a builtin scenario's measured jobs, cached across tests."
    return _builtin_times


@pytest.fixture()
def engine():
    return SimEngine()


@pytest.fixture()
def small_cluster():
    return build_cluster(ClusterConfig.homogeneous(19, 32))


@pytest.fixture()
def make_scheduler():
    def factory(
        nodes=4,
        cores=4,
        layout=Layout.DUAL,
        auto_preempt=False,
        per_user_limit_nodes=None,
        **cost,
    ):
        from spotsim.scheduler import CostModel

        cluster = build_cluster(
            ClusterConfig.homogeneous(
                nodes, cores, layout=layout, per_user_limit_nodes=per_user_limit_nodes
            )
        )
        return Scheduler(
            SimEngine(),
            cluster,
            cost=CostModel(**cost),
            config=SchedulerConfig(auto_preempt=auto_preempt),
        )

    return factory


@pytest.fixture()
def triple():
    "A triple-mode spec for ``nodes`` whole nodes of ``cores`` cores."

    def factory(nodes, cores=4, qos="normal", user="amy", t=0.0, run=100.0):
        return JobSpec(
            user, qos, JobType.TRIPLE, nodes * cores, run, submit_at=t, tasks_per_node=cores
        )

    return factory
