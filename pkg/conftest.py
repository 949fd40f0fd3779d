import pytest


@pytest.fixture(autouse=True, scope="session")
def add_doctest_context(doctest_namespace):  # noqa: PT004
    from spotsim.cluster import ClusterConfig
    from spotsim.cluster import build_cluster
    from spotsim.engine import EventKind
    from spotsim.engine import SimEngine
    from spotsim.job import JobSpec
    from spotsim.job import JobType
    from spotsim.runner import run_scenario
    from spotsim.scheduler import Scheduler
    from spotsim.workload import builtin

    doctest_namespace["ClusterConfig"] = ClusterConfig
    doctest_namespace["build_cluster"] = build_cluster
    doctest_namespace["EventKind"] = EventKind
    doctest_namespace["SimEngine"] = SimEngine
    doctest_namespace["JobSpec"] = JobSpec
    doctest_namespace["JobType"] = JobType
    doctest_namespace["Scheduler"] = Scheduler
    doctest_namespace["builtin"] = builtin
    doctest_namespace["run_scenario"] = run_scenario
