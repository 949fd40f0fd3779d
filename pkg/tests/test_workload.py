from dataclasses import replace

import pytest

from spotsim.agent import AgentConfig
from spotsim.cluster import NORMAL
from spotsim.cluster import SPOT
from spotsim.cluster import ClusterShape
from spotsim.cluster import Layout
from spotsim.cluster import PreemptMode
from spotsim.exceptions import ConfigError
from spotsim.job import JobType
from spotsim.workload import CRON_SHAPE
from spotsim.workload import INTERACTIVE_AT
from spotsim.workload import Approach
from spotsim.workload import JobRequest
from spotsim.workload import Scenario
from spotsim.workload import Size
from spotsim.workload import batch_spec
from spotsim.workload import builtin
from spotsim.workload import builtin_scenarios
from spotsim.workload import fill_with_spot
from spotsim.workload import hazard_scenario
from spotsim.workload import make_job
from spotsim.workload import random_arrivals
from spotsim.workload import table1_matrix
from spotsim.workload import table1_skipped


@pytest.fixture()
def scenario():
    return Scenario(ClusterShape(64, 64), Approach.AUTO, JobType.TRIPLE, Size.LARGE)


class TestMakeJob:
    def test_triple_mode_packs_tasks_per_node(self):
        (spec,) = make_job(JobType.TRIPLE, 4096, tasks_per_node=64)

        assert spec.units == 64
        assert spec.qos == NORMAL
        assert spec.batch is None

    def test_individual_jobs_share_a_batch(self):
        specs = make_job(JobType.INDIVIDUAL, 4, t=300.5)

        assert len(specs) == 4
        assert {s.batch for s in specs} == {"interactive-300.5"}
        assert {s.total_tasks for s in specs} == {1}

    def test_batch_spec_keeps_individual_requests_whole(self):
        spec = batch_spec(JobType.INDIVIDUAL, 608, t=300.5)

        assert spec.total_tasks == 608
        assert spec.batch is None

    def test_tasks_per_node_only_applies_to_triple_mode(self):
        (spec,) = make_job(JobType.ARRAY, 10, tasks_per_node=5)

        assert spec.tasks_per_node is None


class TestFillWithSpot:
    def test_one_job_per_per_user_limit_group(self):
        timeline = fill_with_spot(CRON_SHAPE, 64, job_nodes=16)

        assert [s.at for s in timeline] == [1.0, 2.0, 3.0, 4.0]
        assert {s.specs[0].units for s in timeline} == {16}
        assert {s.specs[0].qos for s in timeline} == {SPOT}

    def test_defaults_to_the_per_user_limit(self):
        timeline = fill_with_spot(ClusterShape(64, 64), 64)

        (submission,) = timeline
        assert submission.specs[0].units == 64

    def test_empty_quota(self):
        assert fill_with_spot(ClusterShape(4, 4), 0) == []

    def test_quota_beyond_the_cluster(self):
        with pytest.raises(ConfigError):
            fill_with_spot(ClusterShape(4, 4), 5)


class TestScenario:
    def test_name_and_id(self, scenario):
        assert scenario.name == "auto-requeue-dual-triple-large"
        assert scenario.scenario_id == "auto-requeue-dual-triple-large-s0"
        assert replace(scenario, label="mine", seed=3).scenario_id == "mine-s3"

    def test_timeline_is_sorted(self, scenario):
        timeline = scenario.timeline()

        assert [s.at for s in timeline] == [1.0, INTERACTIVE_AT]
        assert timeline[-1].specs[0].total_tasks == 4096
        assert not timeline[-1].preempt_first

    def test_manual_submissions_preempt_first(self, scenario):
        timeline = replace(scenario, approach=Approach.MANUAL).timeline()

        assert timeline[-1].preempt_first

    def test_baseline_has_no_spot_fill(self, scenario):
        timeline = replace(scenario, approach=Approach.BASELINE).timeline()

        assert [s.at for s in timeline] == [INTERACTIVE_AT]

    def test_cron_leaves_the_reserve_out_of_the_fill(self):
        scenario = builtin("cron-requeue-dual-triple-large")

        assert scenario.reserve_nodes == 64
        assert scenario.spot_quota == 64
        assert scenario.interactive_times() == [300.5, 420.5]
        assert len(scenario.timeline()) == 4 + 2

    def test_extra_requests_join_the_timeline(self, scenario):
        extra = JobRequest(10.0, NORMAL, JobType.ARRAY, 8, run_seconds=30.0)

        timeline = replace(scenario, extra=(extra,)).timeline()

        assert [s.at for s in timeline] == [1.0, 10.0, INTERACTIVE_AT]

    @pytest.mark.parametrize(
        ("changes", "path"),
        [
            ({"mode": PreemptMode.GANG}, "scheduler.mode"),
            ({"mode": PreemptMode.SUSPEND}, "scheduler.mode"),
            ({"agent": AgentConfig()}, "agent"),
            ({"approach": Approach.CRON}, "agent"),
            ({"cluster": ClusterShape(19, 32)}, "workload.size"),
            ({"runs": -1}, "workload.runs"),
            ({"run_gap": 0}, "workload.run_gap"),
            ({"horizon": 300.0}, "workload.horizon"),
            ({"spot_job_nodes": 65}, "workload.spot_job_nodes"),
            ({"extra": (JobRequest(5000.0, NORMAL, JobType.ARRAY, 1),)}, "timeline.0"),
            (
                {"extra": (JobRequest(5.0, NORMAL, JobType.TRIPLE, 80, tasks_per_node=80),)},
                "timeline.0",
            ),
        ],
    )
    def test_validate(self, scenario, changes, path):
        with pytest.raises(ConfigError) as exc:
            replace(scenario, **changes).validate()
        assert exc.value.path == path

    def test_validate_returns_the_scenario(self, scenario):
        assert scenario.validate() is scenario


class TestMatrix:
    def test_cell_counts(self):
        matrix = table1_matrix()
        approaches = [s.approach for s in matrix]

        assert approaches.count(Approach.BASELINE) == 9
        assert approaches.count(Approach.AUTO) == 36
        assert approaches.count(Approach.MANUAL) == 3
        assert approaches.count(Approach.CRON) == 3

    def test_names_are_unique(self):
        assert len(builtin_scenarios()) == len(table1_matrix())

    def test_every_cell_is_valid(self):
        for scenario in table1_matrix():
            scenario.validate()

    def test_cells_fit_their_cluster(self):
        for scenario in table1_matrix():
            assert scenario.size.tasks <= scenario.cluster.total_cores
            if scenario.approach is not Approach.CRON and scenario.size is not Size.MEDIUM:
                assert scenario.cluster.total_cores == scenario.size.tasks

    def test_single_partition_cells(self):
        single = [s for s in table1_matrix() if s.partitions is Layout.SINGLE]

        assert len(single) == 18
        assert {s.approach for s in single} == {Approach.AUTO}

    def test_skipped_cells_are_explained(self):
        (skipped,) = table1_skipped()

        assert "requeue" in skipped.reason

    def test_unknown_builtin(self):
        with pytest.raises(ConfigError, match="Unknown builtin"):
            builtin("nope")


def test_hazard_scenario_runs_twice_within_one_interval():
    scenario = hazard_scenario(JobType.ARRAY)

    assert scenario.name == "hazard-array"
    assert scenario.interactive_times() == [300.5, 310.5]
    assert scenario.run_gap < scenario.agent.interval


class TestRandomArrivals:
    def test_same_seed_same_timeline(self):
        shape = ClusterShape(19, 32)

        assert random_arrivals(3, shape) == random_arrivals(3, shape)
        assert random_arrivals(3, shape) != random_arrivals(4, shape)

    def test_interactive_jobs_fit_the_reserve(self):
        requests = random_arrivals(11, ClusterShape(19, 32), reserve_nodes=4)

        normal = [r for r in requests if r.qos == NORMAL]
        assert len(normal) == 6
        assert all(1 <= r.total_tasks // r.tasks_per_node <= 4 for r in normal)
        assert [r.at for r in requests] == sorted(r.at for r in requests)
        assert all(0 <= r.at <= 900 for r in requests)
