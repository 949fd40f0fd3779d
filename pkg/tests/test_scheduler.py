import pytest

from spotsim.cluster import SPOT
from spotsim.cluster import ClusterConfig
from spotsim.cluster import Layout
from spotsim.cluster import PreemptMode
from spotsim.cluster import build_cluster
from spotsim.engine import EventKind
from spotsim.engine import SimEngine
from spotsim.exceptions import ConfigError
from spotsim.exceptions import InsufficientEvenAfterPreemption
from spotsim.exceptions import NotRunning
from spotsim.exceptions import NotSpot
from spotsim.exceptions import SpotSimError
from spotsim.exceptions import UnknownJob
from spotsim.exceptions import ValidationError
from spotsim.job import BACKFILL
from spotsim.job import MAIN
from spotsim.job import JobSpec
from spotsim.job import JobState
from spotsim.job import JobType
from spotsim.metrics import Origin
from spotsim.metrics import scheduling_time
from spotsim.preemption import Need
from spotsim.scheduler import CostModel
from spotsim.scheduler import Scheduler
from spotsim.scheduler import SchedulerConfig


def fill(sched, triple, jobs, nodes=1, run=1000.0):
    "Start ``jobs`` spot jobs one second apart and let them dispatch."
    ids = [
        sched.submit(triple(nodes, qos=SPOT, user="sam", t=float(i), run=run)) for i in range(jobs)
    ]
    sched.engine.run_until(jobs + 1.0)
    return ids


class TestCostModel:
    def test_defaults_are_valid(self):
        CostModel().validate()

    @pytest.mark.parametrize(
        ("kwargs", "path"),
        [
            ({"c_cleanup": -1}, "cost_model.c_cleanup"),
            ({"t_main": 0}, "cost_model.t_main"),
            ({"t_backfill": 2.0}, "cost_model.t_backfill"),
            ({"main_depth": 0}, "cost_model.main_depth"),
        ],
    )
    def test_invalid(self, kwargs, path):
        with pytest.raises(ConfigError) as exc:
            CostModel(**kwargs).validate()
        assert exc.value.path == path

    def test_unit_cost(self):
        cost = CostModel()

        assert cost.unit_cost(JobType.TRIPLE) == cost.c_node_dispatch
        assert cost.unit_cost(JobType.ARRAY) == cost.c_task_dispatch
        assert cost.unit_cost(JobType.INDIVIDUAL) == cost.c_task_dispatch


def test_only_youngest_first_order_is_supported():
    with pytest.raises(ConfigError):
        SchedulerConfig(preempt_order="oldest_first").validate()


class TestSubmit:
    def test_individual_requests_expand_into_a_batch(self, make_scheduler):
        sched = make_scheduler()
        spec = JobSpec("amy", "normal", JobType.INDIVIDUAL, 3, 60.0)

        first = sched.submit(spec)

        assert first == 0
        assert [job.spec.total_tasks for job in sched.jobs.values()] == [1, 1, 1]
        assert {job.key for job in sched.jobs.values()} == {"batch-0"}

    def test_recognition_delay(self, make_scheduler, triple):
        sched = make_scheduler()

        job_id = sched.submit(triple(1, t=5.0))

        assert sched.jobs[job_id].recognized_at == pytest.approx(5.01)

    def test_job_larger_than_its_partition(self, make_scheduler, triple):
        with pytest.raises(ValidationError, match="more than partition"):
            make_scheduler().submit(triple(5))

    def test_submit_event_records_the_measurement_keys(self, make_scheduler):
        sched = make_scheduler()
        spec = JobSpec("amy", "normal", JobType.INDIVIDUAL, 2, 60.0, submit_at=1.0, batch="b")
        sched.engine.schedule_event(1.0, EventKind.SUBMIT, {"specs": (spec,)})

        sched.engine.run_until(1.0)

        (entry,) = sched.engine.log.of_kind(EventKind.SUBMIT)
        assert entry.delta["units"] == {"b": 2}
        assert entry.delta["job_ids"] == [0, 1]
        assert entry.delta["recognized_at"] == pytest.approx(1.01)


class TestMainCycle:
    def test_units_dispatch_serially(self, make_scheduler, triple):
        sched = make_scheduler()
        job_id = sched.submit(triple(2))

        sched.engine.run_until(1)

        job = sched.jobs[job_id]
        assert job.state is JobState.RUNNING
        assert job.dispatched_by == MAIN
        assert job.dispatch_times == pytest.approx([0.019, 0.026])
        assert job.end_at == pytest.approx(100.026)
        assert sched.busy_until == pytest.approx(0.026)

    def test_depth_limit_leaves_a_backlog_for_the_next_pass(self, make_scheduler):
        sched = make_scheduler(nodes=4, cores=64)
        job_id = sched.submit(JobSpec("amy", "normal", JobType.ARRAY, 100, 60.0))

        sched.engine.run_until(5)

        main = [p for p in sched.passes if p.by == MAIN]
        assert [sum(d.units for d in p.dispatches) for p in main] == [64, 36]
        assert main[1].now == pytest.approx(2.01)
        assert len(sched.jobs[job_id].dispatch_times) == 100

    def test_blocked_head_stops_its_partition(self, make_scheduler, triple):
        sched = make_scheduler()
        big = sched.submit(triple(3))
        blocked = sched.submit(triple(2))
        small = sched.submit(triple(1))

        sched.engine.run_until(10)

        assert sched.jobs[big].state is JobState.RUNNING
        assert sched.jobs[blocked].state is JobState.PENDING
        assert sched.jobs[small].state is JobState.PENDING
        assert {p.blocked for p in sched.passes} == {blocked}

    def test_passes_repeat_while_work_is_queued(self, make_scheduler, triple):
        sched = make_scheduler()
        sched.submit(triple(4))
        sched.submit(triple(1))

        sched.engine.run_until(7)

        assert [p.now for p in sched.passes] == pytest.approx([0.01, 2.01, 4.01, 6.01])

    def test_completion_triggers_a_pass(self, make_scheduler, triple):
        sched = make_scheduler()
        first = sched.submit(triple(4, run=10.0))
        second = sched.submit(triple(4))

        sched.engine.run_until(11)

        end = sched.jobs[first].end_at
        assert sched.jobs[first].state is JobState.COMPLETED
        assert sched.jobs[second].dispatch_times[0] == pytest.approx(end + 0.002 + 0.007)

    def test_merged_queue_walks_known_spot_jobs(self, triple):
        def first_dispatch(layout):
            cluster = build_cluster(ClusterConfig.homogeneous(4, 4, layout=layout))
            sched = Scheduler(SimEngine(), cluster)
            for i in range(3):
                sched.submit(triple(1, qos=SPOT, user="sam", t=float(i), run=1000.0))
            job_id = sched.submit(triple(1, t=10.0))
            sched.engine.run_until(11)
            return sched.jobs[job_id].dispatch_times[0]

        assert first_dispatch(Layout.DUAL) == pytest.approx(10.019)
        assert first_dispatch(Layout.SINGLE) == pytest.approx(10.025)


class TestBackfill:
    @pytest.fixture()
    def blocked(self, make_scheduler, triple):
        sched = make_scheduler()
        sched.start(0.0)
        running = sched.submit(triple(2, run=100.0))
        head = sched.submit(triple(4))
        return sched, running, head

    def test_short_job_backfills_ahead_of_the_reservation(self, blocked, triple):
        sched, running, head = blocked
        short = sched.submit(triple(1, run=50.0))

        sched.engine.run_until(31)

        job = sched.jobs[short]
        assert job.dispatched_by == BACKFILL
        assert 30 < job.dispatch_times[0] < 31
        assert sched.jobs[head].state is JobState.PENDING

    def test_long_job_would_delay_the_reservation(self, blocked, triple):
        sched, running, head = blocked
        long = sched.submit(triple(1, run=1000.0))

        sched.engine.run_until(101)

        assert sched.jobs[long].state is JobState.PENDING
        assert sched.jobs[head].dispatched_by == MAIN
        assert sched.jobs[head].dispatch_times[0] > sched.jobs[running].end_at

    def test_reservation_is_the_earliest_end_time(self, blocked):
        sched, running, head = blocked
        sched.engine.run_until(1)

        shadow = sched.reservation(sched.jobs[head], 1.0, sched.cluster.partitions["interactive"])

        assert shadow.start == sched.jobs[running].end_at
        assert shadow.nodes == frozenset({0, 1, 2, 3})


class TestQuota:
    def test_spot_jobs_beyond_the_quota_wait(self, make_scheduler, triple):
        sched = make_scheduler()
        sched.cluster.qos[SPOT].max_tres_per_user = 1
        placed = sched.submit(triple(1, qos=SPOT, user="sam"))
        waiting = sched.submit(triple(1, qos=SPOT, user="sam"))

        sched.engine.run_until(1)

        assert sched.jobs[placed].state is JobState.RUNNING
        assert sched.jobs[waiting].state is JobState.PENDING
        assert sched.cluster.spot_nodes() == 1

    def test_quota_does_not_apply_to_normal_jobs(self, make_scheduler, triple):
        sched = make_scheduler()
        sched.cluster.qos[SPOT].max_tres_per_user = 0
        job_id = sched.submit(triple(4))

        sched.engine.run_until(1)

        assert sched.jobs[job_id].state is JobState.RUNNING


class TestRequeueAndCancel:
    def test_requeue_keeps_the_recognition_time(self, make_scheduler, triple):
        sched = make_scheduler()
        (job_id,) = fill(sched, triple, 1)

        job = sched.requeue(job_id, now=2.0)

        assert job.state is JobState.PENDING
        assert job.requeue_count == 1
        assert job.recognized_at == pytest.approx(0.01)
        assert job in sched.queued(SPOT)
        assert sched.cluster.draining == {0: pytest.approx(6.5)}

    def test_events_of_a_previous_run_are_stale(self, make_scheduler, triple):
        sched = make_scheduler()
        job_id = sched.submit(triple(2, qos=SPOT, user="sam"))
        sched.engine.run_until(0.01)

        sched.requeue(job_id, now=0.01)
        sched.engine.run_until(1)

        dispatched = sched.engine.log.of_kind(EventKind.TASK_DISPATCHED)
        assert [entry.delta for entry in dispatched] == [{"stale": True}, {"stale": True}]

    def test_cancel_is_final(self, make_scheduler, triple):
        sched = make_scheduler()
        (job_id,) = fill(sched, triple, 1)

        job = sched.cancel(job_id, now=2.0, drain=0.0)

        assert job.state is JobState.CANCELLED
        assert sched.queued() == []
        assert sched.cluster.idle_nodes(2.0) == 4

    def test_normal_jobs_are_not_preemptable(self, make_scheduler, triple):
        sched = make_scheduler()
        job_id = sched.submit(triple(1))
        sched.engine.run_until(1)

        with pytest.raises(NotSpot):
            sched.requeue(job_id, now=1.0)

    def test_pending_jobs_are_not_running(self, make_scheduler, triple):
        sched = make_scheduler()
        job_id = sched.submit(triple(1, qos=SPOT, user="sam"))

        with pytest.raises(NotRunning):
            sched.cancel(job_id, now=0.0)

    def test_unknown_job(self, make_scheduler):
        with pytest.raises(UnknownJob):
            make_scheduler().requeue(99, now=0.0)


class TestAutoPreempt:
    def test_disabled_by_default(self, make_scheduler, triple):
        sched = make_scheduler()
        job_id = sched.submit(triple(1))

        with pytest.raises(SpotSimError, match="disabled"):
            sched.auto_preempt(Need(nodes=1), 0.0, sched.jobs[job_id])

    def test_youngest_spot_job_makes_room(self, make_scheduler, triple):
        sched = make_scheduler(auto_preempt=True)
        sched.start(0.0)
        old, young = fill(sched, triple, 2, nodes=2)
        job_id = sched.submit(triple(2, t=10.0))

        sched.engine.run_until(61)

        job = sched.jobs[job_id]
        assert job.victims == [young]
        assert job.preempt_started_at == pytest.approx(10.012)
        assert sched.jobs[young].state is JobState.PENDING
        assert sched.jobs[young].requeue_count == 1
        assert sched.jobs[old].state is JobState.RUNNING
        assert job.dispatched_by == BACKFILL
        assert 60 < job.dispatch_times[0] < 61

    def test_requeued_jobs_keep_their_age_as_victims(self, make_scheduler, triple):
        sched = make_scheduler(nodes=3, auto_preempt=True)
        sched.start(0.0)
        old, _mid, young = fill(sched, triple, 3)
        sched.requeue(old, now=4.0)
        sched.engine.run_until(100)
        assert sched.jobs[old].state is JobState.RUNNING
        assert sched.jobs[old].dispatch_times[-1] > 8.5

        job_id = sched.submit(triple(1, t=100.0))
        sched.engine.run_until(100.5)

        assert sched.jobs[job_id].victims == [young]

    def test_preempted_nodes_are_held_for_the_preemptor(self, make_scheduler, triple):
        sched = make_scheduler(auto_preempt=True)
        _old, young = fill(sched, triple, 2, nodes=2)
        job_id = sched.submit(triple(2, t=10.0))

        sched.engine.run_until(11)

        assert sched.cluster.holds_of(job_id) == [2, 3]
        assert sched.jobs[job_id].awaiting_preemption

    def test_cancel_mode(self, triple):
        cfg = ClusterConfig.homogeneous(4, 4, preempt_mode=PreemptMode.CANCEL)
        sched = Scheduler(
            SimEngine(), build_cluster(cfg), config=SchedulerConfig(auto_preempt=True)
        )
        _old, young = fill(sched, triple, 2, nodes=2)
        sched.submit(triple(2, t=10.0))

        sched.engine.run_until(11)

        assert sched.jobs[young].state is JobState.CANCELLED
        assert sched.queued(SPOT) == []

    def test_not_enough_spot_jobs(self, make_scheduler, triple):
        sched = make_scheduler(auto_preempt=True)
        fill(sched, triple, 1)
        job_id = sched.submit(triple(1, t=3.0))

        with pytest.raises(InsufficientEvenAfterPreemption):
            sched.auto_preempt(Need(nodes=2), 3.0, sched.jobs[job_id])


def test_requeue_ahead_times_the_submission_from_the_preemption(make_scheduler, triple):
    sched = make_scheduler()
    fill(sched, triple, 4)
    spec = triple(2, t=10.0)
    sched.engine.schedule_event(
        10.0, EventKind.SUBMIT, {"specs": (spec,), "preempt_first": True}
    )

    sched.engine.run_until(20)

    (entry,) = sched.engine.log.of_kind(EventKind.SUBMIT)
    assert entry.delta["victims"] == [3, 2]
    assert entry.delta["preempt_start"] == 10.0
    done = sched.engine.log.of_kind(EventKind.PREEMPTION_DONE)
    assert [e.event.payload["source"] for e in done] == ["manual", "manual"]
    assert scheduling_time(sched.engine.log, "4", Origin.PREEMPT_START) == pytest.approx(6.026)
    assert scheduling_time(sched.engine.log, "4") == pytest.approx(6.016)
