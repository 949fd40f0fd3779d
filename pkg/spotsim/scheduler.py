"""
Queue management, main and backfill cycles, dispatch and automatic preemption.

Every pass runs on one serial dispatch pipeline: a pass starts at
``max(now, busy_until)``, each scanned job costs ``c_job_overhead`` and each
dispatched unit costs ``c_node_dispatch`` (triple-mode) or
``c_task_dispatch`` (array and individual tasks).
"""

import logging
import math
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from dataclasses import replace
from itertools import count
from typing import TYPE_CHECKING
from typing import Any
from typing import Dict
from typing import FrozenSet
from typing import Iterator
from typing import List
from typing import Optional
from typing import Sequence
from typing import Set

from statemachine.exceptions import TransitionNotAllowed

from .cluster import SPOT
from .cluster import Insufficient
from .cluster import PartitionConfig
from .cluster import Placement
from .cluster import PreemptMode
from .engine import Event
from .engine import EventKind
from .exceptions import ConfigError
from .exceptions import InsufficientEvenAfterPreemption
from .exceptions import NotRunning
from .exceptions import SpotSimError
from .exceptions import UnknownJob
from .exceptions import ValidationError
from .i18n import _
from .job import BACKFILL
from .job import MAIN
from .job import JobRecord
from .job import JobSpec
from .job import JobState
from .job import JobType
from .job import nodes_for
from .preemption import Candidate
from .preemption import Need
from .preemption import minimal_prefix
from .preemption import select_lifo_victims
from .preemption import youngest_first

if TYPE_CHECKING:
    from .cluster import ClusterState
    from .engine import SimEngine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostModel:
    """Latencies of the simulated scheduler, in seconds.

    The defaults are calibrated so that 64 triple-mode node units dispatch in
    about half a second, while array and individual tasks pay per task.

    >>> CostModel().c_node_dispatch * 64
    0.448

    """

    c_recognize: float = 0.01
    c_job_overhead: float = 0.002
    c_task_dispatch: float = 0.012
    c_node_dispatch: float = 0.007
    c_preempt_signal: float = 0.05
    c_cleanup: float = 30.0
    c_requeue: float = 4.5
    t_main: float = 2.0
    t_backfill: float = 30.0
    main_depth: int = 64

    def validate(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"cost_model.{f.name}", _("must be >= 0."))
        if self.t_main <= 0:
            raise ConfigError("cost_model.t_main", _("must be positive."))
        if self.t_backfill <= self.t_main:
            raise ConfigError("cost_model.t_backfill", _("must be greater than t_main."))
        if self.main_depth < 1:
            raise ConfigError("cost_model.main_depth", _("must be at least 1."))

    def unit_cost(self, job_type: JobType) -> float:
        if job_type is JobType.TRIPLE:
            return self.c_node_dispatch
        return self.c_task_dispatch


@dataclass(frozen=True)
class SchedulerConfig:
    auto_preempt: bool = False
    preempt_order: str = "youngest_first"
    per_user_quota: bool = False

    def validate(self):
        if self.preempt_order != "youngest_first":
            raise ConfigError(
                "scheduler.preempt_order", _("Only 'youngest_first' is supported.")
            )


@dataclass(frozen=True)
class Dispatch:
    job_id: int
    units: int
    first_at: float
    last_at: float
    by: str


@dataclass(frozen=True)
class QuotaBlocked:
    quota: int
    new_nodes: int


@dataclass(frozen=True)
class Shadow:
    "Earliest start of the blocked head job and the nodes it will take then."

    start: float
    nodes: FrozenSet[int]


@dataclass
class CyclePass:
    by: str
    now: float
    dispatches: List[Dispatch] = field(default_factory=list)
    placed: List[int] = field(default_factory=list)
    spot_placed: List[int] = field(default_factory=list)
    victims: List[int] = field(default_factory=list)
    blocked: Optional[int] = None
    busy_until: float = 0.0

    def delta(self) -> Dict[str, Any]:
        delta: Dict[str, Any] = {
            "placed": len(self.placed),
            "units": sum(d.units for d in self.dispatches),
            "busy_until": self.busy_until,
        }
        if self.spot_placed:
            delta["spot_placed"] = self.spot_placed
        if self.blocked is not None:
            delta["blocked"] = self.blocked
        if self.victims:
            delta["victims"] = self.victims
        return delta


class Scheduler:
    """The simulated batch scheduler.

    Registers its handlers on ``engine`` at construction; call :meth:`start` to
    begin the periodic backfill cycle. Main cycles are requested on demand.
    """

    def __init__(
        self,
        engine: "SimEngine",
        cluster: "ClusterState",
        cost: "CostModel | None" = None,
        config: "SchedulerConfig | None" = None,
    ):
        self.engine = engine
        self.cluster = cluster
        self.cost = cost or CostModel()
        self.config = config or SchedulerConfig()
        self.cost.validate()
        self.config.validate()

        self.jobs: Dict[int, JobRecord] = {}
        self.busy_until = 0.0
        self.passes: List[CyclePass] = []
        self._ids = count()
        self._batches = count()
        self._main_pending: Set[float] = set()
        self._partitions: List[PartitionConfig] = sorted(
            cluster.partitions.values(),
            key=lambda p: (-max(cluster.qos[q].priority for q in p.admitted_qos), p.name),
        )
        self._route = {q: p for p in self._partitions for q in p.admitted_qos}
        self._queues: Dict[str, List[JobRecord]] = {p.name: [] for p in self._partitions}
        self._dirty: Set[str] = set()
        self._spot_active: Set[int] = set()

        engine.on(EventKind.SUBMIT, self._on_submit)
        engine.on(EventKind.MAIN_CYCLE, self._on_main_cycle)
        engine.on(EventKind.BACKFILL_CYCLE, self._on_backfill_cycle)
        engine.on(EventKind.TASK_DISPATCHED, self._on_task_dispatched)
        engine.on(EventKind.JOB_COMPLETED, self._on_job_completed)
        engine.on(EventKind.PREEMPTION_DONE, self._on_preemption_done)

    def __repr__(self):
        return f"{type(self).__name__}(jobs={len(self.jobs)}, busy_until={self.busy_until!r})"

    def start(self, at: float = 0.0):
        self.engine.schedule_event(at, EventKind.BACKFILL_CYCLE)

    # Submission

    def submit(self, spec: JobSpec) -> int:
        """Queue ``spec`` and return its job id.

        An individual request for ``n`` tasks becomes ``n`` one-task jobs sharing a
        batch tag; their ids are consecutive and the first one is returned.
        """
        return self._submit(spec)[0]

    def _submit(self, spec: JobSpec) -> List[int]:
        spec.validate(self.cluster.max_cores)
        partition = self._route.get(spec.qos)
        if partition is None:
            raise ValidationError(_("No partition admits QoS {!r}.").format(spec.qos))
        self._check_fits(spec, partition)
        if spec.job_type is JobType.INDIVIDUAL and spec.total_tasks > 1:
            batch = spec.batch or f"batch-{next(self._batches)}"
            one = replace(spec, total_tasks=1, batch=batch)
            return [self._enqueue(one) for _task in range(spec.total_tasks)]
        return [self._enqueue(spec)]

    def _check_fits(self, spec: JobSpec, partition: PartitionConfig):
        nodes = [self.cluster.nodes[n] for n in partition.node_ids]
        if spec.job_type is JobType.TRIPLE:
            fits = spec.units <= len(nodes)
        else:
            fits = spec.total_tasks * spec.cores_per_task <= sum(n.cores for n in nodes)
        if not fits:
            raise ValidationError(
                _("Job needs more than partition {!r} holds.").format(partition.name)
            )

    def _enqueue(self, spec: JobSpec) -> int:
        job_id = next(self._ids)
        record = JobRecord(job_id, spec, recognized_at=spec.submit_at + self.cost.c_recognize)
        self.jobs[job_id] = record
        if record.spot:
            self._spot_active.add(job_id)
        self._requeue_in_partition(record)
        self._request_main(record.recognized_at)
        return job_id

    def _requeue_in_partition(self, job: JobRecord, fresh: bool = True):
        name = self._route[job.spec.qos].name
        queue = self._queues[name]
        if fresh or not any(queued is job for queued in queue):
            queue.append(job)
        self._dirty.add(name)

    def _on_submit(self, event: Event):
        now = event.fire_at
        specs: Sequence[JobSpec] = event.payload["specs"]
        preempt_first = bool(event.payload.get("preempt_first"))
        victims = self.requeue_ahead(specs, now) if preempt_first else []
        ids: List[int] = []
        for spec in specs:
            ids.extend(self._submit(spec))
        units: Dict[str, int] = {}
        tasks: Dict[str, int] = {}
        for job_id in ids:
            job = self.jobs[job_id]
            units[job.key] = units.get(job.key, 0) + job.units
            tasks[job.key] = tasks.get(job.key, 0) + job.spec.total_tasks
            if preempt_first:
                job.preempt_started_at = now
                job.victims = list(victims)
        delta: Dict[str, Any] = {
            "job_ids": [ids[0], ids[-1]],
            "recognized_at": self.jobs[ids[0]].recognized_at,
            "units": units,
            "tasks": tasks,
        }
        if preempt_first:
            delta["preempt_start"] = now
            delta["victims"] = victims
        return delta

    # Cycles

    def _request_main(self, at: float):
        "A request restarts the main cadence at ``at``; later pending passes are dropped."
        at = max(at, self.engine.clock)
        if at in self._main_pending:
            return
        self._main_pending = {t for t in self._main_pending if t < at}
        self._main_pending.add(at)
        self.engine.schedule_event(at, EventKind.MAIN_CYCLE)

    def _on_main_cycle(self, event: Event):
        if event.fire_at not in self._main_pending:
            return {"stale": True}
        self._main_pending.discard(event.fire_at)
        return self._main_pass(event.fire_at).delta()

    def _on_backfill_cycle(self, event: Event):
        return self._backfill_pass(event.fire_at).delta()

    def main_cycle(self, now: float) -> List[Dispatch]:
        return self._main_pass(now).dispatches

    def backfill_cycle(self, now: float) -> List[Dispatch]:
        return self._backfill_pass(now).dispatches

    def _main_pass(self, now: float) -> CyclePass:
        """Scan queues in priority order and stop each partition at its first blocked job.

        At most ``main_depth`` units are dispatched per pass; a placed job keeps its
        remaining units as a backlog for the next passes.
        """
        self.cluster.expire_drains(now)
        cycle = CyclePass(MAIN, now)
        cursor = max(now, self.busy_until)
        budget = self.cost.main_depth
        for partition in self._partitions:
            if budget <= 0:
                break
            cursor += self._merged_queue_charge(partition)
            for job in self._ready(partition, now):
                if budget <= 0:
                    break
                cursor += self.cost.c_job_overhead
                if not job.backlog:
                    if job.awaiting_preemption:
                        self._mark_blocked(cycle, job)
                        break
                    outcome = self._place(job, now, partition)
                    if isinstance(outcome, QuotaBlocked):
                        continue
                    if isinstance(outcome, Insufficient):
                        self._mark_blocked(cycle, job)
                        if self.config.auto_preempt and not job.spot:
                            cursor = self._preempt_for(job, outcome, cursor, cycle)
                        break
                    self._mark_placed(cycle, job)
                units = min(job.backlog, budget)
                cursor = self._dispatch_into(cycle, job, units, cursor)
                budget -= units
        self._close_pass(cycle, cursor)
        if self._has_queued() and not any(t > now for t in self._main_pending):
            self._request_main(now + self.cost.t_main)
        return cycle

    def _backfill_pass(self, now: float) -> CyclePass:
        """EASY backfill: the first blocked job gets a reservation, later jobs start
        only when they would not delay it. Backlogs are drained without a depth limit.
        """
        self.cluster.expire_drains(now)
        cycle = CyclePass(BACKFILL, now)
        cursor = max(now, self.busy_until)
        shadow: Optional[Shadow] = None
        for partition in self._partitions:
            cursor += self._merged_queue_charge(partition)
            for job in self._ready(partition, now):
                cursor += self.cost.c_job_overhead
                if not job.backlog:
                    exclude: FrozenSet[int] = frozenset()
                    if shadow is not None and now + job.spec.run_seconds > shadow.start:
                        exclude = shadow.nodes
                    outcome = self._place(job, now, partition, exclude)
                    if isinstance(outcome, QuotaBlocked):
                        continue
                    if isinstance(outcome, Insufficient):
                        if job.awaiting_preemption and not self._preemption_in_flight(job, now):
                            self._drop_holds(job)
                        if shadow is None:
                            self._mark_blocked(cycle, job)
                            shadow = self.reservation(job, now, partition)
                        continue
                    self._mark_placed(cycle, job)
                cursor = self._dispatch_into(cycle, job, job.backlog, cursor)
        self._close_pass(cycle, cursor)
        self.engine.schedule_event(now + self.cost.t_backfill, EventKind.BACKFILL_CYCLE)
        return cycle

    def _close_pass(self, cycle: CyclePass, cursor: float):
        self.busy_until = cursor
        cycle.busy_until = cursor
        self._compact()
        self.passes.append(cycle)
        logger.debug(
            "%s pass at %.6f: placed=%d units=%d blocked=%s",
            cycle.by,
            cycle.now,
            len(cycle.placed),
            sum(d.units for d in cycle.dispatches),
            cycle.blocked,
        )

    def _mark_blocked(self, cycle: CyclePass, job: JobRecord):
        if cycle.blocked is None:
            cycle.blocked = job.job_id

    def _mark_placed(self, cycle: CyclePass, job: JobRecord):
        cycle.placed.append(job.job_id)
        if job.spot:
            cycle.spot_placed.append(job.job_id)

    def _dispatch_into(self, cycle: CyclePass, job: JobRecord, units: int, cursor: float) -> float:
        dispatch = self.dispatch(job, units, cursor, cycle.by)
        cycle.dispatches.append(dispatch)
        return dispatch.last_at

    def _rank(self, job: JobRecord):
        return (-self.cluster.qos[job.spec.qos].priority, job.recognized_at, job.job_id)

    def _ready(self, partition: PartitionConfig, now: float) -> Iterator[JobRecord]:
        queue = self._queues[partition.name]
        if partition.name in self._dirty:
            queue.sort(key=self._rank)
            self._dirty.discard(partition.name)
        return (job for job in queue if job.recognized_at <= now and job.queued)

    def _compact(self):
        for name, queue in self._queues.items():
            if any(not job.queued for job in queue):
                self._queues[name] = [job for job in queue if job.queued]

    def _has_queued(self) -> bool:
        return any(self._queues.values())

    def _merged_queue_charge(self, partition: PartitionConfig) -> float:
        "A queue shared by both classes walks every known spot job on each pass."
        if not partition.merged or SPOT not in partition.admitted_qos:
            return 0.0
        return self.cost.c_job_overhead * len(self._spot_active)

    def queued(self, partition: Optional[str] = None) -> List[JobRecord]:
        names = [partition] if partition else list(self._queues)
        return [job for name in names for job in self._queues[name] if job.queued]

    # Placement and dispatch

    def _place(
        self,
        job: JobRecord,
        now: float,
        partition: PartitionConfig,
        exclude: FrozenSet[int] = frozenset(),
    ) -> "Placement | Insufficient | QuotaBlocked":
        outcome = self.cluster.try_place(
            job.spec.request,
            now,
            holder=job.job_id,
            within=partition.node_ids,
            exclude=exclude,
        )
        if isinstance(outcome, Insufficient):
            return outcome
        if job.spot:
            blocked = self._quota_check(job, outcome)
            if blocked is not None:
                return blocked
        self.cluster.commit(job.job_id, outcome, now, user=job.spec.user, spot=job.spot)
        job.backlog = job.units
        job.awaiting_preemption = False
        return outcome

    def _quota_check(self, job: JobRecord, placement: Placement) -> Optional[QuotaBlocked]:
        quota = self.cluster.qos[SPOT].max_tres_per_user
        if quota is None:
            return None
        user = job.spec.user if self.config.per_user_quota else None
        occupied = self.cluster.spot_node_ids(user)
        new_nodes = len(set(placement.node_ids) - occupied)
        if len(occupied) + new_nodes > quota:
            return QuotaBlocked(quota=quota, new_nodes=new_nodes)
        return None

    def dispatch(self, job: JobRecord, units: int, at: float, by: str = MAIN) -> Dispatch:
        """Start ``units`` of a placed job serially after ``at``.

        Unit ``i`` (1-based) is dispatched at ``at + i * c_unit``. When the last unit
        goes out, completion is scheduled ``run_seconds`` later.
        """
        units = min(units, job.backlog)
        c_unit = self.cost.unit_cost(job.spec.job_type)
        first = at + c_unit
        t = at
        for _unit in range(units):
            t += c_unit
            unit = job.units - job.backlog
            job.backlog -= 1
            job.dispatch_times.append(t)
            self.engine.schedule_event(
                t,
                EventKind.TASK_DISPATCHED,
                {
                    "job_id": job.job_id,
                    "key": job.key,
                    "unit": unit,
                    "generation": job.requeue_count,
                    "by": by,
                },
            )
        if job.state is JobState.PENDING:
            job.send("start")
        job.note_dispatch(by)
        if job.backlog == 0:
            job.end_at = t + job.spec.run_seconds
            self.engine.schedule_event(
                job.end_at,
                EventKind.JOB_COMPLETED,
                {"job_id": job.job_id, "generation": job.requeue_count},
            )
        return Dispatch(job.job_id, units, first, t, by)

    def _on_task_dispatched(self, event: Event):
        job = self.jobs[event.payload["job_id"]]
        if event.payload["generation"] != job.requeue_count or job.state is not JobState.RUNNING:
            return {"stale": True}
        return None

    def _on_job_completed(self, event: Event):
        job = self.jobs[event.payload["job_id"]]
        if event.payload["generation"] != job.requeue_count or job.state is not JobState.RUNNING:
            return {"stale": True}
        self.cluster.release(job.job_id, event.fire_at)
        job.send("complete")
        self._spot_active.discard(job.job_id)
        if self._has_queued():
            self._request_main(event.fire_at)
        return {"state": job.state.value}

    # Reservations

    def reservation(self, job: JobRecord, now: float, partition: PartitionConfig) -> Shadow:
        """Replay known end times and drain expiries until ``job`` fits."""
        scratch = self.cluster.copy()
        ends = sorted(
            (record.end_at, record.job_id)
            for record in self.jobs.values()
            if record.state is JobState.RUNNING
            and record.end_at is not None
            and record.job_id in scratch.allocations
        )
        times = sorted({end for end, _job_id in ends} | set(scratch.draining.values()))
        released = 0
        for t in times:
            if t <= now:
                continue
            while released < len(ends) and ends[released][0] <= t:
                scratch.release(ends[released][1], t)
                released += 1
            outcome = scratch.try_place(
                job.spec.request, t, holder=job.job_id, within=partition.node_ids
            )
            if isinstance(outcome, Placement):
                return Shadow(t, frozenset(outcome.node_ids))
        return Shadow(math.inf, frozenset())

    # Preemption

    def running_spot(self) -> List[Candidate]:
        "Running spot jobs that can still be chosen as victims."
        candidates = []
        for job_id in sorted(self._spot_active):
            job = self.jobs[job_id]
            if job.state is not JobState.RUNNING or job.preempting:
                continue
            if job_id not in self.cluster.allocations:
                continue
            nodes, cores = self.cluster.spot_footprint(job_id)
            candidates.append(Candidate(job_id, job.recognized_at, nodes, cores))
        return candidates

    def pending_normal_nodes(self, now: float) -> int:
        "Node demand of recognized normal jobs not yet placed."
        specs = [
            job.spec
            for job in self.queued()
            if not job.spot
            and job.state is JobState.PENDING
            and not job.backlog
            and job.recognized_at <= now
        ]
        return nodes_for(specs, self.cluster.max_cores)

    def _preempt_for(
        self, job: JobRecord, outcome: Insufficient, cursor: float, cycle: CyclePass
    ) -> float:
        if job.spec.request.node_exclusive:
            need = Need(nodes=outcome.deficit_nodes)
        else:
            need = Need(cores=outcome.deficit_cores)
        try:
            victims = self.auto_preempt(need, cursor, job)
        except InsufficientEvenAfterPreemption as err:
            logger.debug("%s", err)
            return cursor
        cycle.victims.extend(victims)
        return cursor + len(victims) * self.cost.c_preempt_signal

    def auto_preempt(self, needed: Need, now: float, preemptor: JobRecord) -> List[int]:
        """Signal the youngest running spot jobs until ``needed`` is covered.

        Victims are signalled one after another; each PreemptionDone releases the
        victim's nodes with a ``c_cleanup`` drain and holds them for ``preemptor``.
        """
        if not self.config.auto_preempt:
            raise SpotSimError(_("Automatic preemption is disabled."))
        if preemptor.spot or not needed:
            return []
        chosen = minimal_prefix(youngest_first(self.running_spot()), needed)
        if chosen is None:
            raise InsufficientEvenAfterPreemption(preemptor.job_id, needed)
        mode = PreemptMode(self.cluster.qos[SPOT].preempt_mode)
        ids = [c.job_id for c in chosen]
        self.signal_preemption(
            ids,
            now,
            mode=mode,
            drain=self.cost.c_cleanup,
            source="scheduler",
            preemptor=preemptor.job_id,
        )
        preemptor.awaiting_preemption = True
        preemptor.preempt_started_at = now
        preemptor.victims.extend(ids)
        logger.debug("job %s preempts %s at %.6f", preemptor.job_id, ids, now)
        return ids

    def requeue_ahead(self, specs: Sequence[JobSpec], now: float) -> List[int]:
        """Privileged requeue of the newest spot jobs so ``specs`` fit once drained."""
        deficit = max(0, nodes_for(specs, self.cluster.max_cores) - self.cluster.idle_nodes(now))
        ids = select_lifo_victims(self.running_spot(), deficit)
        self.signal_preemption(
            ids, now, mode=PreemptMode.REQUEUE, drain=self.cost.c_requeue, source="manual"
        )
        return ids

    def signal_preemption(
        self,
        ids: Sequence[int],
        now: float,
        mode: PreemptMode,
        drain: float,
        source: str,
        preemptor: Optional[int] = None,
    ):
        for i, job_id in enumerate(ids, start=1):
            self.jobs[job_id].preempting = True
            payload = {"job_id": job_id, "mode": mode.value, "drain": drain, "source": source}
            if preemptor is not None:
                payload["preemptor"] = preemptor
            self.engine.schedule_event(
                now + i * self.cost.c_preempt_signal, EventKind.PREEMPTION_DONE, payload
            )

    def _on_preemption_done(self, event: Event):
        payload = event.payload
        job = self._job(payload["job_id"])
        job.preempting = False
        if job.state is not JobState.RUNNING:
            return {"stale": True}
        hold_for = payload.get("preemptor")
        if hold_for is not None and not self.jobs[hold_for].awaiting_preemption:
            hold_for = None
        if payload["mode"] == PreemptMode.CANCEL.value:
            self.cancel(job.job_id, event.fire_at, drain=payload["drain"], hold_for=hold_for)
        else:
            self.requeue(job.job_id, event.fire_at, drain=payload["drain"], hold_for=hold_for)
        return {"state": job.state.value, "requeue_count": job.requeue_count}

    def _preemption_in_flight(self, job: JobRecord, now: float) -> bool:
        if any(self.jobs[v].preempting for v in job.victims):
            return True
        return any(
            self.cluster.draining.get(n, now) > now for n in self.cluster.holds_of(job.job_id)
        )

    def _drop_holds(self, job: JobRecord):
        self.cluster.release_holds(job.job_id)
        job.awaiting_preemption = False

    def _job(self, job_id: int) -> JobRecord:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise UnknownJob(job_id) from None

    def requeue(
        self,
        job_id: int,
        now: float,
        drain: Optional[float] = None,
        hold_for: Optional[int] = None,
    ) -> JobRecord:
        """Return a running spot job to the queue, keeping its original recognition time.

        Its nodes drain for ``drain`` seconds, ``c_requeue`` when not given.
        """
        job = self._job(job_id)
        try:
            job.lifecycle.requeue()
        except TransitionNotAllowed as err:
            raise NotRunning(job_id, job.state) from err
        self._vacate(job, now, self.cost.c_requeue if drain is None else drain, hold_for)
        job.lifecycle.resubmit()
        self._requeue_in_partition(job, fresh=False)
        return job

    def cancel(
        self,
        job_id: int,
        now: float,
        drain: Optional[float] = None,
        hold_for: Optional[int] = None,
    ) -> JobRecord:
        job = self._job(job_id)
        try:
            job.lifecycle.cancel()
        except TransitionNotAllowed as err:
            raise NotRunning(job_id, job.state) from err
        self._vacate(job, now, self.cost.c_requeue if drain is None else drain, hold_for)
        self._spot_active.discard(job_id)
        return job

    def _vacate(self, job: JobRecord, now: float, drain: float, hold_for: Optional[int]):
        if job.job_id in self.cluster.allocations:
            self.cluster.release(job.job_id, now, drain=drain, hold_for=hold_for)
        job.backlog = 0
        job.end_at = None
