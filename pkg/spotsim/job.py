"""
Job specifications, runtime records and the job lifecycle.

The lifecycle is a :class:`~statemachine.StateMachine` declared from the
:class:`JobState` enum; the :class:`JobRecord` is its model, so the record's
``state`` attribute always holds the current :class:`JobState`.

>>> record = JobRecord(job_id=7, spec=JobSpec("bob", "spot", JobType.TRIPLE, 64, 100.0,
...                    tasks_per_node=32), recognized_at=1.01)
>>> record.state
<JobState.PENDING: 'Pending'>
>>> record.lifecycle.start()
>>> record.lifecycle.requeue()
>>> record.lifecycle.resubmit()
>>> record.state, record.requeue_count
(<JobState.PENDING: 'Pending'>, 1)

"""

import math
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from functools import lru_cache
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional

from statemachine import StateMachine
from statemachine.states import States

from .cluster import NORMAL
from .cluster import SPOT
from .cluster import PlacementRequest
from .exceptions import NotSpot
from .exceptions import ValidationError
from .i18n import _

MAIN = "main"
BACKFILL = "backfill"
MIXED = "mixed"


class JobType(str, Enum):
    INDIVIDUAL = "individual"
    ARRAY = "array"
    TRIPLE = "triple"


class JobState(Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    REQUEUED = "Requeued"
    CANCELLED = "Cancelled"
    COMPLETED = "Completed"


@dataclass(frozen=True)
class JobSpec:
    user: str
    qos: str
    job_type: JobType
    total_tasks: int
    run_seconds: float
    submit_at: float = 0.0
    cores_per_task: int = 1
    tasks_per_node: Optional[int] = None
    batch: Optional[str] = None

    def validate(self, node_cores: Optional[int] = None):
        if self.qos not in (NORMAL, SPOT):
            raise ValidationError(_("Unknown QoS {!r}.").format(self.qos))
        if self.total_tasks < 1:
            raise ValidationError(_("A job needs at least one task."))
        if self.cores_per_task < 1:
            raise ValidationError(_("cores_per_task must be positive."))
        if self.run_seconds <= 0:
            raise ValidationError(_("run_seconds must be positive."))
        if self.submit_at < 0:
            raise ValidationError(_("submit_at must not be negative."))
        if self.job_type is JobType.TRIPLE:
            if not self.tasks_per_node or self.tasks_per_node < 1:
                raise ValidationError(_("Triple-mode jobs need a positive tasks_per_node."))
            if node_cores is not None and self.tasks_per_node * self.cores_per_task > node_cores:
                raise ValidationError(
                    _("{} tasks per node need more than the {} cores of a node.").format(
                        self.tasks_per_node, node_cores
                    )
                )
        elif node_cores is not None and self.cores_per_task > node_cores:
            raise ValidationError(_("A task can't span nodes."))

    @property
    def units(self) -> int:
        "Dispatch units: node units for triple-mode, tasks otherwise."
        if self.job_type is JobType.TRIPLE:
            return math.ceil(self.total_tasks / self.tasks_per_node)
        return self.total_tasks

    @property
    def request(self) -> PlacementRequest:
        if self.job_type is JobType.TRIPLE:
            return PlacementRequest(
                n_tasks=self.units,
                cores_per_task=self.tasks_per_node * self.cores_per_task,
                node_exclusive=True,
            )
        return PlacementRequest(n_tasks=self.total_tasks, cores_per_task=self.cores_per_task)

    def node_demand(self, node_cores: int) -> int:
        if self.job_type is JobType.TRIPLE:
            return self.units
        return math.ceil(self.total_tasks * self.cores_per_task / node_cores)


class JobLifecycle(StateMachine):
    "Pending → Running → Completed, Requeued → Pending, or Cancelled."

    states = States.from_enum(
        JobState,
        initial=JobState.PENDING,
        final=[JobState.COMPLETED, JobState.CANCELLED],
        use_enum_instance=True,
    )

    start = states.PENDING.to(states.RUNNING)
    complete = states.RUNNING.to(states.COMPLETED)
    requeue = states.RUNNING.to(states.REQUEUED, validators="only_spot")
    cancel = states.RUNNING.to(states.CANCELLED, validators="only_spot")
    resubmit = states.REQUEUED.to(states.PENDING)


_PLAIN_EVENTS = ("start", "complete")


@lru_cache(maxsize=None)
def _plain_moves(event: str) -> Dict[JobState, JobState]:
    "Source to target of ``event``, read from the machine class; empty for other events."
    if event not in _PLAIN_EVENTS:
        return {}
    return {
        state.value: transition.target.value
        for state in JobLifecycle.states
        for transition in state.transitions
        if transition.match(event)
    }


@dataclass(eq=False)
class JobRecord:
    job_id: int
    spec: JobSpec
    recognized_at: float
    state: JobState = JobState.PENDING
    dispatch_times: List[float] = field(default_factory=list)
    requeue_count: int = 0
    dispatched_by: Optional[str] = None
    backlog: int = 0
    end_at: Optional[float] = None
    awaiting_preemption: bool = False
    preempting: bool = False
    preempt_started_at: Optional[float] = None
    victims: List[int] = field(default_factory=list)
    _lifecycle: Optional[JobLifecycle] = field(default=None, init=False, repr=False)

    @property
    def lifecycle(self) -> JobLifecycle:
        "The state machine bound to this record, built on first use."
        if self._lifecycle is None:
            self._lifecycle = JobLifecycle(model=self)
        return self._lifecycle

    def send(self, event: str):
        """Run ``event`` through the lifecycle.

        ``start`` and ``complete`` carry no callbacks, so until the machine is
        needed they only follow the transitions it declares.
        """
        if self._lifecycle is None:
            target = _plain_moves(event).get(self.state)
            if target is not None:
                self.state = target
                return
        self.lifecycle.send(event)

    @property
    def key(self) -> str:
        "Measurement key: the batch tag, or the job id for a standalone job."
        return self.spec.batch or str(self.job_id)

    @property
    def spot(self) -> bool:
        return self.spec.qos == SPOT

    @property
    def units(self) -> int:
        return self.spec.units

    @property
    def queued(self) -> bool:
        "Still owned by a partition queue: pending, or placed with units left to dispatch."
        return self.state is JobState.PENDING or self.backlog > 0

    def only_spot(self):
        if not self.spot:
            raise NotSpot(self.job_id)

    def after_requeue(self):
        self.requeue_count += 1

    def note_dispatch(self, by: str):
        if self.dispatched_by is None or self.dispatched_by == by:
            self.dispatched_by = by
        else:
            self.dispatched_by = MIXED


def nodes_for(specs: Iterable[JobSpec], node_cores: int) -> int:
    """Whole nodes needed to start ``specs`` together.

    Core-granular tasks are packed densely, so a batch of one-task jobs counts
    as one pool of cores rather than one node per job.

    >>> one_task = JobSpec("amy", "normal", JobType.INDIVIDUAL, 1, 60.0)
    >>> nodes_for([one_task] * 100, node_cores=32)
    4

    """
    exclusive = cores = 0
    for spec in specs:
        if spec.job_type is JobType.TRIPLE:
            exclusive += spec.units
        else:
            cores += spec.total_tasks * spec.cores_per_task
    return exclusive + math.ceil(cores / node_cores)


def lifecycle_diagram():
    """The job lifecycle as a ``pydot.Dot`` graph.

    Needs the ``diagrams`` extra.
    """
    from statemachine.contrib.diagram import DotGraphMachine

    return DotGraphMachine(JobLifecycle)()
