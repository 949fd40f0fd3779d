"""
Job constructors, cluster-filling helpers and the experiment matrix.

>>> len(table1_matrix())
51
>>> builtin("auto-cancel-single-triple-large").cluster
ClusterShape(nodes=64, cores_per_node=64, per_user_limit_nodes=None)

"""

import random
from dataclasses import dataclass
from dataclasses import replace
from enum import Enum
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

from .agent import AgentConfig
from .cluster import NORMAL
from .cluster import REJECTED_MODES
from .cluster import SPOT
from .cluster import ClusterShape
from .cluster import Layout
from .cluster import PreemptMode
from .exceptions import ConfigError
from .exceptions import ValidationError
from .i18n import _
from .job import JobSpec
from .job import JobType
from .scheduler import CostModel

INTERACTIVE_AT = 300.5
INTERACTIVE_RUN = 3600.0
SPOT_RUN = 86400.0
SPOT_USER = "spot"
INTERACTIVE_USER = "interactive"


class Approach(str, Enum):
    BASELINE = "baseline"
    AUTO = "auto"
    MANUAL = "manual"
    CRON = "cron"


class Size(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"

    @property
    def tasks(self) -> int:
        return _SIZE_TASKS[self]


_SIZE_TASKS = {Size.SMALL: 608, Size.MEDIUM: 2048, Size.LARGE: 4096}

SHAPES = {
    Size.SMALL: ClusterShape(19, 32),
    Size.MEDIUM: ClusterShape(64, 64),
    Size.LARGE: ClusterShape(64, 64),
}
CRON_SHAPE = ClusterShape(128, 64, per_user_limit_nodes=64)
CRON_SPOT_JOB_NODES = 16
CRON_RUNS = 2


def make_job(
    job_type: JobType,
    total_tasks: int,
    tasks_per_node: Optional[int] = None,
    qos: str = NORMAL,
    user: str = INTERACTIVE_USER,
    t: float = 0.0,
    run_seconds: float = INTERACTIVE_RUN,
    cores_per_task: int = 1,
    batch: Optional[str] = None,
) -> List[JobSpec]:
    """Build the job specs one submission of ``job_type`` produces.

    >>> [s.units for s in make_job(JobType.TRIPLE, 4096, tasks_per_node=64)]
    [64]
    >>> [s.units for s in make_job(JobType.ARRAY, 608)]
    [608]
    >>> specs = make_job(JobType.INDIVIDUAL, 3, t=2.0)
    >>> len(specs), {s.batch for s in specs}
    (3, {'interactive-2'})

    """
    if JobType(job_type) is JobType.INDIVIDUAL:
        batch = batch or f"{user}-{t:g}"
    spec = batch_spec(
        job_type,
        total_tasks,
        tasks_per_node=tasks_per_node,
        qos=qos,
        user=user,
        t=t,
        run_seconds=run_seconds,
        cores_per_task=cores_per_task,
        batch=batch,
    )
    if spec.job_type is JobType.INDIVIDUAL:
        return [replace(spec, total_tasks=1)] * total_tasks
    return [spec]


def batch_spec(
    job_type: JobType,
    total_tasks: int,
    tasks_per_node: Optional[int] = None,
    qos: str = NORMAL,
    user: str = INTERACTIVE_USER,
    t: float = 0.0,
    run_seconds: float = INTERACTIVE_RUN,
    cores_per_task: int = 1,
    batch: Optional[str] = None,
) -> JobSpec:
    """Like :func:`make_job`, but individual submissions stay one spec.

    The scheduler expands it into one-task jobs on submission, which keeps the
    event log to one line per submission. Without an explicit ``batch`` the
    scheduler tags each submission on its own.
    """
    job_type = JobType(job_type)
    spec = JobSpec(
        user,
        qos,
        job_type,
        total_tasks,
        run_seconds,
        submit_at=t,
        cores_per_task=cores_per_task,
        tasks_per_node=tasks_per_node if job_type is JobType.TRIPLE else None,
        batch=batch,
    )
    spec.validate()
    return spec


@dataclass(frozen=True)
class Submission:
    "One Submit event: the specs submitted together at ``at``."

    at: float
    specs: Tuple[JobSpec, ...]
    preempt_first: bool = False


@dataclass(frozen=True)
class JobRequest:
    """A timeline entry before expansion into job specs."""

    at: float
    qos: str
    job_type: JobType
    total_tasks: int
    tasks_per_node: Optional[int] = None
    run_seconds: float = INTERACTIVE_RUN
    user: str = INTERACTIVE_USER
    cores_per_task: int = 1
    preempt_first: bool = False

    def submission(self) -> Submission:
        spec = batch_spec(
            self.job_type,
            self.total_tasks,
            tasks_per_node=self.tasks_per_node,
            qos=self.qos,
            user=self.user,
            t=self.at,
            run_seconds=self.run_seconds,
            cores_per_task=self.cores_per_task,
        )
        return Submission(self.at, (spec,), self.preempt_first)


def fill_with_spot(
    cluster: ClusterShape,
    quota: int,
    job_nodes: Optional[int] = None,
    start: float = 1.0,
) -> List[Submission]:
    """Triple-mode spot jobs covering ``quota`` nodes, one second apart.

    Each job takes ``job_nodes`` whole nodes (the per-user limit by default), the
    last one takes what is left.

    >>> [s.specs[0].units for s in fill_with_spot(ClusterShape(19, 32), 19, job_nodes=8)]
    [8, 8, 3]

    """
    if not 0 <= quota <= cluster.nodes:
        raise ConfigError("workload.quota", _("must be between 0 and the node count."))
    size = job_nodes or cluster.limit_nodes
    if size < 1:
        raise ConfigError("workload.spot_job_nodes", _("must be positive."))
    timeline = []
    left = quota
    t = start
    while left > 0:
        nodes = min(size, left)
        spec = JobSpec(
            SPOT_USER,
            SPOT,
            JobType.TRIPLE,
            nodes * cluster.cores_per_node,
            SPOT_RUN,
            submit_at=t,
            tasks_per_node=cluster.cores_per_node,
        )
        timeline.append(Submission(t, (spec,)))
        left -= nodes
        t += 1.0
    return timeline


@dataclass(frozen=True)
class Scenario:
    """One simulated experiment: a cluster, a preemption approach and a workload.

    The spot fill saturates the cluster (``auto`` and ``manual``) or the agent's
    quota (``cron``); the measured interactive submission happens ``runs`` times,
    ``run_gap`` seconds apart, starting at ``interactive_at``.
    """

    cluster: ClusterShape
    approach: Approach
    job_type: JobType
    size: Size
    mode: PreemptMode = PreemptMode.REQUEUE
    partitions: Layout = Layout.DUAL
    cost_model: CostModel = CostModel()
    agent: Optional[AgentConfig] = None
    seed: int = 0
    horizon: float = 1200.0
    interactive_at: float = INTERACTIVE_AT
    runs: int = 1
    run_gap: float = 120.0
    spot_job_nodes: Optional[int] = None
    label: Optional[str] = None
    extra: Tuple[JobRequest, ...] = ()

    def validate(self):
        self.cluster.validate()
        self.cost_model.validate()
        mode = PreemptMode(self.mode)
        if mode in REJECTED_MODES:
            raise ConfigError("scheduler.mode", REJECTED_MODES[mode])
        if self.approach is Approach.CRON:
            if self.agent is None:
                raise ConfigError("agent", _("The cron approach needs an agent."))
        elif self.agent is not None:
            raise ConfigError(
                "agent",
                _("Only the cron approach runs an agent, not {!r}.").format(self.approach.value),
            )
        if self.agent is not None:
            self.agent.validate(self.cluster.nodes)
        if self.size.tasks > self.cluster.total_cores:
            raise ConfigError("workload.size", _("More tasks than cores in the cluster."))
        if self.runs < 0:
            raise ConfigError("workload.runs", _("must be >= 0."))
        if self.run_gap <= 0:
            raise ConfigError("workload.run_gap", _("must be positive."))
        if self.interactive_at < 0:
            raise ConfigError("workload.interactive_at", _("must be >= 0."))
        if self.horizon <= self.interactive_at + self.run_gap * max(self.runs - 1, 0):
            raise ConfigError("workload.horizon", _("must be after the last interactive run."))
        if self.spot_job_nodes is not None and not 1 <= self.spot_job_nodes <= self.cluster.nodes:
            raise ConfigError(
                "workload.spot_job_nodes", _("must be between 1 and the node count.")
            )
        for i, request in enumerate(self.extra):
            if request.at < 0 or request.at > self.horizon:
                raise ConfigError(f"timeline.{i}", _("must fall within the horizon."))
            try:
                request.submission().specs[0].validate(self.cluster.cores_per_node)
            except ValidationError as err:
                raise ConfigError(f"timeline.{i}", str(err)) from err
        return self

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        return "-".join(
            (
                self.approach.value,
                PreemptMode(self.mode).value.lower(),
                Layout(self.partitions).value,
                self.job_type.value,
                self.size.value,
            )
        )

    @property
    def scenario_id(self) -> str:
        return f"{self.name}-s{self.seed}"

    @property
    def reserve_nodes(self) -> int:
        if self.agent is None or self.agent.reserve_nodes is None:
            return self.cluster.limit_nodes
        return self.agent.reserve_nodes

    @property
    def spot_quota(self) -> int:
        if self.approach is Approach.BASELINE:
            return 0
        if self.approach is Approach.CRON:
            return max(0, self.cluster.nodes - self.reserve_nodes)
        return self.cluster.nodes

    def interactive_times(self) -> List[float]:
        return [self.interactive_at + k * self.run_gap for k in range(self.runs)]

    def timeline(self) -> List[Submission]:
        "Every submission, ordered by time."
        timeline = fill_with_spot(self.cluster, self.spot_quota, self.spot_job_nodes)
        for at in self.interactive_times():
            spec = batch_spec(
                self.job_type,
                self.size.tasks,
                tasks_per_node=self.cluster.cores_per_node,
                t=at,
            )
            timeline.append(Submission(at, (spec,), self.approach is Approach.MANUAL))
        timeline.extend(request.submission() for request in self.extra)
        return sorted(timeline, key=lambda s: s.at)


@dataclass(frozen=True)
class Skipped:
    name: str
    reason: str


def table1_skipped() -> List[Skipped]:
    return [
        Skipped(
            "lua-requeue-dual-all-all",
            _(
                "A job submission plugin can't requeue running jobs: it runs before the "
                "job is accepted, so this approach was never measured."
            ),
        )
    ]


def _cell(
    approach: Approach,
    job_type: JobType,
    size: Size,
    mode: PreemptMode = PreemptMode.REQUEUE,
    partitions: Layout = Layout.DUAL,
) -> Scenario:
    if approach is Approach.CRON:
        return Scenario(
            CRON_SHAPE,
            approach,
            job_type,
            size,
            mode=mode,
            partitions=partitions,
            agent=AgentConfig(),
            runs=CRON_RUNS,
            spot_job_nodes=CRON_SPOT_JOB_NODES,
        )
    return Scenario(SHAPES[size], approach, job_type, size, mode=mode, partitions=partitions)


def table1_matrix() -> List[Scenario]:
    """Every runnable cell of the experiment matrix, in a fixed order."""
    types = list(JobType)
    sizes = list(Size)
    cells = [
        _cell(Approach.BASELINE, job_type, size) for job_type in types for size in sizes
    ]
    cells += [
        _cell(Approach.AUTO, job_type, size, mode, partitions)
        for mode in (PreemptMode.REQUEUE, PreemptMode.CANCEL)
        for partitions in (Layout.SINGLE, Layout.DUAL)
        for job_type in types
        for size in sizes
    ]
    cells += [_cell(Approach.MANUAL, job_type, Size.LARGE) for job_type in types]
    cells += [_cell(Approach.CRON, job_type, Size.LARGE) for job_type in types]
    return cells


def builtin_scenarios() -> Dict[str, Scenario]:
    return {scenario.name: scenario for scenario in table1_matrix()}


def builtin(name: str) -> Scenario:
    try:
        return builtin_scenarios()[name]
    except KeyError:
        raise ConfigError("builtin", _("Unknown builtin scenario {!r}.").format(name)) from None


def hazard_scenario(job_type: JobType = JobType.TRIPLE, run_gap: float = 10.0) -> Scenario:
    """Two interactive jobs less than one agent interval apart.

    The first one uses the reserve; the second one has to wait for the next tick.
    """
    return replace(
        _cell(Approach.CRON, JobType(job_type), Size.LARGE),
        run_gap=run_gap,
        label=f"hazard-{JobType(job_type).value}",
    )


def random_arrivals(
    seed: int,
    cluster: ClusterShape,
    horizon: float = 900.0,
    reserve_nodes: int = 4,
    spot_jobs: int = 12,
    interactive_jobs: int = 6,
    start: float = 0.0,
) -> Tuple[JobRequest, ...]:
    """A reproducible mix of spot and interactive triple-mode jobs.

    Spot jobs take 1 to 4 nodes, interactive jobs 1 to ``reserve_nodes`` nodes.

    >>> random_arrivals(7, ClusterShape(19, 32)) == random_arrivals(7, ClusterShape(19, 32))
    True

    """
    rng = random.Random(seed)
    cores = cluster.cores_per_node
    requests = []
    for _i in range(spot_jobs):
        nodes = rng.randint(1, 4)
        requests.append(
            JobRequest(
                at=round(rng.uniform(start, horizon), 3),
                qos=SPOT,
                job_type=JobType.TRIPLE,
                total_tasks=nodes * cores,
                tasks_per_node=cores,
                run_seconds=round(rng.uniform(120.0, 1200.0), 3),
                user=SPOT_USER,
            )
        )
    for _i in range(interactive_jobs):
        nodes = rng.randint(1, max(1, reserve_nodes))
        requests.append(
            JobRequest(
                at=round(rng.uniform(start, horizon), 3),
                qos=NORMAL,
                job_type=JobType.TRIPLE,
                total_tasks=nodes * cores,
                tasks_per_node=cores,
                run_seconds=round(rng.uniform(60.0, 600.0), 3),
            )
        )
    return tuple(sorted(requests, key=lambda r: (r.at, r.qos)))
