"""
Scheduling-time measurement and result files.

The scheduling time of a job (or of a batch of individual jobs) runs from the
moment the scheduler recognized the submission, or from the start of the
preemption for manually preempted submissions, to the dispatch of its last
unit.
"""

import csv
import io
import logging
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from statistics import mean
from typing import TYPE_CHECKING
from typing import Any
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional

from .engine import EventKind
from .engine import EventLog
from .exceptions import NotFullyDispatched
from .exceptions import UnknownJob
from .job import MIXED
from .workload import Approach

if TYPE_CHECKING:
    from .runner import RunResult
    from .workload import Scenario

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "scenario_id",
    "approach",
    "mode",
    "partitions",
    "job_type",
    "size",
    "seed",
    "job_id",
    "n_tasks",
    "scheduling_time_s",
    "per_task_s",
    "dispatched_by",
    "victims",
)
EVENTS_HEADER = ("seq", "time", "kind", "payload", "delta")

_INT_COLUMNS = {"seed", "n_tasks", "victims"}
_FLOAT_COLUMNS = {"scheduling_time_s", "per_task_s"}


class Origin(str, Enum):
    RECOGNIZED = "recognized"
    PREEMPT_START = "preempt_start"


@dataclass(frozen=True)
class SchedRecord:
    key: str
    n_tasks: int
    recognized_at: float
    first_dispatch_at: float
    last_dispatch_at: float
    scheduling_time: float
    per_task_time: float
    dispatched_by: str
    preemption_on_path: bool = False
    victims_count: int = 0
    origin: Origin = Origin.RECOGNIZED


@dataclass
class _Trace:
    "What the log says about one measured key."

    recognized_at: float
    units: int
    tasks: int
    preempt_start: Optional[float] = None
    victims: int = 0
    times: List[float] = field(default_factory=list)
    paths: set = field(default_factory=set)


def _traces(log: EventLog) -> Dict[str, _Trace]:
    traces: Dict[str, _Trace] = {}
    for entry in log:
        if entry.kind is EventKind.SUBMIT:
            delta = entry.delta
            for key, units in delta.get("units", {}).items():
                traces[key] = _Trace(
                    recognized_at=delta["recognized_at"],
                    units=units,
                    tasks=delta.get("tasks", {}).get(key, units),
                    preempt_start=delta.get("preempt_start"),
                    victims=len(delta.get("victims", ())),
                )
        elif entry.kind is EventKind.TASK_DISPATCHED and not entry.delta.get("stale"):
            trace = traces.get(entry.event.payload["key"])
            if trace is not None:
                trace.times.append(entry.time)
                trace.paths.add(entry.event.payload["by"])
    return traces


def _record(key: str, trace: _Trace, origin: Origin, victims: int = 0) -> SchedRecord:
    if len(trace.times) < trace.units:
        raise NotFullyDispatched(key, len(trace.times), trace.units)
    start = trace.recognized_at
    if origin is Origin.PREEMPT_START and trace.preempt_start is not None:
        start = trace.preempt_start
    last = max(trace.times)
    elapsed = last - start
    victims = max(victims, trace.victims)
    return SchedRecord(
        key=key,
        n_tasks=trace.tasks,
        recognized_at=trace.recognized_at,
        first_dispatch_at=min(trace.times),
        last_dispatch_at=last,
        scheduling_time=elapsed,
        per_task_time=elapsed / trace.tasks,
        dispatched_by=trace.paths.pop() if len(trace.paths) == 1 else MIXED,
        preemption_on_path=victims > 0,
        victims_count=victims,
        origin=origin,
    )


def scheduling_time(log: EventLog, key: str, origin: Origin = Origin.RECOGNIZED) -> float:
    """Seconds from ``origin`` to the last dispatch of ``key``.

    ``key`` is a job id (as text) or the batch tag of individual jobs.
    """
    trace = _traces(log).get(str(key))
    if trace is None:
        raise UnknownJob(key)
    return _record(str(key), trace, Origin(origin)).scheduling_time


def origin_for(scenario: "Scenario") -> Origin:
    if scenario.approach is Approach.MANUAL:
        return Origin.PREEMPT_START
    return Origin.RECOGNIZED


@dataclass
class RunSummary:
    scenario: "Scenario"
    records: List[SchedRecord]
    spot_node_seconds: float = 0.0
    normal_node_seconds: float = 0.0
    agent_ticks: int = 0
    agent_victims: int = 0

    @property
    def utilization(self) -> float:
        capacity = self.scenario.cluster.nodes * self.scenario.horizon
        return (self.spot_node_seconds + self.normal_node_seconds) / capacity


def summarize(run: "RunResult") -> RunSummary:
    """One record per measured interactive job or batch, in submission order."""
    scenario = run.scenario
    origin = origin_for(scenario)
    traces = _traces(run.log)

    victims: Dict[str, set] = {}
    order: List[str] = []
    for job in run.scheduler.jobs.values():
        if job.spot:
            continue
        if job.key not in victims:
            order.append(job.key)
            victims[job.key] = set()
        victims[job.key].update(job.victims)

    records = []
    for key in order:
        try:
            records.append(_record(key, traces[key], origin, len(victims[key])))
        except NotFullyDispatched as err:
            logger.warning("%s: %s", scenario.scenario_id, err)

    usage = run.cluster.usage
    agent_ticks = agent_victims = 0
    if run.agent is not None:
        agent_ticks = len(run.agent.reports)
        agent_victims = sum(len(r.victims) for r in run.agent.reports)
    return RunSummary(
        scenario,
        records,
        spot_node_seconds=usage.spot_node_seconds,
        normal_node_seconds=usage.normal_node_seconds,
        agent_ticks=agent_ticks,
        agent_victims=agent_victims,
    )


def _f(value: float) -> str:
    return f"{value:.6f}"


def _csv_rows(summary: RunSummary):
    s = summary.scenario
    for r in summary.records:
        yield (
            s.scenario_id,
            s.approach.value,
            s.mode.value,
            s.partitions.value,
            s.job_type.value,
            s.size.value,
            str(s.seed),
            r.key,
            str(r.n_tasks),
            _f(r.scheduling_time),
            _f(r.per_task_time),
            r.dispatched_by,
            str(r.victims_count),
        )


def _summary_block(summary: RunSummary) -> List[str]:
    s = summary.scenario
    times = [r.scheduling_time for r in summary.records]
    per_task = [r.per_task_time for r in summary.records]
    paths = sorted({r.dispatched_by for r in summary.records})
    lines = [
        f"[scenario {s.scenario_id}]",
        f"approach = {s.approach.value}",
        f"mode = {s.mode.value}",
        f"partitions = {s.partitions.value}",
        f"job_type = {s.job_type.value}",
        f"size = {s.size.value}",
        f"seed = {s.seed}",
        f"records = {len(summary.records)}",
        f"mean_scheduling_time_s = {_f(mean(times)) if times else '-'}",
        f"max_scheduling_time_s = {_f(max(times)) if times else '-'}",
        f"mean_per_task_s = {_f(mean(per_task)) if per_task else '-'}",
        f"dispatched_by = {','.join(paths) or '-'}",
        f"victims = {sum(r.victims_count for r in summary.records)}",
        f"spot_node_seconds = {_f(summary.spot_node_seconds)}",
        f"interactive_node_seconds = {_f(summary.normal_node_seconds)}",
        f"utilization = {_f(summary.utilization)}",
        f"agent_ticks = {summary.agent_ticks}",
        f"agent_victims = {summary.agent_victims}",
    ]
    return lines


def emit(summaries: Iterable[RunSummary], fmt: str = "csv") -> bytes:
    """Render ``summaries`` as CSV or as the summary text document.

    >>> emit([]).decode().split(",")[:3]
    ['scenario_id', 'approach', 'mode']
    >>> emit([], "summary")
    b''

    """
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for summary in summaries:
            writer.writerows(_csv_rows(summary))
        return buffer.getvalue().encode()
    if fmt == "summary":
        blocks = ["\n".join(_summary_block(summary)) for summary in summaries]
        return ("\n\n".join(blocks) + "\n").encode() if blocks else b""
    raise ValueError(f"Unknown format {fmt!r}")


def emit_events(log: EventLog) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    writer.writerows(entry.row() for entry in log)
    return buffer.getvalue().encode()


def parse_csv(data: bytes) -> List[Dict[str, Any]]:
    """Read back rows written by :func:`emit`, with numeric columns typed."""
    rows = []
    for row in csv.DictReader(io.StringIO(data.decode())):
        typed: Dict[str, Any] = dict(row)
        for column in _INT_COLUMNS:
            typed[column] = int(row[column])
        for column in _FLOAT_COLUMNS:
            typed[column] = float(row[column])
        rows.append(typed)
    return rows
