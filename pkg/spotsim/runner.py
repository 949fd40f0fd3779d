import logging
from dataclasses import dataclass
from typing import Any
from typing import Iterable
from typing import Optional

from .agent import SpotAgent
from .cluster import ClusterConfig
from .cluster import ClusterState
from .cluster import PreemptMode
from .cluster import build_cluster
from .engine import EventKind
from .engine import EventLog
from .engine import SimEngine
from .scheduler import Scheduler
from .scheduler import SchedulerConfig
from .workload import Approach
from .workload import Scenario

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    scenario: Scenario
    log: EventLog
    scheduler: Scheduler
    agent: Optional[SpotAgent] = None

    @property
    def cluster(self) -> ClusterState:
        return self.scheduler.cluster


def build(scenario: Scenario, listeners: Iterable[Any] = ()) -> RunResult:
    """Wire an isolated engine, cluster, scheduler and agent for ``scenario``.

    Nothing is processed yet; the timeline, the backfill cadence and the agent
    ticks are scheduled on the returned engine.
    """
    scenario.validate()
    shape = scenario.cluster
    cfg = ClusterConfig.homogeneous(
        shape.nodes,
        shape.cores_per_node,
        layout=scenario.partitions,
        preempt_mode=PreemptMode(scenario.mode),
        per_user_limit_nodes=shape.per_user_limit_nodes,
    )
    cluster = build_cluster(cfg)
    engine = SimEngine()
    engine.add_listener(*listeners)
    per_user_quota = scenario.agent.per_user_quota if scenario.agent else False
    scheduler = Scheduler(
        engine,
        cluster,
        cost=scenario.cost_model,
        config=SchedulerConfig(
            auto_preempt=scenario.approach is Approach.AUTO,
            per_user_quota=per_user_quota,
        ),
    )
    agent = None
    if scenario.agent is not None:
        agent = SpotAgent(scheduler, scenario.agent)

    for submission in scenario.timeline():
        engine.schedule_event(
            submission.at,
            EventKind.SUBMIT,
            {"specs": submission.specs, "preempt_first": submission.preempt_first},
        )
    scheduler.start(0.0)
    if agent is not None:
        agent.start()
    return RunResult(scenario, engine.log, scheduler, agent)


def run_scenario(scenario: Scenario, listeners: Iterable[Any] = ()) -> RunResult:
    """Run ``scenario`` up to its horizon and return the log and final state."""
    result = build(scenario, listeners)
    logger.info("running %s", scenario.scenario_id)
    result.scheduler.engine.run_until(scenario.horizon)
    result.cluster.finalize(scenario.horizon)
    logger.info(
        "finished %s: %d events, %d jobs",
        scenario.scenario_id,
        len(result.log),
        len(result.scheduler.jobs),
    )
    return result
