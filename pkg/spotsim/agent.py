"""
The periodic spot agent.

Every ``interval`` seconds the agent looks at the cluster, requeues the most
recently started spot jobs until enough nodes are idle for interactive work,
and lowers or raises the spot quota so the freed headroom stays free.
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import TYPE_CHECKING
from typing import List
from typing import Optional

from .cluster import SPOT
from .cluster import PreemptMode
from .engine import Event
from .engine import EventKind
from .exceptions import ConfigError
from .i18n import _
from .preemption import select_lifo_victims

if TYPE_CHECKING:
    from .scheduler import Scheduler

logger = logging.getLogger(__name__)

__all__ = ["AgentConfig", "AgentReport", "SpotAgent", "select_lifo_victims"]


@dataclass(frozen=True)
class AgentConfig:
    interval: float = 60.0
    reserve_nodes: Optional[int] = None
    per_user_quota: bool = False
    first_tick: float = 0.0

    def validate(self, total_nodes: Optional[int] = None):
        if self.interval <= 0:
            raise ConfigError("agent.interval", _("must be positive."))
        if self.first_tick < 0:
            raise ConfigError("agent.first_tick", _("must be >= 0."))
        if self.reserve_nodes is not None:
            upper = total_nodes if total_nodes is not None else self.reserve_nodes
            if not 0 <= self.reserve_nodes <= upper:
                raise ConfigError(
                    "agent.reserve_nodes", _("must be between 0 and the node count.")
                )


@dataclass
class AgentReport:
    tick_time: float
    idle_before: int
    idle_after: int
    victims: List[int] = field(default_factory=list)
    new_spot_quota: int = 0
    deficit: int = 0
    unfilled: int = 0

    def delta(self):
        return {
            "idle_before": self.idle_before,
            "idle_after": self.idle_after,
            "deficit": self.deficit,
            "unfilled": self.unfilled,
            "victims": self.victims,
            "quota": self.new_spot_quota,
        }


class SpotAgent:
    """Keeps ``reserve_nodes`` idle by requeueing spot jobs, newest first.

    The agent only acts on what it sees at tick time: a job that shows up between
    two ticks may have to wait for the next one.
    """

    def __init__(self, scheduler: "Scheduler", config: "AgentConfig | None" = None):
        self.scheduler = scheduler
        self.cluster = scheduler.cluster
        self.engine = scheduler.engine
        self.config = config or AgentConfig()
        self.config.validate(self.cluster.total_nodes)
        self.reports: List[AgentReport] = []
        self.engine.on(EventKind.AGENT_TICK, self._on_tick)

    def __repr__(self):
        return f"{type(self).__name__}(reserve={self.reserve_nodes}, ticks={len(self.reports)})"

    @property
    def reserve_nodes(self) -> int:
        if self.config.reserve_nodes is None:
            return self.cluster.per_user_limit_nodes
        return self.config.reserve_nodes

    def start(self, at: Optional[float] = None):
        self.engine.schedule_event(
            self.config.first_tick if at is None else at, EventKind.AGENT_TICK
        )

    def _on_tick(self, event: Event):
        report = self.tick(event.fire_at)
        self.engine.schedule_event(event.fire_at + self.config.interval, EventKind.AGENT_TICK)
        return report.delta()

    def _demand(self, now: float):
        interactive = self.cluster.interactive_nodes()
        pending = self.scheduler.pending_normal_nodes(now)
        return interactive, pending

    def tick(self, now: float) -> AgentReport:
        """Requeue spot jobs until the idle target is met, then refresh the quota.

        The idle target is the pending interactive demand plus the reserve, capped
        by what interactive work leaves of the cluster.
        """
        total = self.cluster.total_nodes
        interactive, pending = self._demand(now)
        target = pending + max(0, min(self.reserve_nodes, total - interactive - pending))
        idle = self.cluster.idle_nodes(now)
        deficit = max(0, target - idle)

        victims: List[int] = []
        freed = 0
        if deficit:
            candidates = {c.job_id: c for c in self.scheduler.running_spot()}
            victims = select_lifo_victims(candidates.values(), deficit)
            freed = sum(candidates[v].nodes for v in victims)
            self.scheduler.signal_preemption(
                victims,
                now,
                mode=PreemptMode.REQUEUE,
                drain=self.scheduler.cost.c_requeue,
                source="agent",
            )

        quota = self.update_spot_quota(now)
        report = AgentReport(
            tick_time=now,
            idle_before=idle,
            idle_after=idle + freed,
            victims=victims,
            new_spot_quota=quota,
            deficit=deficit,
            unfilled=max(0, deficit - freed),
        )
        self.reports.append(report)
        if report.unfilled:
            logger.warning(
                "agent tick at %.6f: %d nodes short of the reserve", now, report.unfilled
            )
        logger.debug(
            "agent tick at %.6f: idle=%d deficit=%d victims=%s quota=%d",
            now,
            idle,
            deficit,
            victims,
            quota,
        )
        return report

    def update_spot_quota(self, now: float) -> int:
        """Write the new spot node cap into the spot QoS.

        >>> from spotsim.cluster import ClusterConfig, build_cluster
        >>> from spotsim.engine import SimEngine
        >>> from spotsim.scheduler import Scheduler
        >>> cluster = build_cluster(ClusterConfig.homogeneous(19, 32))
        >>> agent = SpotAgent(Scheduler(SimEngine(), cluster), AgentConfig(reserve_nodes=4))
        >>> agent.update_spot_quota(0.0)
        15

        """
        interactive, pending = self._demand(now)
        quota = max(0, self.cluster.total_nodes - self.reserve_nodes - interactive - pending)
        self.cluster.qos[SPOT].max_tres_per_user = quota
        self.engine.schedule_event(now, EventKind.QUOTA_UPDATED, {"quota": quota})
        return quota
