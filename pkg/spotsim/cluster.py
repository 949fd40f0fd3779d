"""
Nodes, partitions, QoS policies and core-level resource accounting.

>>> state = build_cluster(ClusterConfig.homogeneous(19, 32))
>>> state.free_cores
608
>>> state.idle_nodes(0.0)
19

"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict
from typing import FrozenSet
from typing import Iterable
from typing import List
from typing import Optional
from typing import Set
from typing import Tuple

from .exceptions import ConfigError
from .exceptions import DoubleCommit
from .exceptions import UnknownJob
from .i18n import _

logger = logging.getLogger(__name__)

NORMAL = "normal"
SPOT = "spot"


class PreemptMode(str, Enum):
    REQUEUE = "REQUEUE"
    CANCEL = "CANCEL"
    GANG = "GANG"
    SUSPEND = "SUSPEND"


REJECTED_MODES = {
    PreemptMode.GANG: _(
        "GANG preemption time-slices the preempted job on the same nodes, so it keeps sharing "
        "memory with the interactive job; interactive jobs need exclusive resources."
    ),
    PreemptMode.SUSPEND: _(
        "SUSPEND keeps the suspended job resident in memory, while interactive jobs need the "
        "full memory of their nodes."
    ),
}


class Layout(str, Enum):
    SINGLE = "single"
    DUAL = "dual"


@dataclass(frozen=True)
class NodeSpec:
    node_id: int
    cores: int


@dataclass(frozen=True)
class PartitionConfig:
    name: str
    node_ids: FrozenSet[int]
    admitted_qos: FrozenSet[str]

    @property
    def merged(self) -> bool:
        "A single queue serving more than one QoS class."
        return len(self.admitted_qos) > 1


@dataclass
class QosPolicy:
    name: str
    priority: int
    preempt_mode: PreemptMode = PreemptMode.REQUEUE
    max_tres_per_user: Optional[int] = None

    @property
    def preemptable(self) -> bool:
        return self.name == SPOT

    def validate(self):
        path = f"qos.{self.name}"
        if self.name not in (NORMAL, SPOT):
            raise ConfigError(path, _("QoS must be one of {}.").format((NORMAL, SPOT)))
        mode = PreemptMode(self.preempt_mode)
        if mode in REJECTED_MODES:
            raise ConfigError(f"{path}.preempt_mode", REJECTED_MODES[mode])
        if self.max_tres_per_user is not None and self.max_tres_per_user < 0:
            raise ConfigError(f"{path}.max_tres_per_user", _("must be >= 0."))


@dataclass
class ClusterConfig:
    nodes: List[NodeSpec]
    partitions: List[PartitionConfig]
    qos: List[QosPolicy]
    per_user_limit_nodes: Optional[int] = None

    @classmethod
    def homogeneous(
        cls,
        n_nodes: int,
        cores_per_node: int,
        layout: Layout = Layout.DUAL,
        preempt_mode: PreemptMode = PreemptMode.REQUEUE,
        per_user_limit_nodes: Optional[int] = None,
    ) -> "ClusterConfig":
        """Identical nodes, both QoS classes, single or dual partition layout.

        Dual partitions cover the same nodes and differ only in admitted QoS.
        """
        nodes = [NodeSpec(node_id=i, cores=cores_per_node) for i in range(n_nodes)]
        ids = frozenset(n.node_id for n in nodes)
        if Layout(layout) is Layout.SINGLE:
            partitions = [PartitionConfig("all", ids, frozenset({NORMAL, SPOT}))]
        else:
            partitions = [
                PartitionConfig("interactive", ids, frozenset({NORMAL})),
                PartitionConfig("spot", ids, frozenset({SPOT})),
            ]
        qos = [
            QosPolicy(NORMAL, priority=100, preempt_mode=preempt_mode),
            QosPolicy(SPOT, priority=1, preempt_mode=preempt_mode),
        ]
        return cls(nodes, partitions, qos, per_user_limit_nodes=per_user_limit_nodes)


@dataclass(frozen=True)
class PlacementRequest:
    n_tasks: int
    cores_per_task: int = 1
    node_exclusive: bool = False


@dataclass(frozen=True)
class Placement:
    slots: Tuple[Tuple[int, int], ...]

    @property
    def node_ids(self) -> Tuple[int, ...]:
        return tuple(node_id for node_id, _cores in self.slots)

    @property
    def cores(self) -> int:
        return sum(cores for _node_id, cores in self.slots)


@dataclass(frozen=True)
class Insufficient:
    deficit_cores: int
    deficit_nodes: int


@dataclass(frozen=True)
class Allocation:
    slots: Tuple[Tuple[int, int], ...]
    user: str
    spot: bool

    @property
    def node_ids(self) -> Tuple[int, ...]:
        return tuple(node_id for node_id, _cores in self.slots)


@dataclass
class UsageMeter:
    "Integrates the number of nodes touched by spot and by normal work over time."

    last: float = 0.0
    spot_node_seconds: float = 0.0
    normal_node_seconds: float = 0.0

    def advance(self, now: float, spot_nodes: int, normal_nodes: int):
        if now > self.last:
            self.spot_node_seconds += (now - self.last) * spot_nodes
            self.normal_node_seconds += (now - self.last) * normal_nodes
            self.last = now


def build_cluster(cfg: ClusterConfig) -> "ClusterState":
    """Validate ``cfg`` and return a state with every core free."""
    if not cfg.nodes:
        raise ConfigError("cluster.nodes", _("A cluster needs at least one node."))
    seen = set()
    for node in cfg.nodes:
        if node.node_id in seen:
            msg = _("Node id {} is defined twice.").format(node.node_id)
            raise ConfigError("cluster.nodes", msg)
        if node.cores <= 0:
            raise ConfigError("cluster.cores_per_node", _("Nodes need at least one core."))
        seen.add(node.node_id)

    qos_names = set()
    for policy in cfg.qos:
        policy.validate()
        qos_names.add(policy.name)
    qos = {policy.name: policy for policy in cfg.qos}
    if NORMAL in qos and SPOT in qos and qos[NORMAL].priority <= qos[SPOT].priority:
        raise ConfigError("qos.normal.priority", _("normal must outrank spot."))

    if not cfg.partitions:
        raise ConfigError("cluster.partitions", _("At least one partition is required."))
    routed: Dict[str, str] = {}
    for partition in cfg.partitions:
        path = f"cluster.partitions.{partition.name}"
        if not partition.node_ids:
            raise ConfigError(path, _("Partition has no nodes."))
        if not partition.node_ids <= seen:
            raise ConfigError(path, _("Partition references unknown nodes."))
        if not partition.admitted_qos:
            raise ConfigError(path, _("Partition admits no QoS."))
        for name in partition.admitted_qos:
            if name not in qos_names:
                raise ConfigError(path, _("Unknown QoS {!r}.").format(name))
            if name in routed:
                raise ConfigError(path, _("QoS {!r} is admitted by two partitions.").format(name))
            routed[name] = partition.name

    if cfg.per_user_limit_nodes is not None and not 0 <= cfg.per_user_limit_nodes <= len(seen):
        raise ConfigError(
            "cluster.per_user_limit_nodes", _("must be between 0 and the node count.")
        )
    return ClusterState(cfg)


class ClusterState:
    """Occupancy of every node, plus drains, holds and spot accounting.

    A node is *usable* at ``now`` when it is not draining and not held for
    another job. ``holder`` lets a job use nodes held on its behalf.
    """

    def __init__(self, cfg: ClusterConfig):
        self.config = cfg
        self.nodes: Dict[int, NodeSpec] = {n.node_id: n for n in cfg.nodes}
        self.partitions: Dict[str, PartitionConfig] = {p.name: p for p in cfg.partitions}
        self.qos: Dict[str, QosPolicy] = {q.name: q for q in cfg.qos}
        self.free: Dict[int, int] = {n.node_id: n.cores for n in cfg.nodes}
        self.allocations: Dict[int, Allocation] = {}
        self.draining: Dict[int, float] = {}
        self.held: Dict[int, int] = {}
        self.usage = UsageMeter()
        self._order = sorted(self.nodes)
        self._spot_on_node: Counter = Counter()
        self._normal_on_node: Counter = Counter()
        self._user_spot_on_node: Dict[str, Counter] = {}

    def __repr__(self):
        return (
            f"{type(self).__name__}(nodes={len(self.nodes)}, free_cores={self.free_cores}, "
            f"jobs={len(self.allocations)})"
        )

    @property
    def total_nodes(self) -> int:
        return len(self.nodes)

    @property
    def total_cores(self) -> int:
        return sum(n.cores for n in self.nodes.values())

    @property
    def free_cores(self) -> int:
        return sum(self.free.values())

    @property
    def max_cores(self) -> int:
        return max(n.cores for n in self.nodes.values())

    @property
    def per_user_limit_nodes(self) -> int:
        limit = self.config.per_user_limit_nodes
        return self.total_nodes if limit is None else limit

    @property
    def per_user_spot_nodes(self) -> Dict[str, int]:
        return {
            user: sum(1 for c in counter.values() if c)
            for user, counter in self._user_spot_on_node.items()
            if any(counter.values())
        }

    def usable(self, node_id: int, now: float, holder: Optional[int] = None) -> bool:
        if self.draining.get(node_id, now) > now:
            return False
        return self.held.get(node_id, holder) == holder

    def idle_nodes(self, now: float) -> int:
        "Nodes with every core free that are neither draining nor held."
        return sum(
            1
            for node_id in self._order
            if self.free[node_id] == self.nodes[node_id].cores and self.usable(node_id, now)
        )

    def draining_nodes(self, now: float) -> List[int]:
        return [n for n, until in sorted(self.draining.items()) if until > now]

    def spot_node_ids(self, user: Optional[str] = None) -> Set[int]:
        if user is None:
            counter = self._spot_on_node
        else:
            counter = self._user_spot_on_node.get(user, Counter())
        return {n for n, c in counter.items() if c}

    def spot_nodes(self, user: Optional[str] = None) -> int:
        return len(self.spot_node_ids(user))

    def interactive_nodes(self) -> int:
        return sum(1 for c in self._normal_on_node.values() if c)

    def spot_footprint(self, job_id: int) -> Tuple[int, int]:
        "``(nodes, cores)`` held by a job."
        alloc = self.allocations[job_id]
        return len(alloc.slots), sum(c for _n, c in alloc.slots)

    def try_place(
        self,
        request: PlacementRequest,
        now: float = 0.0,
        holder: Optional[int] = None,
        within: Optional[Iterable[int]] = None,
        exclude: FrozenSet[int] = frozenset(),
    ) -> "Placement | Insufficient":
        """Find room for ``request`` without changing the state.

        Nodes are visited in ascending id; a core-granular request fills each node
        before moving on, a node-exclusive request takes whole idle nodes.

        >>> state = build_cluster(ClusterConfig.homogeneous(2, 4))
        >>> state.try_place(PlacementRequest(n_tasks=6))
        Placement(slots=((0, 4), (1, 2)))
        >>> state.try_place(PlacementRequest(n_tasks=3, cores_per_task=4, node_exclusive=True))
        Insufficient(deficit_cores=4, deficit_nodes=1)

        """
        allowed = None if within is None else set(within)
        candidates = [
            n
            for n in self._order
            if (allowed is None or n in allowed)
            and n not in exclude
            and self.usable(n, now, holder)
        ]
        if request.node_exclusive:
            whole = [
                n
                for n in candidates
                if self.free[n] == self.nodes[n].cores
                and self.nodes[n].cores >= request.cores_per_task
            ]
            if len(whole) >= request.n_tasks:
                return Placement(tuple((n, self.nodes[n].cores) for n in whole[: request.n_tasks]))
            missing = request.n_tasks - len(whole)
            return Insufficient(deficit_cores=missing * self.max_cores, deficit_nodes=missing)

        cpt = request.cores_per_task
        remaining = request.n_tasks
        slots = []
        for n in candidates:
            fit = min(self.free[n] // cpt, remaining)
            if fit:
                slots.append((n, fit * cpt))
                remaining -= fit
            if not remaining:
                return Placement(tuple(slots))
        usable_free = sum(self.free[n] for n in candidates)
        deficit = max(request.n_tasks * cpt - usable_free, 0) or remaining * cpt
        return Insufficient(
            deficit_cores=deficit, deficit_nodes=math.ceil(deficit / self.max_cores)
        )

    def commit(
        self,
        job_id: int,
        placement: Placement,
        now: float = 0.0,
        user: str = "",
        spot: bool = False,
    ):
        if job_id in self.allocations:
            raise DoubleCommit(job_id)
        for node_id, cores in placement.slots:
            if node_id not in self.nodes:
                raise UnknownJob(job_id)
            if cores > self.free[node_id]:
                msg = _("Node {} has only {} free cores.").format(node_id, self.free[node_id])
                raise DoubleCommit(job_id, msg)
        self._meter(now)
        for node_id, cores in placement.slots:
            self.free[node_id] -= cores
        alloc = Allocation(slots=placement.slots, user=user, spot=spot)
        self.allocations[job_id] = alloc
        self._account(alloc, +1)
        self.release_holds(job_id)

    def release(
        self,
        job_id: int,
        now: float = 0.0,
        drain: float = 0.0,
        hold_for: Optional[int] = None,
    ) -> Tuple[int, ...]:
        """Free a job's cores; with ``drain`` the nodes stay unusable until ``now + drain``,
        with ``hold_for`` they are reserved for that job once usable."""
        alloc = self.allocations.pop(job_id, None)
        if alloc is None:
            raise UnknownJob(job_id)
        self._meter(now)
        for node_id, cores in alloc.slots:
            self.free[node_id] += cores
            if drain > 0:
                self.draining[node_id] = max(self.draining.get(node_id, now), now + drain)
            if hold_for is not None:
                self.held[node_id] = hold_for
        self._account(alloc, -1)
        return alloc.node_ids

    def release_holds(self, job_id: int) -> List[int]:
        nodes = [n for n, holder in self.held.items() if holder == job_id]
        for n in nodes:
            del self.held[n]
        return nodes

    def holds_of(self, job_id: int) -> List[int]:
        return sorted(n for n, holder in self.held.items() if holder == job_id)

    def expire_drains(self, now: float):
        for node_id in [n for n, until in self.draining.items() if until <= now]:
            del self.draining[node_id]

    def finalize(self, now: float):
        self._meter(now)

    def copy(self) -> "ClusterState":
        "Scratch copy used to replay future releases without touching this state."
        clone = ClusterState(self.config)
        clone.free = dict(self.free)
        clone.allocations = dict(self.allocations)
        clone.draining = dict(self.draining)
        clone.held = dict(self.held)
        clone._spot_on_node = Counter(self._spot_on_node)
        clone._normal_on_node = Counter(self._normal_on_node)
        clone._user_spot_on_node = {u: Counter(c) for u, c in self._user_spot_on_node.items()}
        return clone

    def check(self):
        "Assert conservation, no over-subscription and consistent spot accounting."
        allocated: Counter = Counter()
        spot_nodes: Dict[str, set] = {}
        for alloc in self.allocations.values():
            for node_id, cores in alloc.slots:
                allocated[node_id] += cores
                if alloc.spot:
                    spot_nodes.setdefault(alloc.user, set()).add(node_id)
        for node_id, node in self.nodes.items():
            assert 0 <= self.free[node_id] <= node.cores, f"node {node_id} over-subscribed"
            assert allocated[node_id] + self.free[node_id] == node.cores, f"node {node_id} leaks"
        expected = {user: len(nodes) for user, nodes in spot_nodes.items()}
        assert self.per_user_spot_nodes == expected, "spot accounting out of sync"

    def _meter(self, now: float):
        self.usage.advance(now, self.spot_nodes(), self.interactive_nodes())

    def _account(self, alloc: Allocation, sign: int):
        if alloc.spot:
            per_user = self._user_spot_on_node.setdefault(alloc.user, Counter())
            for node_id in alloc.node_ids:
                self._spot_on_node[node_id] += sign
                per_user[node_id] += sign
        else:
            for node_id in alloc.node_ids:
                self._normal_on_node[node_id] += sign


@dataclass(frozen=True)
class ClusterShape:
    "Homogeneous cluster dimensions as written in a scenario."

    nodes: int
    cores_per_node: int
    per_user_limit_nodes: Optional[int] = None

    def validate(self):
        if self.nodes <= 0:
            raise ConfigError("cluster.nodes", _("must be positive."))
        if self.cores_per_node <= 0:
            raise ConfigError("cluster.cores_per_node", _("must be positive."))
        limit = self.per_user_limit_nodes
        if limit is not None and not 0 <= limit <= self.nodes:
            raise ConfigError(
                "cluster.per_user_limit_nodes", _("must be between 0 and the node count.")
            )

    @property
    def total_cores(self) -> int:
        return self.nodes * self.cores_per_node

    @property
    def limit_nodes(self) -> int:
        return self.nodes if self.per_user_limit_nodes is None else self.per_user_limit_nodes
