"""
Victim ordering shared by every preemption path.

Both the scheduler's automatic preemption and the external requeue paths walk
running spot jobs from the most recently recognized one backwards:

>>> jobs = [Candidate(1, 1.0, nodes=3), Candidate(2, 2.0, nodes=2), Candidate(3, 3.0, nodes=1)]
>>> [c.job_id for c in minimal_prefix(youngest_first(jobs), Need(nodes=2))]
[3, 2]

"""

from dataclasses import dataclass
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence


@dataclass(frozen=True)
class Need:
    cores: int = 0
    nodes: int = 0

    def __bool__(self):
        return self.cores > 0 or self.nodes > 0


@dataclass(frozen=True)
class Candidate:
    job_id: int
    recognized_at: float
    nodes: int
    cores: int = 0


def youngest_first(candidates: Iterable[Candidate]) -> List[Candidate]:
    "Latest recognition first; ties go to the larger job id."
    return sorted(candidates, key=lambda c: (c.recognized_at, c.job_id), reverse=True)


def minimal_prefix(ordered: Sequence[Candidate], need: Need) -> Optional[List[Candidate]]:
    """Shortest prefix of ``ordered`` whose combined footprint covers ``need``.

    Returns ``None`` when even the whole sequence falls short.

    >>> minimal_prefix([Candidate(1, 0.0, nodes=1)], Need())
    []
    >>> minimal_prefix([Candidate(1, 0.0, nodes=1)], Need(nodes=2)) is None
    True

    """
    if not need:
        return []
    nodes = cores = 0
    for i, candidate in enumerate(ordered, start=1):
        nodes += candidate.nodes
        cores += candidate.cores
        if nodes >= need.nodes and cores >= need.cores:
            return list(ordered[:i])
    return None


def select_lifo_victims(candidates: Iterable[Candidate], deficit_nodes: int) -> List[int]:
    """Job ids to requeue, newest first, until ``deficit_nodes`` are covered.

    When the running spot jobs can't cover the deficit, all of them are returned.

    >>> jobs = [Candidate(1, 1.0, nodes=3), Candidate(2, 2.0, nodes=2), Candidate(3, 3.0, nodes=1)]
    >>> select_lifo_victims(jobs, 2)
    [3, 2]
    >>> select_lifo_victims(jobs, 0)
    []
    >>> select_lifo_victims(jobs, 9)
    [3, 2, 1]

    """
    ordered = youngest_first(candidates)
    chosen = minimal_prefix(ordered, Need(nodes=max(0, deficit_nodes)))
    return [c.job_id for c in (ordered if chosen is None else chosen)]
