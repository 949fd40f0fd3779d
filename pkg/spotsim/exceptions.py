from typing import TYPE_CHECKING

from .i18n import _

if TYPE_CHECKING:
    from .preemption import Need


class SpotSimError(Exception):
    "Base exception for this project, all exceptions that can be raised inherit from this class."


class ConfigError(SpotSimError):
    """A scenario, cluster or cost-model setting is invalid.

    ``path`` names the offending field as ``section.key``.
    """

    def __init__(self, path: str, msg: str, lineno: "int | None" = None):
        self.path = path
        self.msg = msg
        self.lineno = lineno
        where = path if lineno is None else _("{} (line {})").format(path, lineno)
        super().__init__(_("{}: {}").format(where, msg))


class ParseError(SpotSimError):
    "The scenario file is not well-formed sectioned key-value text."

    def __init__(self, lineno: "int | None", msg: str):
        self.lineno = lineno
        super().__init__(_("line {}: {}").format(lineno, msg))


class ValidationError(SpotSimError):
    "A job specification is malformed."


class SchedulingInPast(SpotSimError):
    "An event was scheduled before the current simulation clock."

    def __init__(self, t: float, clock: float):
        self.t = t
        self.clock = clock
        msg = _("Can't schedule an event at {} when the clock is at {}.")
        super().__init__(msg.format(t, clock))


class DoubleCommit(SpotSimError):
    "The job already holds an allocation, or the placement is no longer free."

    def __init__(self, job_id: int, msg: "str | None" = None):
        self.job_id = job_id
        if msg is None:
            msg = _("Job {} is already allocated.").format(job_id)
        super().__init__(msg)


class UnknownJob(SpotSimError):
    "There's no job, or no allocation, with the given id."

    def __init__(self, job_id: int):
        self.job_id = job_id
        super().__init__(_("Unknown job {}.").format(job_id))


class NotRunning(SpotSimError):
    "The job must be running for the requested operation."

    def __init__(self, job_id: int, state=None):
        self.job_id = job_id
        self.state = state
        super().__init__(_("Job {} is not running (state: {}).").format(job_id, state))


class NotSpot(SpotSimError):
    "Only jobs under the spot QoS can be preempted."

    def __init__(self, job_id: int):
        self.job_id = job_id
        super().__init__(_("Job {} is not a spot job and can't be preempted.").format(job_id))


class InsufficientEvenAfterPreemption(SpotSimError):
    "Preempting every running spot job would still not free enough resources."

    def __init__(self, job_id: int, needed: "Need"):
        self.job_id = job_id
        self.needed = needed
        super().__init__(
            _("Job {} needs {} cores / {} nodes, more than all spot jobs hold.").format(
                job_id, needed.cores, needed.nodes
            )
        )


class NotFullyDispatched(SpotSimError):
    "The measured job still has units waiting for dispatch at the end of the log."

    def __init__(self, key: str, dispatched: int, expected: int):
        self.key = key
        self.dispatched = dispatched
        self.expected = expected
        super().__init__(
            _("{} dispatched {} of {} units.").format(key, dispatched, expected)
        )
