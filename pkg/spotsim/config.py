"""
Scenario files.

A scenario file is INI text with the sections ``cluster``, ``scheduler``,
``cost_model``, ``agent``, ``workload`` and ``timeline``. Absent keys take
their defaults; unknown sections and keys are rejected.

>>> scenario = parse_config('''
... [cluster]
... nodes = 19
... cores_per_node = 32
...
... [scheduler]
... approach = baseline
...
... [workload]
... job_type = triple
... size = small
... ''')
>>> scenario.scenario_id
'baseline-requeue-dual-triple-small-s0'
>>> parse_config(serialize_config(scenario)) == scenario
True

"""

import configparser
import io
import re
from dataclasses import fields
from pathlib import Path
from typing import Any
from typing import Callable
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
from .exceptions import ParseError
from .exceptions import SpotSimError
from .i18n import _
from .job import JobType
from .scheduler import CostModel
from .workload import INTERACTIVE_AT
from .workload import SPOT_USER
from .workload import Approach
from .workload import JobRequest
from .workload import Scenario
from .workload import Size

SECTIONS = ("cluster", "scheduler", "cost_model", "agent", "workload", "timeline")

_KEYS = {
    "cluster": {"nodes", "cores_per_node", "per_user_limit_nodes", "partitions"},
    "scheduler": {"approach", "mode", "preempt_order"},
    "cost_model": {f.name for f in fields(CostModel)},
    "agent": {f.name for f in fields(AgentConfig)},
    "workload": {
        "job_type",
        "size",
        "seed",
        "horizon",
        "interactive_at",
        "runs",
        "run_gap",
        "spot_job_nodes",
        "label",
    },
}

_REQUIRED = {
    "cluster": ("nodes", "cores_per_node"),
    "scheduler": ("approach",),
    "workload": ("job_type", "size"),
}


class _Reader:
    "Typed access to one parsed file, turning bad values into ConfigError with a line number."

    def __init__(self, parser: configparser.ConfigParser, text: str):
        self.parser = parser
        self.lines = text.splitlines()

    def lineno(self, section: str, key: Optional[str] = None) -> Optional[int]:
        in_section = False
        header = re.compile(r"^\s*\[(?P<name>[^\]]+)\]")
        for i, line in enumerate(self.lines, start=1):
            match = header.match(line)
            if match:
                in_section = match.group("name").strip() == section
                if in_section and key is None:
                    return i
                continue
            if in_section and key is not None and re.match(rf"^\s*{re.escape(key)}\s*[=:]", line):
                return i
        return None

    def error(self, section: str, key: Optional[str], msg: str) -> ConfigError:
        path = section if key is None else f"{section}.{key}"
        return ConfigError(path, msg, self.lineno(section, key))

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, convert: Callable[[str], Any], default: Any = None):
        if not self.has(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return convert(raw)
        except (ValueError, KeyError) as err:
            raise self.error(section, key, _("invalid value {!r} ({}).").format(raw, err)) from err


def _bool(raw: str) -> bool:
    value = configparser.ConfigParser.BOOLEAN_STATES.get(raw.lower())
    if value is None:
        raise ValueError(_("not a boolean"))
    return value


def _optional_int(raw: str) -> Optional[int]:
    return None if raw.lower() in ("", "none") else int(raw)


def _mode(raw: str) -> PreemptMode:
    return PreemptMode(raw.upper())


def _read(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as err:
        raise ParseError(err.lineno, _("key-value line outside of a section.")) from err
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as err:
        raise ParseError(err.lineno, str(err.message)) from err
    except configparser.ParsingError as err:
        lineno = err.errors[0][0] if err.errors else None
        raise ParseError(lineno, _("malformed line.")) from err
    return parser


def parse_timeline_entry(value: str) -> JobRequest:
    """``<at> <qos> <job_type> <total_tasks> [tasks_per_node=N] [run=S] [user=U]
    [cores_per_task=C] [preempt_first]``

    >>> request = parse_timeline_entry("310.5 normal triple 128 tasks_per_node=32 run=600")
    >>> request.at, request.job_type.value, request.tasks_per_node, request.run_seconds
    (310.5, 'triple', 32, 600.0)

    """
    tokens = value.split()
    if len(tokens) < 4:
        raise ValueError(_("expected '<at> <qos> <job_type> <total_tasks>'"))
    at, qos, job_type, total = tokens[:4]
    if qos not in (NORMAL, SPOT):
        raise ValueError(_("unknown QoS {!r}").format(qos))
    options: Dict[str, Any] = {}
    for token in tokens[4:]:
        if token == "preempt_first":
            options["preempt_first"] = True
            continue
        key, sep, raw = token.partition("=")
        if not sep:
            raise ValueError(_("unexpected token {!r}").format(token))
        if key == "tasks_per_node":
            options["tasks_per_node"] = int(raw)
        elif key == "run":
            options["run_seconds"] = float(raw)
        elif key == "user":
            options["user"] = raw
        elif key == "cores_per_task":
            options["cores_per_task"] = int(raw)
        else:
            raise ValueError(_("unknown option {!r}").format(key))
    if qos == SPOT:
        options.setdefault("user", SPOT_USER)
    return JobRequest(float(at), qos, JobType(job_type), int(total), **options)


def format_timeline_entry(request: JobRequest) -> str:
    parts = [
        repr(float(request.at)),
        request.qos,
        request.job_type.value,
        str(request.total_tasks),
    ]
    if request.tasks_per_node is not None:
        parts.append(f"tasks_per_node={request.tasks_per_node}")
    parts.append(f"run={float(request.run_seconds)!r}")
    parts.append(f"user={request.user}")
    parts.append(f"cores_per_task={request.cores_per_task}")
    if request.preempt_first:
        parts.append("preempt_first")
    return " ".join(parts)


def parse_config(text: str) -> Scenario:
    """Parse and validate a scenario file."""
    parser = _read(text)
    reader = _Reader(parser, text)

    for section in parser.sections():
        if section not in SECTIONS:
            raise reader.error(section, None, _("unknown section."))
        if section == "timeline":
            continue
        for key in parser[section]:
            if key not in _KEYS[section]:
                raise reader.error(section, key, _("unknown key."))
    for section, keys in _REQUIRED.items():
        for key in keys:
            if not reader.has(section, key):
                raise ConfigError(f"{section}.{key}", _("is required."))

    mode = reader.get("scheduler", "mode", _mode, PreemptMode.REQUEUE)
    if mode in REJECTED_MODES:
        raise reader.error("scheduler", "mode", REJECTED_MODES[mode])
    preempt_order = reader.get("scheduler", "preempt_order", str, "youngest_first")
    if preempt_order != "youngest_first":
        raise reader.error("scheduler", "preempt_order", _("Only 'youngest_first' is supported."))
    approach = reader.get("scheduler", "approach", Approach)

    cluster = ClusterShape(
        nodes=reader.get("cluster", "nodes", int),
        cores_per_node=reader.get("cluster", "cores_per_node", int),
        per_user_limit_nodes=reader.get("cluster", "per_user_limit_nodes", _optional_int),
    )
    cost_model = CostModel(
        **{
            f.name: reader.get("cost_model", f.name, int if f.type is int else float)
            for f in fields(CostModel)
            if reader.has("cost_model", f.name)
        }
    )

    agent = None
    if parser.has_section("agent") or approach is Approach.CRON:
        agent = AgentConfig(
            interval=reader.get("agent", "interval", float, 60.0),
            reserve_nodes=reader.get("agent", "reserve_nodes", _optional_int),
            per_user_quota=reader.get("agent", "per_user_quota", _bool, False),
            first_tick=reader.get("agent", "first_tick", float, 0.0),
        )

    extra: List[JobRequest] = []
    if parser.has_section("timeline"):
        for key in parser["timeline"]:
            extra.append(reader.get("timeline", key, parse_timeline_entry))

    workload: Dict[str, Tuple[Callable[[str], Any], Any]] = {
        "seed": (int, 0),
        "horizon": (float, 1200.0),
        "interactive_at": (float, INTERACTIVE_AT),
        "runs": (int, 1),
        "run_gap": (float, 120.0),
        "spot_job_nodes": (_optional_int, None),
        "label": (str, None),
    }
    scenario = Scenario(
        cluster=cluster,
        approach=approach,
        job_type=reader.get("workload", "job_type", JobType),
        size=reader.get("workload", "size", Size),
        mode=mode,
        partitions=reader.get("cluster", "partitions", Layout, Layout.DUAL),
        cost_model=cost_model,
        agent=agent,
        extra=tuple(extra),
        **{
            key: reader.get("workload", key, conv, default)
            for key, (conv, default) in workload.items()
        },
    )
    try:
        return scenario.validate()
    except ConfigError as err:
        section, _sep, key = err.path.partition(".")
        if err.lineno is not None or section not in SECTIONS:
            raise
        lineno = reader.lineno(section, key.split(".")[0] or None)
        raise ConfigError(err.path, err.msg, lineno) from err
    except SpotSimError as err:
        raise ConfigError("workload", str(err)) from err


def serialize_config(scenario: Scenario) -> str:
    "Write every field explicitly, so the text parses back to an equal scenario."
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    shape = scenario.cluster
    parser["cluster"] = {
        "nodes": str(shape.nodes),
        "cores_per_node": str(shape.cores_per_node),
        "per_user_limit_nodes": str(shape.per_user_limit_nodes),
        "partitions": Layout(scenario.partitions).value,
    }
    parser["scheduler"] = {
        "approach": scenario.approach.value,
        "mode": PreemptMode(scenario.mode).value,
        "preempt_order": "youngest_first",
    }
    parser["cost_model"] = {
        f.name: repr(getattr(scenario.cost_model, f.name)) for f in fields(CostModel)
    }
    if scenario.agent is not None:
        agent = scenario.agent
        parser["agent"] = {
            "interval": repr(float(agent.interval)),
            "reserve_nodes": str(agent.reserve_nodes),
            "per_user_quota": str(agent.per_user_quota).lower(),
            "first_tick": repr(float(agent.first_tick)),
        }
    workload = {
        "job_type": scenario.job_type.value,
        "size": scenario.size.value,
        "seed": str(scenario.seed),
        "horizon": repr(float(scenario.horizon)),
        "interactive_at": repr(float(scenario.interactive_at)),
        "runs": str(scenario.runs),
        "run_gap": repr(float(scenario.run_gap)),
        "spot_job_nodes": str(scenario.spot_job_nodes),
    }
    if scenario.label:
        workload["label"] = scenario.label
    parser["workload"] = workload
    if scenario.extra:
        parser["timeline"] = {
            f"job{i}": format_timeline_entry(request) for i, request in enumerate(scenario.extra)
        }
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def load_config(path: "str | Path") -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(str(path), _("can't read the scenario file ({}).").format(err.strerror))
    return parse_config(text)

