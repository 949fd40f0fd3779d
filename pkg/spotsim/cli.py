"""
Command-line runner: load scenarios, simulate them and write result files.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime errors.
"""

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import replace
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

from .config import load_config
from .exceptions import ConfigError
from .exceptions import ParseError
from .exceptions import SpotSimError
from .exceptions import ValidationError
from .i18n import _
from .metrics import emit
from .metrics import emit_events
from .metrics import summarize
from .runner import run_scenario
from .workload import Scenario
from .workload import builtin
from .workload import table1_matrix
from .workload import table1_skipped

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

FORMATS = ("csv", "summary", "both")
DEFAULT_OUT = "results"


@dataclass(frozen=True)
class RunFlags:
    scenario_path: Optional[str] = None
    builtin: Optional[str] = None
    table1: bool = False
    seed: Optional[int] = None
    output_dir: str = DEFAULT_OUT
    emit_event_log: bool = False
    fmt: str = "csv"
    jobs: int = 1

    def validate(self):
        sources = [self.scenario_path is not None, self.builtin is not None, self.table1]
        if sum(sources) != 1:
            raise ConfigError("flags", _("select exactly one of --scenario, --builtin, --table1"))
        if self.fmt not in FORMATS:
            raise ConfigError("flags.format", _("must be one of {}").format(", ".join(FORMATS)))
        if self.jobs < 1:
            raise ConfigError("flags.jobs", _("must be at least 1"))


def load_scenarios(flags: RunFlags) -> List[Scenario]:
    flags.validate()
    if flags.scenario_path is not None:
        scenarios = [load_config(flags.scenario_path)]
    elif flags.builtin is not None:
        scenarios = [builtin(flags.builtin)]
    else:
        scenarios = table1_matrix()
    if flags.seed is not None:
        scenarios = [replace(s, seed=flags.seed) for s in scenarios]
    for scenario in scenarios:
        scenario.validate()
    return scenarios


def execute(scenario: Scenario, events: bool = False, fmt: str = "csv") -> Dict[str, bytes]:
    """Run one scenario and render its output files, keyed by file name."""
    try:
        run = run_scenario(scenario)
    except SpotSimError as err:
        raise SpotSimError(f"{scenario.scenario_id}: {err}") from err
    summary = summarize(run)
    files = {}
    if fmt in ("csv", "both"):
        files[f"{scenario.scenario_id}.csv"] = emit([summary], "csv")
    if fmt in ("summary", "both"):
        files[f"{scenario.scenario_id}.summary.txt"] = emit([summary], "summary")
    if events:
        files[f"{scenario.scenario_id}.events.csv"] = emit_events(run.log)
    return files


def _execute(args: Tuple[Scenario, bool, str]) -> Dict[str, bytes]:
    return execute(*args)


def write_atomic(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def skipped_note() -> bytes:
    return "".join(f"{s.name}: {s.reason}\n" for s in table1_skipped()).encode()


def run(flags: RunFlags) -> int:
    try:
        scenarios = load_scenarios(flags)
    except (ConfigError, ParseError, ValidationError) as err:
        logger.error("%s", err)
        return EXIT_CONFIG

    work = [(scenario, flags.emit_event_log, flags.fmt) for scenario in scenarios]
    try:
        if flags.jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=flags.jobs) as pool:
                outputs = list(pool.map(_execute, work))
        else:
            outputs = [_execute(item) for item in work]
    except SpotSimError as err:
        logger.error("%s", err)
        return EXIT_RUNTIME
    except Exception:
        logger.exception("simulation failed")
        return EXIT_RUNTIME

    out = Path(flags.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for files in outputs:
            for name, data in files.items():
                write_atomic(out / name, data)
        if flags.table1:
            write_atomic(out / "skipped.txt", skipped_note())
    except OSError as err:
        logger.error("can't write results to %s: %s", out, err)
        return EXIT_RUNTIME
    logger.info("wrote %d scenario(s) to %s", len(outputs), out)
    return EXIT_OK


def list_scenarios() -> str:
    """One line per builtin scenario with its matrix coordinates."""
    lines = []
    for s in table1_matrix():
        lines.append(
            f"{s.name:<40} approach={s.approach.value} mode={s.mode.value} "
            f"partitions={s.partitions.value} job_type={s.job_type.value} size={s.size.value}"
        )
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotsim",
        description="Simulate interactive job launch latency on a cluster shared with spot jobs.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", metavar="PATH", help="scenario file to run")
    source.add_argument("--builtin", metavar="NAME", help="builtin scenario (see --list)")
    source.add_argument("--table1", action="store_true", help="run the whole experiment matrix")
    source.add_argument("--list", action="store_true", help="list builtin scenarios and exit")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument(
        "--out",
        default=os.environ.get("SPOTSIM_OUT", DEFAULT_OUT),
        help="output directory (default: $SPOTSIM_OUT or %(default)s)",
    )
    parser.add_argument("--events", action="store_true", help="also write the event log")
    parser.add_argument("--format", choices=FORMATS, default="csv", dest="fmt")
    parser.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.list:
        sys.stdout.write(list_scenarios())
        return EXIT_OK
    flags = RunFlags(
        scenario_path=args.scenario,
        builtin=args.builtin,
        table1=args.table1,
        seed=args.seed,
        output_dir=args.out,
        emit_event_log=args.events,
        fmt=args.fmt,
        jobs=args.jobs,
    )
    return run(flags)
