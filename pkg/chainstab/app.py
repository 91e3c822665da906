"""
The chainstab application
"""

import logging
import sys
import time

import tornado.log
import tornado.options
from traitlets import Bool, Enum, Integer, TraitError, Unicode, default
from traitlets.config import Application
from traitlets.config.loader import ArgumentError, KVArgParseConfigLoader

from ._version import __version__
from .errors import (
    ChainStabError,
    CountSaturated,
    EnumerationCapExceeded,
    InvalidInput,
)
from .events import EventLog
from .jsr import RadiusEstimator, SpectralBounds, Stability
from .lift import build_lift
from .markov_sim import Constant, LyapunovSimulator
from .metrics import ANALYSIS_TIME, write_metrics
from .report import add_bounds, lift_body, new_report, render, trace_csv, words_body
from .subshift import WordMode, count_admissible, enumerate_words
from .systemfile import input_hash, parse_system
from .utils import CountSpecification

EXIT_ERROR = 1
EXIT_UNDECIDED = 2


class _StrictLoader(KVArgParseConfigLoader):
    """Command line loader that rejects unknown options instead of warning"""

    def _handle_unrecognized_alias(self, arg):
        raise ArgumentError(f"Unrecognized option: '--{arg}'")


class ChainStab(Application):
    """Decide stability of matrix products driven by a Markov chain"""

    name = "chainstab"
    version = __version__
    description = """
    Bound the spectral radius of a set of matrices whose products follow
    the allowed transitions of a Markov chain, decide uniform exponential
    stability, and estimate Lyapunov exponents by simulation.
    """
    examples = """
    chainstab stability --max-len 10 system.json
    chainstab words --mode periodic --len 2 system.json
    chainstab simulate --trajectories 100 --steps 100000 --seed 1 system.json
    """

    @default("log_level")
    def _log_level(self):
        return logging.INFO

    aliases = {
        "log-level": "Application.log_level",
        "f": "ChainStab.config_file",
        "config": "ChainStab.config_file",
    }

    flags = {
        "debug": (
            {"ChainStab": {"debug": True}},
            "Enable debug logging",
        )
    }

    subcommands = {
        "stability": (
            "chainstab.app.StabilityCommand",
            "Bound the spectral radius and decide uniform exponential stability.",
        ),
        "radius-trace": (
            "chainstab.app.RadiusTraceCommand",
            "Per-length lower and upper bounds, as JSON or CSV for plotting.",
        ),
        "lift": (
            "chainstab.app.LiftCommand",
            "Print the lifted matrices of a system.",
        ),
        "words": (
            "chainstab.app.WordsCommand",
            "List the admissible, periodic or free words of a given length.",
        ),
        "simulate": (
            "chainstab.app.SimulateCommand",
            "Estimate Lyapunov exponents along sampled trajectories.",
        ),
    }

    config_file = Unicode(
        "chainstab_config.py",
        help="""
        Config file to load.

        If a relative path is provided, it is taken relative to current directory
        """,
        config=True,
    )

    debug = Bool(
        False,
        help="Turn on debug logging",
        config=True,
    )

    def _create_loader(self, argv, aliases, flags, classes):
        return _StrictLoader(
            argv,
            aliases,
            flags,
            classes=classes,
            log=self.log,
            subcommands=self.subcommands,
        )

    def initialize(self, *args, **kwargs):
        """Load configuration settings."""
        super().initialize(*args, **kwargs)
        if self.subapp is not None:
            return
        self.load_config_file(self.config_file)
        # hook up tornado logging, which writes to stderr
        if self.debug:
            self.log_level = logging.DEBUG
        tornado.options.options.logging = logging.getLevelName(self.log_level)
        tornado.log.enable_pretty_logging()
        self.log = tornado.log.app_log

    def start(self):
        if self.subapp is not None:
            return self.subapp.start()
        self.print_subcommands()
        self.exit(EXIT_ERROR)


class SystemCommand(ChainStab):
    """Base class for commands that analyse one system file

    Subclasses implement :meth:`run`, returning the report and a status
    of "success" or "undecided".
    """

    subcommands = {}

    aliases = {
        **ChainStab.aliases,
        "system": "SystemCommand.system_file",
        "metrics-file": "SystemCommand.metrics_file",
    }

    system_file = Unicode(
        "",
        help="""
        System file to analyse.

        May also be given as the only positional argument.
        """,
        config=True,
    )

    metrics_file = Unicode(
        "",
        help="""
        Write Prometheus metrics to this file after the run,
        for a node-exporter textfile collector.
        """,
        config=True,
    )

    classes = [ChainStab, EventLog]

    def _system_path(self):
        paths = list(self.extra_args)
        if self.system_file:
            paths.insert(0, self.system_file)
        if len(paths) != 1:
            raise InvalidInput(
                f"expected exactly one system file, got {len(paths)}: {' '.join(paths)}"
            )
        return paths[0]

    def run(self, parsed):
        raise NotImplementedError()

    def options(self):
        """The options echoed into the report"""
        return {}

    def render(self, report, duration):
        return render(report, wall_clock=duration)

    def start(self):
        self.event_log = EventLog(parent=self)
        tic = time.perf_counter()
        parsed = None
        try:
            parsed = parse_system(self._system_path())
            report, status = self.run(parsed)
        except (ChainStabError, TraitError, OSError) as e:
            self.log.error("%s failed: %s", self.name, e)
            self.finish("failure", time.perf_counter() - tic, parsed)
            self.exit(EXIT_ERROR)
        duration = time.perf_counter() - tic
        self.finish(status, duration, parsed, report)
        sys.stdout.write(self.render(report, duration))
        sys.stdout.flush()
        if status == "undecided":
            self.exit(EXIT_UNDECIDED)

    def finish(self, status, duration, parsed, report=None):
        """Record metrics and the analysis event"""
        ANALYSIS_TIME.labels(command=self.name, status=status).observe(duration)
        event = {
            "command": self.name,
            "status": status,
            "duration_seconds": duration,
        }
        if parsed is not None:
            event["input_hash"] = input_hash(parsed.data)
        if report is not None:
            verdict = report.get("verdict")
            event["verdict"] = verdict["status"] if verdict else None
        event.update(self.event_fields())
        self.event_log.emit_analysis(**event)
        if self.metrics_file:
            write_metrics(self.metrics_file)

    def event_fields(self):
        return {}


class _EstimatorCommand(SystemCommand):
    """Commands driven by a RadiusEstimator"""

    aliases = {
        **SystemCommand.aliases,
        "max-len": "RadiusEstimator.max_length",
        "gap": "RadiusEstimator.target_gap",
        "node-cap": "RadiusEstimator.node_cap",
        "margin": "RadiusEstimator.margin",
        "threads": "RadiusEstimator.threads",
        "norm": "RadiusEstimator.norm",
    }

    flags = {
        **ChainStab.flags,
        "direct": (
            {"RadiusEstimator": {"report_direct": True}},
            "Also report the direct (unlifted) norm bound per length",
        ),
    }

    classes = [ChainStab, EventLog, RadiusEstimator]

    def options(self):
        e = self.estimator
        return {
            "max_length": e.max_length,
            "target_gap": e.target_gap,
            "node_cap": e.node_cap,
            "margin": e.margin,
            "norm": e.norm,
        }

    def estimate(self, system):
        self.estimator = RadiusEstimator(parent=self)
        try:
            return self.estimator.estimate(system)
        except EnumerationCapExceeded as e:
            if isinstance(e.partial, SpectralBounds) and e.partial.records:
                self.log.error(
                    "Bracket before the cap was hit: [%.12g, %.12g] up to n=%i",
                    e.partial.best_lower,
                    e.partial.best_upper,
                    e.partial.max_length,
                )
            raise

    def event_fields(self):
        estimator = getattr(self, "estimator", None)
        return {"max_length": estimator.max_length if estimator else None}


class StabilityCommand(_EstimatorCommand):
    """Bound the spectral radius and decide uniform exponential stability

    Exits 0 on a decided verdict and 2 when the verdict is Undecided.
    """

    name = "stability"

    def run(self, parsed):
        bounds = self.estimate(parsed.system)
        verdict = self.estimator.decide(bounds)
        report = new_report(self.name, parsed, self.options())
        add_bounds(report, bounds, verdict)
        status = "undecided" if verdict.status is Stability.UNDECIDED else "success"
        return report, status


class RadiusTraceCommand(_EstimatorCommand):
    """Per-length bounds for plotting"""

    name = "radius-trace"

    aliases = {
        **_EstimatorCommand.aliases,
        "format": "RadiusTraceCommand.output_format",
    }

    output_format = Enum(
        ["json", "csv"],
        default_value="json",
        help="Output format of the trace.",
        config=True,
    )

    def run(self, parsed):
        bounds = self.estimate(parsed.system)
        report = new_report(self.name, parsed, self.options())
        add_bounds(report, bounds)
        self.bounds = bounds
        return report, "success"

    def render(self, report, duration):
        if self.output_format == "csv":
            return trace_csv(self.bounds)
        return super().render(report, duration)


class LiftCommand(SystemCommand):
    """Print the lifted matrices"""

    name = "lift"

    def run(self, parsed):
        lift = build_lift(parsed.system)
        report = new_report(self.name, parsed, self.options())
        report.update(lift_body(lift))
        return report, "success"


class WordsCommand(SystemCommand):
    """List words of one length in lexicographic order (1-based)"""

    name = "words"

    aliases = {
        **SystemCommand.aliases,
        "mode": "WordsCommand.mode",
        "len": "WordsCommand.length",
        "cap": "WordsCommand.cap",
    }

    mode = Enum(
        [m.value for m in WordMode],
        default_value=WordMode.PERIODIC.value,
        help="Which words to list: admissible, periodic or free.",
        config=True,
    )

    length = Integer(
        2,
        help="Word length.",
        config=True,
    )

    cap = CountSpecification(
        1_000_000,
        help="Maximum number of words to list (suffixes K, M, G allowed).",
        config=True,
    )

    def options(self):
        return {"mode": self.mode, "length": self.length, "cap": self.cap}

    def run(self, parsed):
        sign = parsed.system.sign
        if self.mode == WordMode.ADMISSIBLE.value:
            # fail before enumerating when the count alone exceeds the cap
            try:
                count = count_admissible(sign, self.length)
            except CountSaturated as e:
                count = e.count
            if count > self.cap:
                raise EnumerationCapExceeded(
                    f"{count} admissible words of length {self.length} exceed cap {self.cap}",
                    cap=self.cap,
                    produced=0,
                )
        words = list(enumerate_words(sign, self.length, self.mode, cap=self.cap))
        report = new_report(self.name, parsed, self.options())
        report.update(words_body(words, self.mode, self.length))
        return report, "success"


class SimulateCommand(SystemCommand):
    """Estimate Lyapunov exponents along sampled trajectories

    Uses the schedule in the system file, or a constant chain uniform
    over the allowed transitions when there is none.
    """

    name = "simulate"

    aliases = {
        **SystemCommand.aliases,
        "trajectories": "LyapunovSimulator.trajectories",
        "steps": "LyapunovSimulator.steps",
        "seed": "LyapunovSimulator.seed",
        "threads": "LyapunovSimulator.threads",
        "norm": "LyapunovSimulator.norm",
        "check-len": "LyapunovSimulator.check_length",
    }

    classes = [ChainStab, EventLog, LyapunovSimulator]

    def run(self, parsed):
        self.simulator = simulator = LyapunovSimulator(parent=self)
        schedule = parsed.schedule or Constant(parsed.system.sign)
        estimate = simulator.simulate(parsed.system, schedule)
        report = new_report(
            self.name,
            parsed,
            {
                "trajectories": simulator.trajectories,
                "steps": simulator.steps,
                "seed": simulator.seed,
                "norm": simulator.norm,
                "schedule": schedule.mode,
            },
        )
        report["lyapunov"] = estimate.to_dict()
        report["hypotheses"] = simulator.check(parsed.system)
        return report, "success"

    def event_fields(self):
        simulator = getattr(self, "simulator", None)
        return {"trajectories": simulator.trajectories if simulator else None}


main = ChainStab.launch_instance

if __name__ == "__main__":
    main()
