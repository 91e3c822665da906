"""
Reports written to standard output.

Reports are JSON documents. Apart from ``wall_clock_seconds`` the body
depends only on the input, the options and the chainstab version, so
identical invocations produce identical reports.
"""

import csv
import io
import json

from ._version import __version__
from .lift import LiftedSystem
from .subshift import format_word
from .systemfile import ParsedSystem, input_hash

TRACE_FIELDS = [
    "n",
    "lower",
    "upper",
    "best_lower",
    "best_upper",
    "lower_witness",
    "upper_witness",
    "direct_upper",
]


def new_report(command, parsed: ParsedSystem, options):
    """The common head of every report"""
    system = parsed.system
    return {
        "command": command,
        "version": __version__,
        "input_hash": input_hash(parsed.data),
        "system": {"size": system.size, "dimension": system.dimension},
        "options": dict(options),
    }


def add_bounds(report, bounds, verdict=None):
    report["bounds"] = bounds.to_dict()
    if verdict is not None:
        report["verdict"] = verdict.to_dict()
    return report


def lift_body(lift: LiftedSystem):
    return {
        "lifted_dimension": lift.size * lift.dimension,
        "lifted": [m.tolist() for m in lift.lifted],
    }


def words_body(words, mode, n):
    words = [format_word(w) for w in words]
    return {"mode": mode, "length": n, "count": len(words), "words": words}


def render(report, wall_clock=None):
    """Serialize a report as indented JSON

    NaN and infinities are not valid JSON and are rejected.
    """
    if wall_clock is not None:
        report = dict(report, wall_clock_seconds=wall_clock)
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def trace_csv(bounds):
    """The per-length trace as CSV, for plotting

    Witness words are written as dash separated 1-based indices.
    """
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=TRACE_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in bounds.trace():
        row = dict(row)
        for key in ("lower_witness", "upper_witness"):
            if row[key] is not None:
                row[key] = "-".join(str(i) for i in row[key])
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return out.getvalue()
