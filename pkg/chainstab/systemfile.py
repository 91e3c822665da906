"""
Reading and writing system files.

A system file is a JSON object::

    {
      "dimension": 1,
      "matrices": [[[2.0]], [[0.3333333333333333]]],
      "sign_matrix": [[0, 1], [1, 0]],
      "initial_distribution": [0.5, 0.5],
      "schedule": {"mode": "random_perturbed", "amplitude": 0.5, "seed": 7}
    }

`initial_distribution` and `schedule` are optional. Problems are
reported as InvalidInput with a JSON path (``$.sign_matrix[0]``) as
location.
"""

import json
import os
from collections import namedtuple

import jsonschema
from jsonschema.exceptions import best_match

from .errors import InvalidInput
from .lift import MatrixSystem
from .linalg import as_matrix
from .markov_sim import Constant, PeriodicList, RandomPerturbed
from .subshift import validate_sign_matrix
from .utils import blake2b_hexdigest, canonical_json

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "schemas", "system.json")

with open(SCHEMA_PATH) as f:
    SYSTEM_SCHEMA = json.load(f)

_validator = jsonschema.Draft7Validator(SYSTEM_SCHEMA)

ParsedSystem = namedtuple("ParsedSystem", ["system", "schedule", "data"])
ParsedSystem.__doc__ = """A validated system file

system: the MatrixSystem
schedule: the TransitionSchedule, or None when the file has neither
  a schedule nor an initial distribution
data: the decoded JSON document
"""


def input_hash(data):
    """Hash of the canonical form of a decoded system file"""
    return blake2b_hexdigest(canonical_json(data).encode("utf8"))


def _read(source):
    if isinstance(source, os.PathLike) or not str(source).lstrip().startswith("{"):
        with open(source, encoding="utf8") as f:
            return f.read()
    return source


def _relocated(e: InvalidInput, path):
    location = path if not e.location else f"{path} ({e.location})"
    return InvalidInput(e.message, location=location)


def _parse_schedule(data, sign):
    initial = data.get("initial_distribution")
    schedule = data.get("schedule")
    if schedule is None:
        if initial is None:
            return None
        schedule = {"mode": "constant"}
    mode = schedule["mode"]
    try:
        if mode == "constant":
            return Constant(sign, schedule.get("matrix"), initial=initial)
        elif mode == "periodic_list":
            return PeriodicList(sign, schedule["matrices"], initial=initial)
        else:
            return RandomPerturbed(
                sign,
                schedule.get("base"),
                amplitude=schedule.get("amplitude", 0.5),
                seed=int(schedule.get("seed", 0)),
                initial=initial,
            )
    except InvalidInput as e:
        if e.location == "initial_distribution":
            raise InvalidInput(e.message, location="$.initial_distribution") from e
        raise _relocated(e, "$.schedule") from e


def parse_system(source) -> ParsedSystem:
    """Parse and validate a system file

    source: a path, or the JSON text itself
    """
    text = _read(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInput(
            f"not valid JSON: {e.msg}", location=f"line {e.lineno} column {e.colno}"
        ) from e

    error = best_match(_validator.iter_errors(data))
    if error is not None:
        raise InvalidInput(error.message, location=error.json_path)

    try:
        sign = validate_sign_matrix(data["sign_matrix"])
    except InvalidInput as e:
        raise _relocated(e, "$.sign_matrix") from e

    d = data["dimension"]
    matrices = []
    for k, grid in enumerate(data["matrices"]):
        path = f"$.matrices[{k}]"
        try:
            m = as_matrix(grid, name=f"matrix {k + 1}")
        except InvalidInput as e:
            raise InvalidInput(e.message, location=path) from e
        if m.shape != (d, d):
            raise InvalidInput(
                f"matrix {k + 1} is {m.shape[0]}x{m.shape[1]}, expected {d}x{d}",
                location=path,
            )
        matrices.append(m)

    if len(matrices) != sign.size:
        raise InvalidInput(
            f"{len(matrices)} matrices but the sign matrix is {sign.size}x{sign.size}",
            location="$.matrices",
        )
    system = MatrixSystem(matrices, sign)
    schedule = _parse_schedule(data, sign)
    return ParsedSystem(system, schedule, data)


def system_to_dict(system: MatrixSystem, schedule=None):
    """The JSON document describing `system` (and `schedule`)"""
    data = {
        "dimension": system.dimension,
        "matrices": [m.tolist() for m in system.matrices],
        "sign_matrix": system.sign.tolist(),
    }
    if schedule is not None:
        data["initial_distribution"] = schedule.initial.tolist()
        data["schedule"] = schedule.to_dict()
    return data


def emit_system(system: MatrixSystem, schedule=None) -> str:
    """Serialize a system file; :func:`parse_system` reads it back exactly

    Floats are written in their shortest round-trip form.
    """
    return json.dumps(system_to_dict(system, schedule), indent=2) + "\n"
