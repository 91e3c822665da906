"""
Emit structured, discrete events when analyses finish.

Events are JSON objects validated against the schemas in
``event-schemas/`` and wrapped in a capsule carrying a timestamp,
the schema id and its version.
"""

import datetime
import json
import logging
import os

import jsonschema
from pythonjsonlogger import jsonlogger
from traitlets import Callable
from traitlets.config import Configurable

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "event-schemas")

ANALYSIS_SCHEMA = "chainstab/analysis"
ANALYSIS_VERSION = 1

# added to every capsule by the emitter
RESERVED_FIELDS = frozenset({"timestamp", "schema", "version"})


def _serialize(record, **kwargs):
    """Drop the fields the json formatter always adds but events never use"""
    record.pop("message", None)
    record.pop("taskName", None)
    return json.dumps(record, **kwargs)


def bundled_schemas():
    """All schemas shipped in event-schemas/, in file name order"""
    schemas = []
    for name in sorted(os.listdir(SCHEMA_DIR)):
        if name.endswith(".json"):
            with open(os.path.join(SCHEMA_DIR, name)) as f:
                schemas.append(json.load(f))
    return schemas


class EventLog(Configurable):
    """
    Send structured analysis events to a logging sink
    """

    handlers_maker = Callable(
        None,
        config=True,
        allow_none=True,
        help="""
        Callable that returns a list of logging.Handler instances to send events to.

        When set to None (the default), events are discarded.

        For example, to append analysis events to a file::

            c.EventLog.handlers_maker = lambda el: [logging.FileHandler("events.jsonl")]
        """,
    )

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)

        self.log = logging.getLogger(__name__)
        # events never go to the console log
        self.log.propagate = False
        self.log.setLevel(logging.INFO)

        self.handlers = []
        if self.handlers_maker:
            self.handlers = self.handlers_maker(self)
            formatter = jsonlogger.JsonFormatter(json_serializer=_serialize)
            for handler in self.handlers:
                handler.setFormatter(formatter)
                self.log.addHandler(handler)

        self.schemas = {}
        for schema in bundled_schemas():
            self.register_schema(schema)

    @property
    def enabled(self):
        return bool(self.handlers_maker)

    def register_schema(self, schema):
        """
        Register a JSON Schema with this emitter

        '$id' and 'version' are required, and the schema may not declare
        the fields the emitter adds itself.
        """
        # raises jsonschema.SchemaError for invalid schemas
        jsonschema.validators.validator_for(schema).check_schema(schema)

        missing = {"$id", "version"} - set(schema)
        if missing:
            raise ValueError(f"{', '.join(sorted(missing))} required in schema specification")

        clashes = RESERVED_FIELDS & set(schema.get("properties", {}))
        if clashes:
            raise ValueError(
                f"{', '.join(sorted(clashes))} reserved by the event emitter, can not be set in schema"
            )

        self.schemas[(schema["$id"], schema["version"])] = schema

    def emit(self, schema_name, version, event):
        """
        Validate `event` against a registered schema and emit it in a capsule.
        """
        if not self.enabled:
            return

        try:
            schema = self.schemas[(schema_name, version)]
        except KeyError:
            raise ValueError(f"Schema {schema_name} version {version} not registered")
        jsonschema.validate(event, schema)

        now_utc = datetime.datetime.now(tz=datetime.timezone.utc)
        capsule = {
            "timestamp": now_utc.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
            "schema": schema_name,
            "version": version,
            **event,
        }
        self.log.info(capsule)

    def emit_analysis(self, **fields):
        """Emit a chainstab/analysis event"""
        self.emit(ANALYSIS_SCHEMA, ANALYSIS_VERSION, fields)
