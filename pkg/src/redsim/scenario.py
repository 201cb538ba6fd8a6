# -*- coding: UTF-8 -*-

from __future__ import annotations

from os import environ
from os.path import basename, splitext
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .aqm import RedParams
from .constants import (
    OUTPUT_DEFAULTS,
    OUTPUT_DIR_ENV,
    RED_DEFAULTS,
    RUN_DEFAULTS,
    TOPOLOGY_DEFAULTS,
)
from .exceptions import ScenarioError
from .mixins import Record
from .netsim import Scenario
from .utils import format_value, parse_bool


def _text(value: str) -> str:
    value = value.strip()
    if len(value) == 0:
        raise ValueError("empty value")
    return value


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed out of the 64-bit range: {value}")
    return seed


# section -> key -> converter
SCHEMA: Dict[str, Dict[str, Callable]] = {
    "topology": {
        "groups": _text,
        "bottleneck_rate": float,
        "bottleneck_delay": float,
        "access_rate": float,
        "access_delay_jitter": float,
        "start_jitter": float,
    },
    "red": {
        "variant": _text,
        "w_q": float,
        "min_th": float,
        "max_th": float,
        "max_p": float,
        "capacity": float,
        "M": float,
    },
    "run": {
        "name": _text,
        "duration": float,
        "warmup": float,
        "drain": float,
        "seed": _seed,
    },
    "output": {
        "directory": _text,
        "trace_queue": parse_bool,
        "trace_interval": float,
        "trace_flows": parse_bool,
    },
}

DEFAULTS: Dict[str, dict] = {
    "topology": TOPOLOGY_DEFAULTS,
    "red": RED_DEFAULTS,
    "run": RUN_DEFAULTS,
    "output": OUTPUT_DEFAULTS,
}


class Entry(Record):

    def __init__(self, section: str, key: str, raw: str, value, line: Optional[int]):
        self.section = section
        self.key = key
        self.raw = raw
        self.value = value
        self.line = line


class ResolvedScenario(object):
    """A validated `Scenario` plus where its outputs go."""

    def __init__(self, scenario: Scenario, output_dir: str, source: str = None):
        self.scenario = scenario
        self.output_dir = output_dir
        self.source = source


class ScenarioFile(object):
    """
    Parsed, not yet validated, scenario file: `[section]` headers and
    `key = value` lines, `#` or `;` comments. Unknown sections or keys and
    duplicate keys are errors; missing keys take the defaults in `constants`.
    """

    def __init__(self, source: str = None):
        self.source = source
        self.entries: Dict[Tuple[str, str], Entry] = {}

    @classmethod
    def read(cls, path: str) -> ScenarioFile:
        with open(path, "r", encoding="UTF-8") as handle:
            return cls.parse(handle.read(), source=path)

    @classmethod
    def parse(cls, text: str, source: str = None) -> ScenarioFile:
        """
        :raise ScenarioError: For malformed lines, unknown sections or keys,
            duplicates and unconvertible values; the message carries the line.
        """
        instance = cls(source)
        section: Optional[str] = None

        for number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith(("#", ";")):
                continue

            if line.startswith("["):
                if not line.endswith("]"):
                    raise ScenarioError("section", f"malformed section header '{line}'!", number, source)
                section = line[1:-1].strip().lower()
                if section not in SCHEMA:
                    raise ScenarioError(
                        section, f"unknown section; expected one of ({', '.join(SCHEMA)})!", number, source
                    )
                continue

            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ScenarioError("line", f"expected 'key = value' not '{line}'!", number, source)
            if section is None:
                raise ScenarioError(key, "key outside of any section!", number, source)
            instance._set(section, key, raw.strip(), number)

        return instance

    def _set(self, section: str, key: str, raw: str, line: Optional[int]):
        schema = SCHEMA[section]
        if key not in schema:
            raise ScenarioError(
                f"{section}.{key}", f"unknown key; expected one of ({', '.join(schema)})!", line, self.source
            )
        if (section, key) in self.entries and line is not None:
            first = self.entries[(section, key)].line
            raise ScenarioError(f"{section}.{key}", f"duplicate key (first set on line {first})!", line, self.source)
        try:
            value = schema[key](raw)
        except ValueError as error:
            raise ScenarioError(f"{section}.{key}", f"invalid value '{raw}' ({error})!", line, self.source) from None
        self.entries[(section, key)] = Entry(section, key, raw, value, line)

    def copy(self) -> ScenarioFile:
        clone = ScenarioFile(self.source)
        clone.entries = dict(self.entries)
        return clone

    def override(self, dotted: str, raw: str):
        """Apply `section.key=value` on top of the file."""
        section, sep, key = dotted.partition(".")
        if not sep or section not in SCHEMA:
            raise ScenarioError(dotted, "overrides must be spelled 'section.key'!", source="override")
        self._set(section, key, raw, None)

    def get(self, section: str, key: str):
        entry = self.entries.get((section, key))
        if entry is not None:
            return entry.value
        if section == "run" and key == "name" and self.source is not None:
            return splitext(basename(self.source))[0]
        return DEFAULTS[section][key]

    def _line_of(self, field: str) -> Optional[int]:
        for (section, key), entry in self.entries.items():
            if field in (key, f"{section}.{key}"):
                return entry.line
        return None

    def resolve(self, output_dir: str = None) -> ResolvedScenario:
        """
        Validate into a `Scenario`.

        The output directory is, by precedence, `output_dir`, the
        `REDSIM_OUTPUT_DIR` environment variable, then `[output] directory`.
        """
        try:
            red_params = RedParams(**{
                key: self.get("red", key) for key in SCHEMA["red"] if key != "variant"
            })
            scenario = Scenario(
                name=self.get("run", "name"),
                groups=self.get("topology", "groups"),
                bottleneck_rate=self.get("topology", "bottleneck_rate"),
                bottleneck_delay=self.get("topology", "bottleneck_delay"),
                access_rate=self.get("topology", "access_rate"),
                access_delay_jitter=self.get("topology", "access_delay_jitter"),
                start_jitter=self.get("topology", "start_jitter"),
                variant=self.get("red", "variant"),
                red_params=red_params,
                duration=self.get("run", "duration"),
                warmup=self.get("run", "warmup"),
                drain=self.get("run", "drain"),
                seed=self.get("run", "seed"),
                trace_queue=self.get("output", "trace_queue"),
                trace_interval=self.get("output", "trace_interval"),
                trace_flows=self.get("output", "trace_flows"),
            )
        except ScenarioError as error:
            if error.line is not None or error.source is not None:
                raise
            message = str(error).partition(": ")[2]
            raise ScenarioError(error.field, message, self._line_of(error.field), self.source) from None

        directory = output_dir or environ.get(OUTPUT_DIR_ENV) or self.get("output", "directory")
        return ResolvedScenario(scenario, directory, self.source)


def load_scenario(path: str, overrides: Sequence[str] = ()) -> ScenarioFile:
    """Read `path` and apply `section.key=value` overrides in order."""
    scenario_file = ScenarioFile.read(path)
    for item in overrides:
        dotted, sep, raw = item.partition("=")
        if not sep:
            raise ScenarioError(item.strip(), "overrides must be spelled 'section.key=value'!", source="override")
        scenario_file.override(dotted.strip(), raw.strip())
    return scenario_file


def resolved_entries(resolved: ResolvedScenario) -> Dict[str, Dict[str, object]]:
    """Every key of every section with its effective value."""
    scenario = resolved.scenario
    values = scenario.as_dict()
    red = values.pop("red_params")
    return {
        "topology": {key: values[key] for key in SCHEMA["topology"]},
        "red": dict({"variant": scenario.variant}, **{key: red[key] for key in SCHEMA["red"] if key != "variant"}),
        "run": {key: values[key] for key in SCHEMA["run"]},
        "output": dict(
            {"directory": resolved.output_dir},
            **{key: values[key] for key in SCHEMA["output"] if key != "directory"}
        ),
    }


def render_scenario(sections: Dict[str, Dict[str, object]], header: List[str] = ()) -> str:
    lines = [f"# {line}" if line else "#" for line in header]
    for section, values in sections.items():
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {format_value(value)}" for key, value in values.items())
    return "\n".join(lines) + "\n"


class RunManifest(object):
    """
    Resolved scenario plus provenance, written as a scenario file so that
    running it again reproduces the run.
    """

    def __init__(self, resolved: ResolvedScenario, artifacts: List[str]):
        self.resolved = resolved
        self.seed = resolved.scenario.seed
        self.artifacts = list(artifacts)
        self.version = __version__

    def render(self) -> str:
        header = [
            f"redsim {self.version} run manifest",
            f"seed: {self.seed}",
            "artifacts: " + ", ".join(self.artifacts),
        ]
        return render_scenario(resolved_entries(self.resolved), header)
