# -*- coding: UTF-8 -*-

from enum import Enum
from json import dumps
from typing import Any


def _fallback(value: Any):
    try:
        return list(iter(value))
    except TypeError:
        return str(value)


class Record(object):
    """
    Plain value object: public attributes render to a dict of primitives
    (enums by value, nested records as dicts, sequences as lists) and to
    sorted-key JSON for log lines.
    """

    def as_dict(self) -> dict:
        return {
            key: self._render(key, value)
            for key, value in vars(self).items()
            if not key.startswith("_")
        }

    def _render(self, key: str, value: Any) -> Any:
        if isinstance(value, Record):
            return value.as_dict()
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, dict):
            return {name: self._render(name, item) for name, item in value.items()}
        if isinstance(value, (list, tuple)):
            return [self._render(key, item) for item in value]
        return value

    def as_json(self) -> str:
        return dumps(self.as_dict(), default=_fallback, sort_keys=True)

    def __repr__(self) -> str:
        fields = ", ".join(f"{key}={value!r}" for key, value in self.as_dict().items())
        return f"{type(self).__name__}({fields})"

    def __str__(self) -> str:
        return self.as_json()
