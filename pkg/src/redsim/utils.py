# -*- coding: UTF-8 -*-

from os import makedirs
from os.path import dirname, realpath, exists
from typing import Iterable, List
from zlib import crc32


def ensure_folder(path: str):
    """
    Read the file path and recursively create the folder structure if needed.
    """
    path: str = dirname(realpath(path))

    if not exists(path):
        make_dirs(path)


def make_dirs(path: str):
    """Checks if a folder path exists and create one if not."""
    try:
        makedirs(path)
    except FileExistsError:
        pass


def stable_hash(label: str) -> int:
    """
    Platform and process independent 32-bit hash of `label`
    (the builtin `hash` is salted per interpreter).
    """
    return crc32(label.encode("UTF-8"))


def fixed(value: float, digits: int = 6) -> str:
    """Fixed-precision decimal text; `-0` is normalized to `0`."""
    text = f"{value:.{digits}f}"
    if text.startswith("-") and float(text) == 0:
        return text[1:]
    return text


def percent(value: float, digits: int = 2) -> str:
    return fixed(100 * value, digits)


def mbps(bits_per_second: float, digits: int = 2) -> str:
    return fixed(bits_per_second / 1e6, digits)


def parse_bool(value: str) -> bool:
    text = value.strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{value}'")


def format_value(value) -> str:
    """Render a resolved scenario value the way a scenario file spells it."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def align_columns(rows: Iterable[List[str]]) -> str:
    """Left-align the first column, right-align the rest."""
    rows = [list(row) for row in rows]
    if not rows:
        return ""
    widths = [
        max(len(row[idx]) for row in rows if idx < len(row))
        for idx in range(max(len(row) for row in rows))
    ]
    lines = []
    for row in rows:
        cells = [
            cell.ljust(widths[idx]) if idx == 0 else cell.rjust(widths[idx])
            for idx, cell in enumerate(row)
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
