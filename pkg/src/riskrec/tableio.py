"""CSV and JSON artifact helpers shared by every pipeline stage.

All delimited outputs start with a ``#`` comment line carrying the tool
version and the config seed, so any artifact can be traced back to the run
that produced it. Readers skip blank lines and ``#`` comments.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import InputError

TOOL_NAME = "riskrec"


def _version() -> str:
    from . import __version__

    return __version__


def stamp(seed: int | None) -> str:
    """Comment line embedded at the top of every delimited output file."""
    return f"# {TOOL_NAME} {_version()} seed={seed if seed is not None else 'none'}"


def format_float(value: float) -> str:
    # repr of a Python float round-trips exactly and is byte-stable
    return repr(float(value))


def write_table(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    *,
    seed: int | None = None,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(stamp(seed) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([str(field) for field in row])


def iter_table(path: str | Path) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` for every data line of a CSV artifact."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, next(csv.reader([line]))


def read_table(path: str | Path, expected_header: Sequence[str] | None = None) -> list[tuple[int, list[str]]]:
    """Read a CSV artifact, validate its header row, return the data rows."""
    rows = list(iter_table(path))
    if not rows:
        if expected_header is not None:
            raise InputError("missing header row", path=str(path))
        return []
    header_line, header = rows[0]
    if expected_header is not None and header != list(expected_header):
        raise InputError(
            f"expected header {list(expected_header)}, found {header}",
            path=str(path),
            line=header_line,
        )
    return rows[1:]


def parse_float(field: str, *, path: str | Path, line: int, column: str) -> float:
    try:
        return float(field)
    except ValueError:
        raise InputError(f"column {column!r}: not a number: {field!r}", path=str(path), line=line) from None


def parse_count(field: str, *, path: str | Path, line: int, column: str) -> int:
    try:
        value = int(field)
    except ValueError:
        raise InputError(f"column {column!r}: not an integer: {field!r}", path=str(path), line=line) from None
    if value < 0:
        raise InputError(f"column {column!r}: negative count: {value}", path=str(path), line=line)
    return value


def parse_bit(field: str, *, path: str | Path, line: int, column: str) -> bool:
    if field not in ("0", "1"):
        raise InputError(f"column {column!r}: expected 0 or 1, found {field!r}", path=str(path), line=line)
    return field == "1"


def write_json(path: str | Path, payload: dict, *, seed: int | None = None) -> None:
    """Write a JSON artifact; seed and version travel as fields (JSON has no comments)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    body.setdefault("seed", seed)
    body.setdefault("version", _version())
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
