"""Session-log ingestion: parse raw telemetry, map interactions to components,
and aggregate per-user access counts into a sparse rating matrix.

Log grammar, one interaction per line::

    session_id,user_id,form:control:action

Consecutive lines sharing a session_id belong to the same session. Counts are
aggregated per user across all of that user's sessions; a (user, component)
pair with no interactions is a missing cell, never a stored zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import InputError, ParseError
from . import tableio

KEY_SEPARATOR = ":"

COMPONENT_MAP_HEADER = ("interaction_key", "component_id")
RATING_HEADER = ("user_id", "component_id", "count")


@dataclass(frozen=True)
class Interaction:
    """One server-side user interaction, identified by its form:control:action triple."""

    session_id: str
    form: str
    control: str
    action: str

    @property
    def key(self) -> str:
        return KEY_SEPARATOR.join((self.form, self.control, self.action))


@dataclass
class Session:
    session_id: str
    user_id: str
    interactions: list[Interaction] = field(default_factory=list)


@dataclass
class ComponentMap:
    """Lookup from interaction key to the component (method) it exercises."""

    entries: dict[str, str]

    def component_for(self, interaction: Interaction) -> str | None:
        return self.entries.get(interaction.key)


@dataclass
class RatingMatrix:
    """Sparse user x component access-frequency counts; absent cells mean "never used"."""

    users: list[str]
    components: list[str]
    cells: dict[tuple[str, str], int]

    def count(self, user_id: str, component_id: str) -> int | None:
        return self.cells.get((user_id, component_id))

    def total_count(self) -> int:
        return sum(self.cells.values())

    def validate(self) -> None:
        if len(set(self.users)) != len(self.users):
            raise InputError("duplicate user ids in rating matrix")
        if len(set(self.components)) != len(self.components):
            raise InputError("duplicate component ids in rating matrix")
        for (user, comp), count in self.cells.items():
            if count < 1:
                raise InputError(f"stored count below 1 for cell ({user}, {comp})")


def _parse_line(line_no: int, fields: list[str], *, path: str | None) -> tuple[str, str, Interaction]:
    if len(fields) != 3:
        raise ParseError(f"expected 3 comma-separated fields, found {len(fields)}", path=path, line=line_no)
    session_id, user_id, triple = fields
    parts = triple.split(KEY_SEPARATOR)
    if len(parts) != 3:
        raise ParseError(
            f"interaction {triple!r} must be form{KEY_SEPARATOR}control{KEY_SEPARATOR}action",
            path=path,
            line=line_no,
        )
    form, control, action = parts
    if not (form and control and action):
        raise ParseError(f"interaction {triple!r} has an empty part", path=path, line=line_no)
    return session_id, user_id, Interaction(session_id, form, control, action)


def parse_session_log(raw_lines: Iterable[str], *, path: str | None = None) -> list[Session]:
    """Parse raw telemetry lines into sessions.

    Consecutive lines with the same session id merge into one session in input
    order; blank lines and ``#`` comments are skipped. A line whose user
    disagrees with the open session's user is malformed: one session belongs
    to one user.
    """
    sessions: list[Session] = []
    current: Session | None = None
    for line_no, raw in enumerate(raw_lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([line]))
        session_id, user_id, interaction = _parse_line(line_no, fields, path=path)
        if current is not None and current.session_id == session_id:
            if current.user_id != user_id:
                raise ParseError(
                    f"session {session_id!r} switches user from {current.user_id!r} to {user_id!r}",
                    path=path,
                    line=line_no,
                )
            current.interactions.append(interaction)
        else:
            current = Session(session_id, user_id, [interaction])
            sessions.append(current)
    return sessions


def load_session_log(path: str | Path) -> list[Session]:
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    with path.open("r", encoding="utf-8") as handle:
        return parse_session_log(handle, path=str(path))


def map_interactions(
    sessions: Iterable[Session], component_map: ComponentMap
) -> tuple[list[tuple[str, str]], int]:
    """Turn interactions into (user_id, component_id) events, dropping unmapped ones.

    Unmapped interactions are counted rather than fatal: real telemetry is noisy.
    """
    events: list[tuple[str, str]] = []
    unmapped = 0
    for session in sessions:
        for interaction in session.interactions:
            component_id = component_map.component_for(interaction)
            if component_id is None:
                unmapped += 1
            else:
                events.append((session.user_id, component_id))
    return events, unmapped


def build_rating_matrix(events: Iterable[tuple[str, str]]) -> RatingMatrix:
    """Tally events into the sparse matrix; axis order is first appearance."""
    users: list[str] = []
    components: list[str] = []
    seen_users: set[str] = set()
    seen_components: set[str] = set()
    cells: dict[tuple[str, str], int] = {}
    for user_id, component_id in events:
        if user_id not in seen_users:
            seen_users.add(user_id)
            users.append(user_id)
        if component_id not in seen_components:
            seen_components.add(component_id)
            components.append(component_id)
        cells[(user_id, component_id)] = cells.get((user_id, component_id), 0) + 1
    return RatingMatrix(users, components, cells)


def load_component_map(path: str | Path) -> ComponentMap:
    entries: dict[str, str] = {}
    for line_no, fields in tableio.read_table(path, COMPONENT_MAP_HEADER):
        if len(fields) != 2:
            raise InputError(f"expected 2 fields, found {len(fields)}", path=str(path), line=line_no)
        key, component_id = fields
        if not component_id:
            raise InputError("empty component_id", path=str(path), line=line_no)
        if key in entries:
            raise InputError(f"duplicate interaction key {key!r}", path=str(path), line=line_no)
        entries[key] = component_id
    return ComponentMap(entries)


def write_rating_matrix(path: str | Path, matrix: RatingMatrix, *, seed: int | None = None) -> None:
    # cells are written in insertion order, so first-appearance reconstruction
    # on read restores the original axis order
    rows = ((user, comp, count) for (user, comp), count in matrix.cells.items())
    tableio.write_table(path, RATING_HEADER, rows, seed=seed)


def read_rating_matrix(path: str | Path) -> RatingMatrix:
    cells: dict[tuple[str, str], int] = {}
    users: list[str] = []
    components: list[str] = []
    seen_users: set[str] = set()
    seen_components: set[str] = set()
    for line_no, fields in tableio.read_table(path, RATING_HEADER):
        if len(fields) != 3:
            raise InputError(f"expected 3 fields, found {len(fields)}", path=str(path), line=line_no)
        user_id, component_id, raw_count = fields
        count = tableio.parse_count(raw_count, path=path, line=line_no, column="count")
        if count < 1:
            raise InputError("counts below 1 are never stored", path=str(path), line=line_no)
        if (user_id, component_id) in cells:
            raise InputError(f"duplicate cell ({user_id}, {component_id})", path=str(path), line=line_no)
        cells[(user_id, component_id)] = count
        if user_id not in seen_users:
            seen_users.add(user_id)
            users.append(user_id)
        if component_id not in seen_components:
            seen_components.add(component_id)
            components.append(component_id)
    matrix = RatingMatrix(users, components, cells)
    matrix.validate()
    return matrix
