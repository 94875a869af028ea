"""Append-only JSONL event logs for sessions, with crash-tail recovery."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import CorruptLog, NotFound
from .session import Session, replay


class SessionStore:
    """One events file per session under sessions/; every append is fsynced, so
    a crash loses at most the event being written."""

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or "\\" in session_id or ".." in session_id:
            raise NotFound(f"invalid session id: {session_id!r}")
        return self._dir / f"{session_id}.jsonl"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self._dir.glob("*.jsonl"))

    def append(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, ensure_ascii=False)
        with self._path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _read_events(self, session_id: str) -> tuple[list[dict], int | None]:
        """(events, corrupt_line_number). Only a corrupt *tail* is tolerated."""
        path = self._path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        events: list[dict] = []
        corrupt_at: int | None = None
        with path.open("r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
                if not isinstance(event, dict) or "op" not in event:
                    raise ValueError("not an event object")
            except ValueError as exc:
                if number == len(lines):
                    corrupt_at = number  # torn final write; earlier events stand
                    break
                raise CorruptLog(str(path), number, str(exc)) from exc
            events.append(event)
        return events, corrupt_at

    def load(self, session_id: str) -> Session:
        """Strict replay; raises CorruptLog even for a torn final line."""
        events, corrupt_at = self._read_events(session_id)
        if corrupt_at is not None:
            raise CorruptLog(str(self._path(session_id)), corrupt_at, "truncated event")
        if not events:
            raise CorruptLog(str(self._path(session_id)), 1, "empty log")
        return replay(events)

    def load_with_recovery(self, session_id: str) -> tuple[Session, int | None]:
        """Replay all fully written events; report (and drop) a torn tail line."""
        events, corrupt_at = self._read_events(session_id)
        if not events:
            raise CorruptLog(str(self._path(session_id)), corrupt_at or 1, "no replayable events")
        if corrupt_at is not None:
            self._truncate_tail(session_id, keep_events=len(events))
        return replay(events), corrupt_at

    def _truncate_tail(self, session_id: str, keep_events: int) -> None:
        path = self._path(session_id)
        kept = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if len(kept) == keep_events:
                    break
                kept.append(line.rstrip("\n"))
        tmp = path.with_suffix(".repair")
        tmp.write_text("".join(k + "\n" for k in kept), encoding="utf-8")
        tmp.replace(path)
