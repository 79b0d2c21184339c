"""Journal of CLI and MCP runs.

Each run appends one JSON object per line to
``~/.dimerlab/data/activity.log``. Writers from several processes are
serialised with ``fcntl`` locks. Nothing here is read back into the
numbers a command prints.
"""

import fcntl
import json
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import IO, Iterator, Optional

_DIMERLAB_DIR = Path.home() / ".dimerlab"
_LOG_PATH = _DIMERLAB_DIR / "data" / "activity.log"

ACTIONS = ("count", "dist", "sample", "asym", "verify", "export")
SOURCES = ("cli", "mcp")


@dataclass
class ActivityEntry:
    """One journal line.

    Attributes
    ----------
    timestamp : str
        ISO 8601 local time of the run.
    action : str
        Subcommand family, one of ``ACTIONS``.
    source : str
        ``cli`` or ``mcp``.
    shape : str or None
        Grid in flag syntax (``rect:4x5``, ``chain:7``) if the run had one.
    details : dict
        Flags and headline results of the run.
    """

    timestamp: str
    action: str
    source: str
    shape: Optional[str] = None
    details: dict = field(default_factory=dict)

    def to_line(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, default=str) + "\n"


def get_log_path() -> Path:
    """Location of the journal (module-level so tests can redirect it)."""
    return _LOG_PATH


@contextmanager
def _locked(path: Path, mode: str) -> Iterator[IO[str]]:
    exclusive = mode != "r"
    with open(path, mode, encoding="utf-8") as f:
        fcntl.flock(f.fileno(), fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        try:
            yield f
        finally:
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)


def log_activity(action: str, source: str, shape: Optional[str] = None, **details) -> None:
    """Append a run to the journal.

    Parameters
    ----------
    action : str
        One of ``ACTIONS``.
    source : str
        One of ``SOURCES``.
    shape : str, optional
        Grid in flag syntax.
    **details
        JSON-serialisable run data; other values are written with ``str``.

    Raises
    ------
    ValueError
        On an unknown action or source.
    OSError
        If the journal cannot be written.
    """
    if action not in ACTIONS:
        raise ValueError(f"Unknown activity action: {action!r}")
    if source not in SOURCES:
        raise ValueError(f"Unknown activity source: {source!r}")
    entry = ActivityEntry(datetime.now().isoformat(), action, source, shape, details)
    path = get_log_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    with _locked(path, "a") as f:
        f.write(entry.to_line())


def _parse(line: str) -> Optional[ActivityEntry]:
    try:
        return ActivityEntry(**json.loads(line))
    except (json.JSONDecodeError, TypeError):
        return None


def read_recent_activity(limit: int = 100, action: Optional[str] = None) -> list[ActivityEntry]:
    """Newest-first journal entries, optionally for one action only.

    Blank and unreadable lines are skipped.
    """
    path = get_log_path()
    if not path.exists():
        return []
    with _locked(path, "r") as f:
        parsed = [_parse(line) for line in f if line.strip()]
    entries = [e for e in parsed if e is not None and (action is None or e.action == action)]
    entries.sort(key=lambda e: e.timestamp, reverse=True)
    return entries[:limit]
