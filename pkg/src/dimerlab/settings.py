"""User settings for dimerlab.

The settings document is ``~/.dimerlab/dimerlab-settings.json``. It is
written with defaults the first time it is looked for and is meant to be
edited by hand. Settings cover logging and the size guards of the
brute-force routines; a printed number never depends on them.
"""

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

_DIMERLAB_DIR = Path.home() / ".dimerlab"
_DEFAULT_SETTINGS_PATH = _DIMERLAB_DIR / "dimerlab-settings.json"


@dataclass
class Settings:
    """Contents of the settings document.

    Attributes
    ----------
    log_level : str
        stderr log level used when the CLI gets no ``-v``.
    activity_log : bool
        Append CLI and MCP runs to the activity journal.
    matching_vertex_limit : int
        Vertex ceiling for exhaustive matching enumeration.
    grove_edge_limit : int
        Edge ceiling for listing groves one by one.
    forest_state_limit : int
        Frontier-table ceiling of the constrained-forest sweep.
    exact_grid_limit : int
        Grid sides up to this are tabulated in exact rationals by the
        concentration profile; larger ones go through the spectral sum.
    output_dir : str
        Where bare ``--out`` file names are written. Relative values hang
        off ``~/.dimerlab``; ``~`` is expanded.
    """

    log_level: str = "WARNING"
    activity_log: bool = True
    matching_vertex_limit: int = 72
    grove_edge_limit: int = 22
    forest_state_limit: int = 2_000_000
    exact_grid_limit: int = 12
    output_dir: str = "output"

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Settings":
        """Build settings from a decoded document, dropping unknown keys."""
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})

    def resolve_output_dir(self) -> Path:
        base = Path(self.output_dir).expanduser()
        if not base.is_absolute():
            base = _DIMERLAB_DIR / base
        return base.resolve()


def _settings_path(path: Optional[Path]) -> Path:
    return path if path is not None else _DEFAULT_SETTINGS_PATH


def load_settings(path: Optional[Path] = None) -> Settings:
    """Read the settings document.

    A missing document is created with defaults (silently skipped when
    the directory is not writable). Undecodable content gives defaults.

    Parameters
    ----------
    path : Path, optional
        Document to read instead of the one under ``~/.dimerlab``.

    Returns
    -------
    Settings
    """
    target = _settings_path(path)
    if not target.exists():
        defaults = Settings()
        try:
            save_settings(defaults, target)
        except OSError:
            pass
        return defaults
    try:
        return Settings.from_mapping(json.loads(target.read_text()))
    except (json.JSONDecodeError, TypeError, AttributeError):
        return Settings()


def save_settings(settings: Settings, path: Optional[Path] = None) -> None:
    """Write ``settings`` as indented JSON, creating the directory if needed."""
    target = _settings_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(asdict(settings), indent=2) + "\n")
