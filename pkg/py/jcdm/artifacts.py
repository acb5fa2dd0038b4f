"""
artifacts.py
------------
Writers for the data files a command leaves behind.

Tables are comma-separated with a header row; floats are written with 17
significant digits so that a re-run from the same manifest is byte-identical.
Every run directory also gets `manifest.json` holding the full RunConfig, the
library versions and the wall time.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

from .config import RunConfig
from .errors import ConfigError

_log = logging.getLogger("jcdm.artifacts")

_VERSIONED = ("numpy", "scipy", "pydantic", "pydantic-settings", "contourpy")


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "nan" if math.isnan(value) else "%.17g" % value
    try:
        return "%.17g" % float(value)
    except (TypeError, ValueError):
        return str(value)


class ArtifactWriter:
    """Writes tables and JSON into one run directory and remembers what it wrote."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"Cannot create output directory '{self.out_dir}': {exc}") from exc
        self.written: list[str] = []

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            count = 0
            for row in rows:
                if len(row) != len(header):
                    raise ConfigError(f"{name}: row has {len(row)} cells, header has {len(header)}")
                writer.writerow([format_cell(v) for v in row])
                count += 1
        _log.debug("wrote %s (%d rows)", path, count)
        self.written.append(name)
        return path

    def json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.written.append(name)
        return path

    def manifest(self, config: RunConfig, wall_time: float, summary: Dict[str, Any]) -> Path:
        return self.json("manifest.json", {
            "config": config.to_manifest(),
            "versions": library_versions(),
            "wall_time_seconds": wall_time,
            "artifacts": sorted(set(self.written)),
            "summary": summary,
        })


def library_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _VERSIONED:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "missing"
    return versions
