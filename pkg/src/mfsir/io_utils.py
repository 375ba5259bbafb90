"""Deterministic CSV writing and the experiment manifest.

Floats are written with repr (shortest round-trip form), so re-running an
experiment with the same seed produces byte-identical files at any worker
count.  Manifests are JSON with a checksum for every written artifact;
their timestamps are informational and excluded from determinism claims.
"""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

__all__ = ["format_cell", "write_csv", "sha256_file", "ExperimentManifest"]


def format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class ExperimentManifest:
    """Reproducibility record for one command invocation."""

    def __init__(self, command, config_hash: str, base_seed: int, version: str):
        self.data = {
            "command": list(command),
            "config_hash": config_hash,
            "base_seed": int(base_seed),
            "tool_version": version,
            "created_unix": time.time(),
            "outputs": {},
            "verdicts": {},
            "parameters": {},
        }

    def add_output(self, path):
        path = Path(path)
        self.data["outputs"][path.name] = sha256_file(path)

    def add_verdict(self, name: str, value):
        self.data["verdicts"][name] = value

    def add_parameters(self, **kwargs):
        self.data["parameters"].update(kwargs)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return path
