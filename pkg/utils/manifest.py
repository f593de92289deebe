#!/usr/bin/env python3
"""
Run manifests: a JSON file written beside every data output, recording
the command, the resolved configuration, the seed and timestamps.

Timestamps live only in the manifest, never in the data file, so two
runs with the same configuration produce byte-identical data.
"""

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .logger import get_logger

logger = get_logger("manifest")

TOOL_NAME = "clonelab"
TOOL_VERSION = "1.0.0"
MANIFEST_SUFFIX = ".manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def config_digest(config: Dict[str, Any]) -> str:
    """Stable hash of a configuration (key order does not matter)"""
    content = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(data_path: Union[str, Path]) -> Path:
    data_path = Path(data_path)
    return data_path.with_name(data_path.name + MANIFEST_SUFFIX)


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    seed: int
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION
    python: str = field(default_factory=platform.python_version)
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    outputs: List[Dict[str, str]] = field(default_factory=list)

    @property
    def config_sha256(self) -> str:
        return config_digest(self.config)

    def finish(self):
        self.finished_at = utc_now()

    def add_output(self, path: Union[str, Path]):
        self.outputs.append({"path": Path(path).name, "sha256": file_digest(path)})

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["config_sha256"] = self.config_sha256
        return payload

    def write_beside(self, data_path: Union[str, Path]) -> Path:
        """Write ``<data file>.manifest.json``; the data file's hash is recorded as an output"""
        if self.finished_at is None:
            self.finish()
        self.outputs = [o for o in self.outputs if o["path"] != Path(data_path).name]
        self.add_output(data_path)
        target = manifest_path(data_path)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.debug(f"Wrote manifest {target}")
        return target

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        payload.pop("config_sha256", None)
        return cls(**payload)
