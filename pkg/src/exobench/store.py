"""Session store: directory layout and manifest for recorded sessions.

Layout, one directory per participant under the session root::

    <session>/session.json            manifest (seed, participants, trial index)
    <session>/<pid>/trials/<id>.exolog
    <session>/<pid>/derived/*.csv

The default root for new sessions is $EXOBENCH_DATA_DIR when set.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

MANIFEST_NAME = "session.json"
ENV_DATA_DIR = "EXOBENCH_DATA_DIR"


class MissingManifest(FileNotFoundError):
    pass


def default_data_dir() -> Path:
    return Path(os.environ.get(ENV_DATA_DIR, "."))


@dataclass(frozen=True, slots=True)
class SessionStore:
    root: Path

    def __init__(self, root: str | Path):
        object.__setattr__(self, "root", Path(root))

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def participant_dir(self, pid: str) -> Path:
        return self.root / pid

    def trials_dir(self, pid: str) -> Path:
        return self.participant_dir(pid) / "trials"

    def derived_dir(self, pid: str) -> Path:
        return self.participant_dir(pid) / "derived"

    def trial_log_path(self, pid: str, trial_id: str) -> Path:
        return self.trials_dir(pid) / f"{trial_id}.exolog"

    def ensure_participant(self, pid: str) -> None:
        self.trials_dir(pid).mkdir(parents=True, exist_ok=True)
        self.derived_dir(pid).mkdir(parents=True, exist_ok=True)

    def write_manifest(self, manifest: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.manifest_path)

    def read_manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise MissingManifest(f"no {MANIFEST_NAME} under {self.root}")
        return json.loads(self.manifest_path.read_text())

    def participant_ids(self) -> list[str]:
        return [p["id"] for p in self.read_manifest()["participants"]]
