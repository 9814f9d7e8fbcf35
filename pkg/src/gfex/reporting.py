"""Output files, digests and run manifests.

Numeric text output is fixed at 17 significant digits so re-runs are
byte-comparable; every experiment writes one manifest listing the files it
produced with their SHA-256 digests.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .errors import InvalidParameterError


def fmt17(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path: str, header: Iterable[str], columns) -> str:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt17(v) for v in row) + "\n")
    return path


def write_jsonl(path: str, records: Iterable[dict]) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError(f"not JSON serializable: {type(v)}")


def write_json(path: str, obj) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Collects config echo, seed, timestamps and file digests for one run."""

    def __init__(self, experiment: str, config: dict, seed: int):
        self.experiment = experiment
        self.config = dict(config)
        self.seed = int(seed)
        self.start = time.time()
        self.files: dict = {}

    def add(self, path: str):
        self.files[os.path.basename(path)] = sha256_file(path)

    def write(self, out_dir: str) -> str:
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "code_version": __version__,
            "started_at": self.start,
            "finished_at": time.time(),
            "files": self.files,
        }
        path = os.path.join(out_dir, "manifest.json")
        return write_json(path, payload)


def verify_manifest(out_dir: str) -> bool:
    """Recompute digests of the files referenced by a manifest."""
    with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as fh:
        payload = json.load(fh)
    for name, digest in payload["files"].items():
        if sha256_file(os.path.join(out_dir, name)) != digest:
            return False
    return True
