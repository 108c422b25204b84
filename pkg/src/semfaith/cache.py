"""On-disk result cache for ``semfaith score``.

Entries are JSON files named by a SHA-256 of the three distributions, the
solver settings that affect the numbers, and the package version. Triplet
ids and metadata are not part of the key.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from . import __version__
from .core import QcaTriplet, SolverConfig

log = logging.getLogger(__name__)


def cache_key(t: QcaTriplet, cfg: SolverConfig) -> str:
    solver = cfg.as_dict()
    # output units are applied after solving, so they do not change the cached numbers
    solver.pop("report_units", None)
    payload = {
        "p_q": [float(x).hex() for x in np.asarray(t.p_q)],
        "p_c": [float(x).hex() for x in np.asarray(t.p_c)],
        "p_a": [float(x).hex() for x in np.asarray(t.p_a)],
        "solver": {k: repr(v) for k, v in sorted(solver.items())},
        "version": __version__,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


class ResultCache:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            if not isinstance(entry, dict) or entry.get("key") != key or not isinstance(entry.get("values"), dict):
                raise ValueError("entry does not match its key")
            return entry["values"]
        except (OSError, ValueError) as exc:
            log.warning("cache entry %s is unreadable (%s); recomputing", path.name, exc)
            return None

    def put(self, key: str, values: dict) -> None:
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"key": key, "values": values}, fh, sort_keys=True)
        os.replace(tmp, path)
