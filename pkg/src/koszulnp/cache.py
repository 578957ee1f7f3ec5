"""On-disk memo of differential ranks.

One JSON file per (points, multiplicities, prime); inside it one bucket per
instance (t, twist, route, seed).  Deleting the directory is always safe.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .polyspace import FatPointScheme


def scheme_digest(Z: FatPointScheme, prime: int | str) -> str:
    payload = json.dumps({
        "points": [p.to_json() for p in Z.points],
        "mults": list(Z.mults),
        "veronese": Z.veronese,
        "prime": str(prime),
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


class RankCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._files: dict[Path, dict] = {}

    def _path(self, Z: FatPointScheme, prime: int | str) -> Path:
        return self.directory / f"{scheme_digest(Z, prime)}.json"

    def bucket(self, Z: FatPointScheme, prime: int | str, instance_key: str) -> dict:
        path = self._path(Z, prime)
        if path not in self._files:
            try:
                self._files[path] = json.loads(path.read_text())
            except (FileNotFoundError, json.JSONDecodeError):
                self._files[path] = {}
        return self._files[path].setdefault(instance_key, {})

    def flush(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        for path, data in self._files.items():
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(data, sort_keys=True))
            tmp.replace(path)
