from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, Union

from .config import Config

logger = logging.getLogger(__name__)


def run_key(run_config: dict) -> str:
    """Stable key for a run: SHA-256 of the canonical JSON of its configuration."""
    payload = dict(run_config)
    payload["spec_version"] = Config.spec_version
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class FileCache:
    """File-based JSON cache for deterministic run results.

    Results are pure functions of their key (configuration plus master seed),
    so entries never expire; `clear` is the only invalidation.
    """

    def __init__(self, namespace: str = "default"):
        Config.ensure_dirs()
        self.cache_dir = Config.cache_dir / namespace
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _key_path(self, key: str) -> Path:
        safe_key = key.replace("/", "_").replace("\\", "_").replace("=", "_")
        return self.cache_dir / f"{safe_key}.json"

    def get(self, key: str) -> Optional[Union[dict, list]]:
        path = self._key_path(key)
        if not path.exists():
            return None

        try:
            data = json.loads(path.read_text())
        except (json.JSONDecodeError, OSError):
            logger.warning("ignoring unreadable cache entry %s", path.name)
            return None

        if data.get("spec_version") != Config.spec_version:
            return None
        return data.get("value")

    def set(self, key: str, value) -> None:
        path = self._key_path(key)
        payload = {"spec_version": Config.spec_version, "value": value}
        path.write_text(json.dumps(payload))

    def clear(self, key: Optional[str] = None) -> int:
        if key:
            path = self._key_path(key)
            existed = path.exists()
            path.unlink(missing_ok=True)
            return int(existed)
        removed = 0
        for f in self.cache_dir.glob("*.json"):
            f.unlink(missing_ok=True)
            removed += 1
        return removed
