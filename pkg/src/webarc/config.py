"""Key-value config file shared by the CLI and the service.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.

Keys: storage_path, index_path, cdx_base_url, timemap_base_url,
save_base_url, live_provider (fixture|endpoint|none), provider_endpoint,
politeness_delay_ms, fetch_parallelism, update_window_days.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class AppConfig:
    storage_path: str = "./data/store"
    index_path: str = "./data/index"
    cdx_base_url: str = "https://web.archive.org/cdx/search/cdx"
    timemap_base_url: str = "https://web.archive.org/web"
    save_base_url: str = "https://web.archive.org"
    live_provider: str = "none"  # fixture | endpoint | none
    provider_endpoint: str = ""
    politeness_delay_ms: int = 500
    fetch_parallelism: int = 4
    update_window_days: int = 90


_INT_KEYS = {"politeness_delay_ms", "fetch_parallelism", "update_window_days"}


def load_config(path: str | Path | None) -> AppConfig:
    config = AppConfig()
    if path is None:
        return config
    known = {f.name for f in fields(AppConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        setattr(config, key, int(value) if key in _INT_KEYS else value)
    return config
