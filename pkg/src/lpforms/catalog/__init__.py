"""Bundled scenario files."""

from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError

CATALOG_DIR = Path(__file__).resolve().parent


def catalog_names() -> list[str]:
    return sorted(p.stem for p in CATALOG_DIR.glob("*.toml"))


def catalog_path(name: str) -> Path:
    path = CATALOG_DIR / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"no catalog scenario named {name!r}; available: {', '.join(catalog_names())}")
    return path
