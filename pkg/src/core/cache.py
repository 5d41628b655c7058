"""SQLite cache for radial kernel quadratures.

Radial Hankel moments are the slowest kernel evaluations and are requested
repeatedly with identical arguments (tail fits, scaling checks, sweeps), so
their values are memoised on disk.
"""

import json
import sqlite3
from pathlib import Path
from typing import Any, Dict, Optional

from src.core.logger import logger


class SQLiteCache:
    """A minimal SQLite-backed key-value store for JSON-encoded quadrature results."""

    def __init__(self, db_path: str | Path = "output/.kernel_cache.db") -> None:
        """
        Args:
            db_path (str | Path): Path to the SQLite database file.
        """
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_db()

    @staticmethod
    def make_key(*parts: Any) -> str:
        """Build a deterministic key; floats go through ``repr`` so keys are exact."""
        return "|".join(repr(p) if isinstance(p, float) else str(p) for p in parts)

    def _get_connection(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path, check_same_thread=False)

    def _init_db(self) -> None:
        with self._get_connection() as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS quadrature_cache (
                    cache_key TEXT PRIMARY KEY,
                    payload TEXT
                )
                """
            )

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        """
        Retrieve a cached result.

        Args:
            key (str): The cache key.

        Returns:
            Optional[Dict[str, Any]]: The decoded payload if found, else None.
        """
        try:
            with self._get_connection() as conn:
                row = conn.execute(
                    "SELECT payload FROM quadrature_cache WHERE cache_key = ?",
                    (key,)
                ).fetchone()
                if row:
                    logger.debug(f"SQLiteCache: hit {key}")
                    return json.loads(row[0])
        except sqlite3.Error as e:
            logger.error(f"SQLiteCache: error reading {key}: {e}")
        except json.JSONDecodeError as e:
            logger.error(f"SQLiteCache: corrupt payload for {key}: {e}")
        return None

    def set(self, key: str, value: Dict[str, Any]) -> None:
        """
        Store a payload.

        Args:
            key (str): The cache key.
            value (Dict[str, Any]): JSON-serialisable payload.
        """
        try:
            with self._get_connection() as conn:
                conn.execute(
                    "INSERT OR REPLACE INTO quadrature_cache (cache_key, payload) VALUES (?, ?)",
                    (key, json.dumps(value))
                )
        except (sqlite3.Error, TypeError) as e:
            logger.error(f"SQLiteCache: error saving {key}: {e}")
