"""
SQLite cache of finished sweep cells
Keyed by a hash of the resolved cell configuration, precoder, strategy and the
package version, so a changed parameter never hits a stale entry
"""
import hashlib
import json
import logging
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from src import __version__
from src.harness.reporting import OutageReport

logger = logging.getLogger(__name__)

DEFAULT_CACHE_DIR = Path.home() / ".urllc_mimo_sim"


def cell_key(config: dict, precoder: str, strategy: str) -> str:
    """Cache key of one sweep cell"""
    payload = json.dumps(
        {"config": config, "precoder": precoder, "strategy": strategy, "version": __version__},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResultCache:
    """Cell-level result cache"""

    def __init__(self, db_path: Optional[Union[str, Path]] = None):
        if db_path is None:
            DEFAULT_CACHE_DIR.mkdir(exist_ok=True)
            db_path = DEFAULT_CACHE_DIR / "cache.db"
        else:
            Path(db_path).parent.mkdir(parents=True, exist_ok=True)

        self.db_path = str(db_path)
        self._init_db()

    def _init_db(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS cell_results (
                    key TEXT PRIMARY KEY,
                    K INTEGER,
                    f INTEGER,
                    precoder TEXT,
                    strategy TEXT,
                    created TIMESTAMP,
                    report TEXT
                )
            """)
            conn.commit()

    def get(self, key: str) -> Optional[OutageReport]:
        """Cached report for a key, or None"""
        with sqlite3.connect(self.db_path) as conn:
            row = conn.execute(
                "SELECT report FROM cell_results WHERE key = ?", (key,)
            ).fetchone()
        if row is None:
            return None
        try:
            return OutageReport.from_dict(json.loads(row[0]))
        except (KeyError, TypeError, ValueError) as e:
            logger.warning(f"Discarding unreadable cache entry {key[:12]}: {e}")
            return None

    def put(self, key: str, report: OutageReport):
        """Store a finished cell"""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                INSERT OR REPLACE INTO cell_results
                (key, K, f, precoder, strategy, created, report)
                VALUES (?, ?, ?, ?, ?, ?, ?)
            """, (
                key,
                report.K,
                report.f,
                report.precoder,
                report.strategy,
                datetime.now().isoformat(),
                json.dumps(report.to_dict()),
            ))
            conn.commit()
        logger.debug(f"Cached {report.cell} under {key[:12]}")

    def __len__(self) -> int:
        with sqlite3.connect(self.db_path) as conn:
            return int(conn.execute("SELECT COUNT(*) FROM cell_results").fetchone()[0])

    def clear(self):
        """Drop every cached cell"""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("DELETE FROM cell_results")
            conn.commit()
