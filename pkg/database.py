"""
Database module for the multiple-testing laboratory
Stores experiment runs, their result rows and the calibration cache
"""

import json
import math
import sqlite3

import config
from calibration import ThresholdLadder


def get_db_connection(db_path=None):
    """Create a database connection"""
    conn = sqlite3.connect(db_path or config.DATABASE)
    conn.row_factory = sqlite3.Row
    return conn


def init_db(db_path=None):
    """Initialize the database with all required tables"""
    conn = get_db_connection(db_path)

    # Runs table (header - one per grid)
    conn.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id TEXT UNIQUE NOT NULL,
            model TEXT NOT NULL,
            master_seed TEXT NOT NULL,
            spec_json TEXT NOT NULL,
            row_count INTEGER NOT NULL DEFAULT 0,
            failure_count INTEGER NOT NULL DEFAULT 0,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    ''')

    # Result rows (one per grid cell)
    conn.execute('''
        CREATE TABLE IF NOT EXISTS result_rows (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id TEXT NOT NULL,
            model TEXT NOT NULL,
            nu INTEGER NOT NULL,
            r INTEGER NOT NULL,
            df TEXT NOT NULL,
            threshold REAL NOT NULL,
            threshold_se REAL NOT NULL DEFAULT 0.0,
            repetitions INTEGER NOT NULL,
            n_positive INTEGER NOT NULL,
            n_multiple INTEGER NOT NULL,
            clustering_proportion REAL,
            fwer REAL NOT NULL,
            dispersion_index REAL,
            mean_cluster_size REAL,
            wall_time REAL NOT NULL DEFAULT 0.0,
            FOREIGN KEY (run_id) REFERENCES runs (run_id) ON DELETE CASCADE
        )
    ''')

    # Cells that could not be computed
    conn.execute('''
        CREATE TABLE IF NOT EXISTS failed_cells (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id TEXT NOT NULL,
            nu INTEGER NOT NULL,
            r INTEGER NOT NULL,
            df TEXT NOT NULL,
            reason TEXT NOT NULL,
            FOREIGN KEY (run_id) REFERENCES runs (run_id) ON DELETE CASCADE
        )
    ''')

    # Calibration cache keyed by cell settings
    conn.execute('''
        CREATE TABLE IF NOT EXISTS calibration_cache (
            cache_key TEXT PRIMARY KEY,
            ladder_json TEXT NOT NULL,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    ''')

    conn.commit()
    conn.close()


def _df_text(df):
    return 'inf' if math.isinf(df) else repr(float(df))


def next_run_id(conn):
    """Auto-generate run ids in format RUN###"""
    last_run = conn.execute('SELECT run_id FROM runs ORDER BY id DESC LIMIT 1').fetchone()
    next_num = 1
    if last_run and last_run['run_id']:
        try:
            next_num = int(last_run['run_id'][3:]) + 1  # Skip 'RUN' prefix
        except (ValueError, IndexError):
            next_num = 1
    return f'RUN{next_num}'


def save_run(spec, rows, failures, db_path=None):
    """Persist a grid and return its run id"""
    conn = get_db_connection(db_path)
    try:
        run_id = next_run_id(conn)
        conn.execute('''INSERT INTO runs (run_id, model, master_seed, spec_json, row_count, failure_count)
                        VALUES (?, ?, ?, ?, ?, ?)''',
                     (run_id, spec.model, str(spec.master_seed), json.dumps(spec.to_json()),
                      len(rows), len(failures)))
        for row in rows:
            conn.execute('''INSERT INTO result_rows (run_id, model, nu, r, df, threshold, threshold_se,
                            repetitions, n_positive, n_multiple, clustering_proportion, fwer,
                            dispersion_index, mean_cluster_size, wall_time)
                            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)''',
                         (run_id, row.model, row.nu, row.r, _df_text(row.df), row.threshold, row.threshold_se,
                          row.repetitions, row.n_positive, row.n_multiple, row.clustering_proportion,
                          row.fwer, row.dispersion_index, row.mean_cluster_size, row.wall_time))
        for cell in failures:
            conn.execute('INSERT INTO failed_cells (run_id, nu, r, df, reason) VALUES (?, ?, ?, ?, ?)',
                         (run_id, cell.nu, cell.r, _df_text(cell.df), cell.reason))
        conn.commit()
    finally:
        conn.close()
    return run_id


def fetch_calibration(key, db_path=None):
    conn = get_db_connection(db_path)
    try:
        found = conn.execute('SELECT ladder_json FROM calibration_cache WHERE cache_key = ?', (key,)).fetchone()
    finally:
        conn.close()
    if found is None:
        return None
    return ThresholdLadder.from_dict(json.loads(found['ladder_json']))


def store_calibration(key, ladder, db_path=None):
    conn = get_db_connection(db_path)
    try:
        conn.execute('INSERT OR REPLACE INTO calibration_cache (cache_key, ladder_json) VALUES (?, ?)',
                     (key, json.dumps(ladder.to_dict())))
        conn.commit()
    finally:
        conn.close()


class ResultStore:
    """Binds the module functions to one database file"""

    def __init__(self, db_path=None):
        self.db_path = db_path or config.DATABASE
        init_db(self.db_path)

    def save_run(self, spec, rows, failures):
        return save_run(spec, rows, failures, self.db_path)

    def fetch_calibration(self, key):
        return fetch_calibration(key, self.db_path)

    def store_calibration(self, key, ladder):
        store_calibration(key, ladder, self.db_path)
