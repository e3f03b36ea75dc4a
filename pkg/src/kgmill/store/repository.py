"""SQLite-backed repository for terminologies, code sets, triples, runs,
vectors, expansion strings, matches, jobs, and materialized custom tables.

A single embedded database file holds everything; vector payloads are stored
as float64 blobs and searched in-process. The connection is shared and every
access is serialized through one lock, which satisfies the concurrency
contract at desk scale: readers never see partial writes, and writes to a
given run additionally funnel through that run's writer lock.

Custom-table queries execute on a separate read-only connection, so the
query surface (plain SQLite SQL over the tables listed in SCHEMA) cannot
mutate the store.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import re
import sqlite3
import threading
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from kgmill.errors import (
    ImportEmpty,
    NotFound,
    QueryError,
    RunClosed,
)
from kgmill.store import filters as filter_lang
from kgmill.store.models import (
    Code,
    CodeSet,
    CustomTable,
    ImportReport,
    Run,
    RunStatus,
    TermString,
    Terminology,
    Triple,
    allowed_transition,
)

SCHEMA = """
CREATE TABLE IF NOT EXISTS terminologies(
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS codes(
    id INTEGER PRIMARY KEY,
    terminology_id INTEGER NOT NULL REFERENCES terminologies(id),
    code_id TEXT NOT NULL,
    UNIQUE(terminology_id, code_id)
);
CREATE TABLE IF NOT EXISTS term_strings(
    id INTEGER PRIMARY KEY,
    code_pk INTEGER NOT NULL REFERENCES codes(id),
    text TEXT NOT NULL,
    source_rank INTEGER NOT NULL,
    UNIQUE(code_pk, text)
);
CREATE TABLE IF NOT EXISTS code_sets(
    id INTEGER PRIMARY KEY,
    terminology_id INTEGER NOT NULL REFERENCES terminologies(id),
    name TEXT NOT NULL UNIQUE,
    source_filter TEXT NOT NULL,
    expansion_style TEXT,
    warning INTEGER NOT NULL DEFAULT 0,
    version TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS code_set_members(
    code_set_id INTEGER NOT NULL REFERENCES code_sets(id),
    code_pk INTEGER NOT NULL REFERENCES codes(id),
    PRIMARY KEY(code_set_id, code_pk)
);
CREATE TABLE IF NOT EXISTS runs(
    id INTEGER PRIMARY KEY,
    code_set_id INTEGER NOT NULL REFERENCES code_sets(id),
    spec_ids TEXT NOT NULL,
    status TEXT NOT NULL,
    prompt_tokens INTEGER NOT NULL DEFAULT 0,
    completion_tokens INTEGER NOT NULL DEFAULT 0,
    accumulated_cost TEXT NOT NULL DEFAULT '0',
    started_at TEXT,
    ended_at TEXT
);
CREATE TABLE IF NOT EXISTS triples(
    id INTEGER PRIMARY KEY,
    run_id INTEGER NOT NULL REFERENCES runs(id),
    subject_code_id TEXT NOT NULL,
    predicate TEXT NOT NULL,
    object_value TEXT NOT NULL,
    object_kind TEXT NOT NULL,
    finalization TEXT NOT NULL,
    replaced_parent TEXT,
    UNIQUE(run_id, subject_code_id, predicate, object_value)
);
CREATE TABLE IF NOT EXISTS refinements(
    id INTEGER PRIMARY KEY,
    run_id INTEGER NOT NULL REFERENCES runs(id),
    subject_code_id TEXT NOT NULL,
    parent_text TEXT NOT NULL,
    child_text TEXT NOT NULL,
    depth INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS custom_tables(
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    version INTEGER NOT NULL,
    defining_query TEXT NOT NULL,
    columns TEXT NOT NULL,
    rows TEXT NOT NULL,
    created_at TEXT NOT NULL,
    UNIQUE(name, version)
);
CREATE TABLE IF NOT EXISTS vectors(
    owner_kind TEXT NOT NULL,
    owner_key TEXT NOT NULL,
    model_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    dim INTEGER NOT NULL,
    data BLOB NOT NULL,
    PRIMARY KEY(owner_kind, owner_key, model_id, kind)
);
CREATE TABLE IF NOT EXISTS expansions(
    source_text TEXT NOT NULL,
    style TEXT NOT NULL,
    model_id TEXT NOT NULL,
    generated_texts TEXT NOT NULL,
    PRIMARY KEY(source_text, style, model_id)
);
CREATE TABLE IF NOT EXISTS beceptivity_cache(
    text TEXT NOT NULL,
    method TEXT NOT NULL,
    value REAL NOT NULL,
    PRIMARY KEY(text, method)
);
CREATE TABLE IF NOT EXISTS hierarchy(
    term TEXT PRIMARY KEY,
    parent TEXT
);
CREATE TABLE IF NOT EXISTS match_results(
    fingerprint TEXT PRIMARY KEY,
    object_string TEXT NOT NULL,
    code_set_id INTEGER NOT NULL REFERENCES code_sets(id),
    z REAL NOT NULL,
    n INTEGER NOT NULL,
    ranked TEXT NOT NULL,
    best TEXT
);
CREATE TABLE IF NOT EXISTS jobs(
    id INTEGER PRIMARY KEY,
    idempotency_key TEXT UNIQUE,
    kind TEXT NOT NULL,
    status TEXT NOT NULL,
    done INTEGER NOT NULL DEFAULT 0,
    total INTEGER NOT NULL DEFAULT 0,
    result_ref TEXT,
    error TEXT,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS annotations(
    id INTEGER PRIMARY KEY,
    subject_kind TEXT NOT NULL,
    subject_key TEXT NOT NULL,
    body TEXT NOT NULL,
    created_at TEXT NOT NULL
);
"""

_NEAR_TOKEN = re.compile(r'near "([^"]+)"')


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class Store:
    """Repository over one SQLite file. Safe for concurrent use from threads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._run_locks: dict[int, threading.Lock] = {}
        self._conn = sqlite3.connect(str(self.path), check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        with self._lock, self._conn:
            self._conn.executescript(SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def run_writer_lock(self, run_id: int) -> threading.Lock:
        """Single-writer lock for a run; cross-run writes stay independent."""
        with self._lock:
            return self._run_locks.setdefault(run_id, threading.Lock())

    # -- terminologies ----------------------------------------------------

    def import_terminology(
        self, name: str, rows: Iterable[Sequence]
    ) -> Terminology:
        """Import (code_id, string_text, source_rank) rows under one name.

        Duplicate (code_id, string_text) pairs are dropped; malformed rows are
        skipped and counted in the returned terminology's import_report.
        Re-importing the same stream is a no-op on content.
        """
        report = ImportReport()
        cleaned: list[tuple[str, str, int]] = []
        seen: set[tuple[str, str]] = set()
        for row in rows:
            report.rows_seen += 1
            try:
                code_id, text, rank = row
                code_id = str(code_id).strip()
                text = str(text).strip()
                rank = int(rank)
                if not code_id or not text or rank < 0:
                    raise ValueError("empty field or negative rank")
            except (TypeError, ValueError) as exc:
                report.rows_rejected += 1
                if len(report.rejected_samples) < 10:
                    report.rejected_samples.append(f"{row!r}: {exc}")
                continue
            if (code_id, text) in seen:
                continue
            seen.add((code_id, text))
            cleaned.append((code_id, text, rank))
        if report.rows_seen == 0:
            raise ImportEmpty("terminology import received no rows")
        if not cleaned:
            raise ImportEmpty("terminology import had no valid rows")

        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO terminologies(name) VALUES (?) ON CONFLICT(name) DO NOTHING",
                (name,),
            )
            term_id = self._conn.execute(
                "SELECT id FROM terminologies WHERE name=?", (name,)
            ).fetchone()[0]
            for code_id, text, rank in cleaned:
                self._conn.execute(
                    "INSERT OR IGNORE INTO codes(terminology_id, code_id) VALUES (?,?)",
                    (term_id, code_id),
                )
                code_pk = self._conn.execute(
                    "SELECT id FROM codes WHERE terminology_id=? AND code_id=?",
                    (term_id, code_id),
                ).fetchone()[0]
                cur = self._conn.execute(
                    "INSERT OR IGNORE INTO term_strings(code_pk, text, source_rank) VALUES (?,?,?)",
                    (code_pk, text, rank),
                )
                report.rows_stored += cur.rowcount if cur.rowcount > 0 else 0

        terminology = self.get_terminology(term_id)
        terminology.import_report = report
        return terminology

    def get_terminology(self, terminology_id: int) -> Terminology:
        with self._lock:
            row = self._conn.execute(
                "SELECT id, name FROM terminologies WHERE id=?", (terminology_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"terminology {terminology_id} not found")
            return Terminology(id=row[0], name=row[1], codes=self._codes_of(row[0]))

    def find_terminology(self, name: str) -> Terminology:
        with self._lock:
            row = self._conn.execute(
                "SELECT id FROM terminologies WHERE name=?", (name,)
            ).fetchone()
        if row is None:
            raise NotFound(f"terminology {name!r} not found")
        return self.get_terminology(row[0])

    def list_terminologies(self) -> list[tuple[int, str]]:
        with self._lock:
            return list(
                self._conn.execute("SELECT id, name FROM terminologies ORDER BY name")
            )

    def _codes_of(self, terminology_id: int) -> list[Code]:
        rows = self._conn.execute(
            """SELECT c.code_id, s.text, s.source_rank
               FROM codes c JOIN term_strings s ON s.code_pk = c.id
               WHERE c.terminology_id=?
               ORDER BY c.code_id, s.source_rank, s.text""",
            (terminology_id,),
        ).fetchall()
        grouped: dict[str, list[TermString]] = {}
        for code_id, text, rank in rows:
            grouped.setdefault(code_id, []).append(TermString(text, rank))
        return [
            Code(code_id=cid, terminology_id=terminology_id, strings=strings)
            for cid, strings in grouped.items()
        ]

    def distinct_strings(self, terminology_id: int) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                """SELECT DISTINCT s.text FROM term_strings s
                   JOIN codes c ON s.code_pk = c.id
                   WHERE c.terminology_id=? ORDER BY s.text""",
                (terminology_id,),
            ).fetchall()
        return [r[0] for r in rows]

    # -- code sets ---------------------------------------------------------

    def create_code_set(
        self,
        terminology_id: int,
        name: str,
        predicate_filter: dict,
        expansion_style: str | None = None,
    ) -> CodeSet:
        """Persist the subset of the terminology's codes matching the filter.

        An empty match is allowed; the resulting set carries warning=True.
        """
        filter_text = filter_lang.canonical_filter_text(predicate_filter)
        terminology = self.get_terminology(terminology_id)  # raises NotFound
        members = [
            c for c in terminology.codes if filter_lang.matches(predicate_filter, c)
        ]
        member_ids = sorted(c.code_id for c in members)
        version = hashlib.sha256("\n".join(member_ids).encode("utf-8")).hexdigest()[:16]
        warning = not members
        with self._lock, self._conn:
            cur = self._conn.execute(
                """INSERT INTO code_sets(terminology_id, name, source_filter,
                                         expansion_style, warning, version)
                   VALUES (?,?,?,?,?,?)""",
                (terminology_id, name, filter_text, expansion_style, int(warning), version),
            )
            set_id = cur.lastrowid
            self._conn.executemany(
                """INSERT INTO code_set_members(code_set_id, code_pk)
                   SELECT ?, id FROM codes WHERE terminology_id=? AND code_id=?""",
                [(set_id, terminology_id, cid) for cid in member_ids],
            )
        return self.get_code_set(set_id)

    def get_code_set(self, code_set_id: int) -> CodeSet:
        with self._lock:
            row = self._conn.execute(
                """SELECT id, terminology_id, name, source_filter, expansion_style,
                          warning, version
                   FROM code_sets WHERE id=?""",
                (code_set_id,),
            ).fetchone()
            if row is None:
                raise NotFound(f"code set {code_set_id} not found")
            members = self._conn.execute(
                """SELECT c.code_id FROM code_set_members m
                   JOIN codes c ON c.id = m.code_pk WHERE m.code_set_id=?""",
                (code_set_id,),
            ).fetchall()
        return CodeSet(
            id=row[0],
            terminology_id=row[1],
            name=row[2],
            member_code_ids={m[0] for m in members},
            source_filter=row[3],
            expansion_style=row[4],
            warning=bool(row[5]),
            version=row[6],
        )

    def find_code_set(self, name: str) -> CodeSet:
        with self._lock:
            row = self._conn.execute(
                "SELECT id FROM code_sets WHERE name=?", (name,)
            ).fetchone()
        if row is None:
            raise NotFound(f"code set {name!r} not found")
        return self.get_code_set(row[0])

    def code_set_codes(self, code_set_id: int) -> list[Code]:
        """Member codes with their strings, ordered by code_id."""
        code_set = self.get_code_set(code_set_id)
        with self._lock:
            codes = self._codes_of(code_set.terminology_id)
        members = code_set.member_code_ids
        return sorted(
            (c for c in codes if c.code_id in members), key=lambda c: c.code_id
        )

    # -- runs and triples ---------------------------------------------------

    def create_run(self, code_set_id: int, spec_ids: list[str]) -> Run:
        self.get_code_set(code_set_id)  # raises NotFound
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO runs(code_set_id, spec_ids, status) VALUES (?,?,?)",
                (code_set_id, json.dumps(spec_ids), RunStatus.PENDING.value),
            )
            return self.get_run(cur.lastrowid)

    def get_run(self, run_id: int) -> Run:
        with self._lock:
            row = self._conn.execute(
                """SELECT id, code_set_id, spec_ids, status, prompt_tokens,
                          completion_tokens, accumulated_cost, started_at, ended_at
                   FROM runs WHERE id=?""",
                (run_id,),
            ).fetchone()
        if row is None:
            raise NotFound(f"run {run_id} not found")
        return Run(
            id=row[0],
            code_set_id=row[1],
            spec_ids=json.loads(row[2]),
            status=RunStatus(row[3]),
            prompt_tokens=row[4],
            completion_tokens=row[5],
            accumulated_cost=row[6],
            started_at=row[7],
            ended_at=row[8],
        )

    def set_run_status(
        self,
        run_id: int,
        status: RunStatus,
        prompt_tokens: int | None = None,
        completion_tokens: int | None = None,
        accumulated_cost: str | None = None,
    ) -> None:
        """Advance a run along pending -> running -> terminal."""
        with self._lock, self._conn:
            run = self.get_run(run_id)
            if not allowed_transition(run.status, status):
                raise RunClosed(
                    f"run {run_id}: illegal transition {run.status.value} -> {status.value}"
                )
            stamp_col = "started_at" if status is RunStatus.RUNNING else "ended_at"
            self._conn.execute(
                f"""UPDATE runs SET status=?, {stamp_col}=?,
                        prompt_tokens=COALESCE(?, prompt_tokens),
                        completion_tokens=COALESCE(?, completion_tokens),
                        accumulated_cost=COALESCE(?, accumulated_cost)
                    WHERE id=?""",
                (status.value, _now(), prompt_tokens, completion_tokens,
                 accumulated_cost, run_id),
            )

    def insert_triples(self, run_id: int, triples: list[Triple]) -> int:
        """Insert triples atomically; duplicates are skipped. Returns count."""
        run = self.get_run(run_id)
        if run.status is not RunStatus.RUNNING:
            raise RunClosed(f"run {run_id} is {run.status.value}, not running")
        with self.run_writer_lock(run_id), self._lock:
            subjects = {t.subject_code_id for t in triples}
            for subject in subjects:
                row = self._conn.execute(
                    "SELECT 1 FROM codes WHERE code_id=? LIMIT 1", (subject,)
                ).fetchone()
                if row is None:
                    raise NotFound(f"triple subject {subject!r} is not a known code")
            before = self._conn.total_changes
            with self._conn:
                self._conn.executemany(
                    """INSERT OR IGNORE INTO triples
                       (run_id, subject_code_id, predicate, object_value,
                        object_kind, finalization, replaced_parent)
                       VALUES (?,?,?,?,?,?,?)""",
                    [
                        (run_id, t.subject_code_id, t.predicate, t.object_value,
                         t.object_kind.value, t.finalization.value, t.replaced_parent)
                        for t in triples
                    ],
                )
            return self._conn.total_changes - before

    def triples_for_run(self, run_id: int) -> list[Triple]:
        self.get_run(run_id)
        with self._lock:
            rows = self._conn.execute(
                """SELECT subject_code_id, predicate, object_value, object_kind,
                          finalization, replaced_parent
                   FROM triples WHERE run_id=?
                   ORDER BY subject_code_id, predicate, object_value""",
                (run_id,),
            ).fetchall()
        return [Triple(r[0], r[1], r[2], r[3], r[4], r[5]) for r in rows]

    def add_refinement(
        self, run_id: int, subject_code_id: str, parent_text: str,
        child_text: str, depth: int,
    ) -> None:
        """Record one refinement edge: child replaced parent for this subject."""
        with self._lock, self._conn:
            self._conn.execute(
                """INSERT INTO refinements(run_id, subject_code_id, parent_text,
                                           child_text, depth)
                   VALUES (?,?,?,?,?)""",
                (run_id, subject_code_id, parent_text, child_text, depth),
            )

    def refinements_for_run(self, run_id: int) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                """SELECT subject_code_id, parent_text, child_text, depth
                   FROM refinements WHERE run_id=?
                   ORDER BY subject_code_id, parent_text, child_text, depth""",
                (run_id,),
            ).fetchall()
        return [
            {"subject": r[0], "parent": r[1], "child": r[2], "depth": r[3]}
            for r in rows
        ]

    # -- custom tables -------------------------------------------------------

    def materialize_custom_table(self, name: str, query: str) -> CustomTable:
        """Run the query on a read-only connection and freeze the results.

        Re-materializing under the same name creates a new snapshot version;
        earlier versions remain readable.
        """
        columns, rows = self._run_readonly_query(query)
        with self._lock, self._conn:
            prev = self._conn.execute(
                "SELECT COALESCE(MAX(version), 0) FROM custom_tables WHERE name=?",
                (name,),
            ).fetchone()[0]
            version = prev + 1
            created = _now()
            self._conn.execute(
                """INSERT INTO custom_tables(name, version, defining_query,
                                             columns, rows, created_at)
                   VALUES (?,?,?,?,?,?)""",
                (name, version, query, json.dumps(columns), json.dumps(rows), created),
            )
        return CustomTable(name, version, query, columns, rows, created)

    def read_custom_table(self, name: str, version: int | None = None) -> CustomTable:
        with self._lock:
            if version is None:
                row = self._conn.execute(
                    """SELECT name, version, defining_query, columns, rows, created_at
                       FROM custom_tables WHERE name=? ORDER BY version DESC LIMIT 1""",
                    (name,),
                ).fetchone()
            else:
                row = self._conn.execute(
                    """SELECT name, version, defining_query, columns, rows, created_at
                       FROM custom_tables WHERE name=? AND version=?""",
                    (name, version),
                ).fetchone()
        if row is None:
            raise NotFound(f"custom table {name!r} not found")
        return CustomTable(row[0], row[1], row[2], json.loads(row[3]),
                           json.loads(row[4]), row[5])

    def _run_readonly_query(self, query: str) -> tuple[list[str], list[list]]:
        with self._lock:
            self._conn.commit()
        try:
            ro = sqlite3.connect(f"file:{self.path}?mode=ro", uri=True)
        except sqlite3.Error as exc:
            raise QueryError(str(exc)) from exc
        try:
            cur = ro.execute(query)
            columns = [d[0] for d in cur.description] if cur.description else []
            rows = [
                [v.hex() if isinstance(v, bytes) else v for v in row]
                for row in cur.fetchall()
            ]
            return columns, rows
        except sqlite3.Error as exc:
            message = str(exc)
            position = None
            near = _NEAR_TOKEN.search(message)
            if near:
                offset = query.find(near.group(1))
                position = offset if offset >= 0 else None
            raise QueryError(message, position) from exc
        finally:
            ro.close()

    # -- vector cache ---------------------------------------------------------

    def put_vector(
        self, owner_kind: str, owner_key: str, model_id: str, kind: str,
        values: Sequence[float],
    ) -> np.ndarray:
        """Insert if absent (first write wins) and return the stored vector."""
        arr = np.asarray(values, dtype=np.float64)
        with self._lock, self._conn:
            self._conn.execute(
                """INSERT OR IGNORE INTO vectors(owner_kind, owner_key, model_id,
                                                 kind, dim, data)
                   VALUES (?,?,?,?,?,?)""",
                (owner_kind, owner_key, model_id, kind, arr.size, arr.tobytes()),
            )
        stored = self.get_vector(owner_kind, owner_key, model_id, kind)
        assert stored is not None
        return stored

    def get_vector(
        self, owner_kind: str, owner_key: str, model_id: str, kind: str
    ) -> np.ndarray | None:
        with self._lock:
            row = self._conn.execute(
                """SELECT data FROM vectors
                   WHERE owner_kind=? AND owner_key=? AND model_id=? AND kind=?""",
                (owner_kind, owner_key, model_id, kind),
            ).fetchone()
        if row is None:
            return None
        return np.frombuffer(row[0], dtype=np.float64).copy()

    def vectors_for_owner(
        self, owner_kind: str, owner_key: str, model_id: str
    ) -> dict[str, np.ndarray]:
        with self._lock:
            rows = self._conn.execute(
                """SELECT kind, data FROM vectors
                   WHERE owner_kind=? AND owner_key=? AND model_id=? ORDER BY kind""",
                (owner_kind, owner_key, model_id),
            ).fetchall()
        return {k: np.frombuffer(d, dtype=np.float64).copy() for k, d in rows}

    # -- expansion strings ------------------------------------------------------

    def get_expansion(self, source_text: str, style: str, model_id: str) -> list[str] | None:
        with self._lock:
            row = self._conn.execute(
                """SELECT generated_texts FROM expansions
                   WHERE source_text=? AND style=? AND model_id=?""",
                (source_text, style, model_id),
            ).fetchone()
        return None if row is None else json.loads(row[0])

    def put_expansion(
        self, source_text: str, style: str, model_id: str, generated_texts: list[str]
    ) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                """INSERT OR IGNORE INTO expansions(source_text, style, model_id,
                                                    generated_texts)
                   VALUES (?,?,?,?)""",
                (source_text, style, model_id, json.dumps(generated_texts)),
            )

    # -- beceptivity --------------------------------------------------------------

    def get_beceptivity(self, text: str, method: str) -> float | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT value FROM beceptivity_cache WHERE text=? AND method=?",
                (text, method),
            ).fetchone()
        return None if row is None else row[0]

    def put_beceptivity(self, text: str, method: str, value: float) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT OR IGNORE INTO beceptivity_cache(text, method, value) VALUES (?,?,?)",
                (text, method, value),
            )

    def load_hierarchy(self, edges: Iterable[tuple[str, str | None]]) -> int:
        """Load (term, parent) edges for db_lookup beceptivity. Roots have parent None."""
        count = 0
        with self._lock, self._conn:
            for term, parent in edges:
                self._conn.execute(
                    "INSERT OR REPLACE INTO hierarchy(term, parent) VALUES (?,?)",
                    (term, parent),
                )
                count += 1
        return count

    def hierarchy_depth(self, term: str) -> tuple[int, int] | None:
        """(depth of term, max depth in tree), edges counted from a root."""
        with self._lock:
            rows = self._conn.execute("SELECT term, parent FROM hierarchy").fetchall()
        parents = dict(rows)
        if term not in parents:
            return None

        def depth_of(node: str) -> int:
            depth, cursor = 0, node
            seen = set()
            while parents.get(cursor) is not None and cursor not in seen:
                seen.add(cursor)
                cursor = parents[cursor]
                depth += 1
            return depth

        max_depth = max(depth_of(t) for t in parents)
        return depth_of(term), max_depth

    # -- match results ---------------------------------------------------------------

    def get_match(self, fingerprint: str) -> dict | None:
        with self._lock:
            row = self._conn.execute(
                """SELECT object_string, code_set_id, z, n, ranked, best
                   FROM match_results WHERE fingerprint=?""",
                (fingerprint,),
            ).fetchone()
        if row is None:
            return None
        return {
            "object_string": row[0],
            "code_set_id": row[1],
            "z": row[2],
            "n": row[3],
            "ranked": json.loads(row[4]),
            "best": row[5],
        }

    def matches_for_object(self, object_string: str) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                """SELECT fingerprint, object_string, code_set_id, z, n, ranked, best
                   FROM match_results WHERE object_string=? ORDER BY fingerprint""",
                (object_string,),
            ).fetchall()
        return [
            {
                "fingerprint": r[0],
                "object_string": r[1],
                "code_set_id": r[2],
                "z": r[3],
                "n": r[4],
                "ranked": json.loads(r[5]),
                "best": r[6],
            }
            for r in rows
        ]

    def put_match(
        self, fingerprint: str, object_string: str, code_set_id: int,
        z: float, n: int, ranked: list[tuple[str, float]], best: str | None,
    ) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                """INSERT OR REPLACE INTO match_results
                   (fingerprint, object_string, code_set_id, z, n, ranked, best)
                   VALUES (?,?,?,?,?,?,?)""",
                (fingerprint, object_string, code_set_id, z, n,
                 json.dumps([[c, d] for c, d in ranked]), best),
            )

    def all_matches(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT fingerprint FROM match_results ORDER BY fingerprint"
            ).fetchall()
        return [self.get_match(r[0]) for r in rows]

    # -- jobs -----------------------------------------------------------------------

    def create_job(
        self, kind: str, idempotency_key: str | None = None
    ) -> tuple[int, bool]:
        """Returns (job_id, created); a replayed idempotency key returns the
        original job with created=False."""
        with self._lock, self._conn:
            if idempotency_key is not None:
                row = self._conn.execute(
                    "SELECT id FROM jobs WHERE idempotency_key=?", (idempotency_key,)
                ).fetchone()
                if row is not None:
                    return row[0], False
            cur = self._conn.execute(
                "INSERT INTO jobs(idempotency_key, kind, status, created_at) VALUES (?,?,?,?)",
                (idempotency_key, kind, "queued", _now()),
            )
            return cur.lastrowid, True

    def get_job(self, job_id: int) -> dict:
        with self._lock:
            row = self._conn.execute(
                """SELECT id, kind, status, done, total, result_ref, error
                   FROM jobs WHERE id=?""",
                (job_id,),
            ).fetchone()
        if row is None:
            raise NotFound(f"job {job_id} not found")
        return {
            "id": row[0], "kind": row[1], "status": row[2],
            "progress": {"done": row[3], "total": row[4]},
            "result_ref": row[5], "error": row[6],
        }

    _TERMINAL_JOB_STATUSES = ("completed", "failed", "killed_budget")

    def update_job(
        self, job_id: int, status: str | None = None,
        done: int | None = None, total: int | None = None,
        result_ref: str | None = None, error: str | None = None,
    ) -> None:
        """Progress is monotone and terminal statuses are immutable."""
        with self._lock, self._conn:
            job = self.get_job(job_id)
            if job["status"] in self._TERMINAL_JOB_STATUSES:
                return
            new_done = max(job["progress"]["done"], done if done is not None else 0)
            self._conn.execute(
                """UPDATE jobs SET status=COALESCE(?, status), done=?,
                       total=COALESCE(?, total),
                       result_ref=COALESCE(?, result_ref), error=COALESCE(?, error)
                   WHERE id=?""",
                (status, new_done, total, result_ref, error, job_id),
            )

    # -- annotations -------------------------------------------------------------------

    def add_annotation(self, subject_kind: str, subject_key: str, body: str) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO annotations(subject_kind, subject_key, body, created_at) VALUES (?,?,?,?)",
                (subject_kind, subject_key, body, _now()),
            )
            return cur.lastrowid

    def list_annotations(self, subject_kind: str, subject_key: str) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                """SELECT id, body, created_at FROM annotations
                   WHERE subject_kind=? AND subject_key=? ORDER BY id""",
                (subject_kind, subject_key),
            ).fetchall()
        return [{"id": r[0], "body": r[1], "created_at": r[2]} for r in rows]

    # -- raw read access (export) --------------------------------------------------------

    def read_rows(self, sql: str, params: tuple = ()) -> list[tuple]:
        with self._lock:
            return self._conn.execute(sql, params).fetchall()
