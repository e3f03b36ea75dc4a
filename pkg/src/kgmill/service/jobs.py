"""Async job execution for the HTTP layer.

Jobs run on daemon threads and journal status/progress into the store's jobs
table. Retrying a mutation with the same idempotency key returns the original
job instead of starting a new one, and at most one relationship run executes
per code set at a time (later runs queue on the code set's lock).
"""

from __future__ import annotations

import logging
import threading
from collections import defaultdict

from kgmill.store.models import RunStatus
from kgmill.store.repository import Store

logger = logging.getLogger(__name__)


class JobRunner:
    def __init__(self, store: Store):
        self.store = store
        self._threads: dict[int, threading.Thread] = {}
        self._code_set_locks: dict[int, threading.Lock] = defaultdict(threading.Lock)
        self._registry_lock = threading.Lock()

    def submit(self, kind: str, work, idempotency_key: str | None = None,
               code_set_id: int | None = None) -> int:
        """work(progress) runs on a thread; returns the job id immediately.

        work receives a progress(done, total) callable and returns a
        (result_ref, terminal_status) pair; raising marks the job failed.
        """
        job_id, created = self.store.create_job(kind, idempotency_key)
        if not created:
            return job_id

        def progress(done: int, total: int) -> None:
            self.store.update_job(job_id, done=done, total=total)

        def target() -> None:
            if code_set_id is not None:
                lock = self._code_set_locks[code_set_id]
            else:
                lock = threading.Lock()
            with lock:
                self.store.update_job(job_id, status="running")
                try:
                    result_ref, status = work(progress)
                except Exception as exc:  # job panics become failed jobs
                    logger.exception("job %s failed", job_id)
                    self.store.update_job(job_id, status="failed", error=str(exc))
                    return
                self.store.update_job(job_id, status=status, result_ref=result_ref)

        thread = threading.Thread(target=target, daemon=True, name=f"job-{job_id}")
        with self._registry_lock:
            self._threads[job_id] = thread
        thread.start()
        return job_id

    def wait(self, job_id: int, timeout: float | None = None) -> None:
        with self._registry_lock:
            thread = self._threads.get(job_id)
        if thread is not None:
            thread.join(timeout)


def run_terminal_status(run_status: RunStatus) -> str:
    """Map a run's terminal state onto the job vocabulary."""
    if run_status is RunStatus.KILLED_BUDGET:
        return "killed_budget"
    if run_status is RunStatus.FAILED:
        return "failed"
    return "completed"
