"""Single-worker analysis job queue with per-session exclusivity.

The contract the service depends on: submit returns immediately; status
reads are consistent snapshots; a session has at most one non-terminal
job; terminal states never change. Desk-scale workloads need exactly
one worker, not an executor framework.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from ..errors import ConflictError, NotFoundError
from ..models import Clock, new_id, utc_now
from ..pipeline import STAGES, PipelineContext

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "failed"

STAGE_PENDING = "pending"
STAGE_RUNNING = "running"
STAGE_DONE = "done"
STAGE_FAILED = "failed"
STAGE_SKIPPED = "skipped"


@dataclass
class AnalysisJob:
    job_id: str
    session_id: str
    state: str = QUEUED
    submitted_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None
    stages: dict = field(default_factory=lambda: {s: STAGE_PENDING for s in STAGES})
    error_stage: Optional[str] = None
    error_detail: Optional[str] = None

    def snapshot(self) -> dict:
        from ..models import format_timestamp

        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "state": self.state,
            "submitted_at": format_timestamp(self.submitted_at)
            if self.submitted_at
            else None,
            "finished_at": format_timestamp(self.finished_at)
            if self.finished_at
            else None,
            "stages": dict(self.stages),
            "error_stage": self.error_stage,
            "error_detail": self.error_detail,
        }


class JobRunner:
    def __init__(self, context: PipelineContext, clock: Clock = utc_now):
        self.context = context
        self.clock = clock
        self._queue: queue.Queue = queue.Queue()
        self._jobs: dict[str, AnalysisJob] = {}
        self._active: dict[str, str] = {}  # session_id -> non-terminal job_id
        self._lock = threading.Lock()
        self._worker = threading.Thread(target=self._run_loop, daemon=True)
        self._worker.start()

    # ------------------------------------------------------------------

    def submit(self, session_id: str) -> str:
        with self._lock:
            if session_id in self._active:
                raise ConflictError(
                    f"session {session_id} already has active job {self._active[session_id]}"
                )
            job = AnalysisJob(
                job_id=new_id(), session_id=session_id, submitted_at=self.clock()
            )
            self._jobs[job.job_id] = job
            self._active[session_id] = job.job_id
        self._queue.put(job.job_id)
        return job.job_id

    def status(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"unknown job id {job_id!r}")
            return job.snapshot()

    def wait_idle(self, timeout: float = 120.0) -> None:
        """Block until the queue drains; test helper."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if not self._active:
                    return
            time.sleep(0.02)
        raise TimeoutError("job queue did not drain in time")

    # ------------------------------------------------------------------

    def _run_loop(self):
        while True:
            job_id = self._queue.get()
            job = self._jobs[job_id]
            with self._lock:
                job.state = RUNNING
            try:
                self._execute(job)
                with self._lock:
                    job.state = DONE
                    job.finished_at = self.clock()
            except Exception as exc:  # job failure is a state, not a crash
                with self._lock:
                    job.state = FAILED
                    job.finished_at = self.clock()
                    if job.error_stage is None:
                        job.error_stage = next(
                            (s for s, st in job.stages.items() if st == STAGE_RUNNING),
                            None,
                        )
                    job.error_detail = f"{type(exc).__name__}: {exc}"
                    for stage, state in job.stages.items():
                        if state == STAGE_RUNNING:
                            job.stages[stage] = STAGE_FAILED
            finally:
                with self._lock:
                    self._active.pop(job.session_id, None)
                self._queue.task_done()

    def _execute(self, job: AnalysisJob):
        session = self.context.store.load_session(job.session_id)
        skip = set()
        if self.context.mesh_direct(session):
            skip = {"qc", "features", "sfm", "scale", "paint"}
        for stage in STAGES:
            if stage in skip:
                with self._lock:
                    job.stages[stage] = STAGE_SKIPPED
                continue
            with self._lock:
                job.stages[stage] = STAGE_RUNNING
            session = self.context.run_stage(stage, session)
            with self._lock:
                job.stages[stage] = STAGE_DONE
