"""File-backed session store with versioned, atomically written manifests.

Layout::

    <root>/patients/<pid>/patient.json
    <root>/patients/<pid>/sessions/<sid>/manifest.v<N>.json
    <root>/patients/<pid>/sessions/<sid>/<artifact files>

No persisted file is ever mutated in place: every write goes to a
temporary file in the same directory followed by an atomic rename.
Manifests are never overwritten; each persist creates the next version.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Optional

from .errors import IntegrityError, ManifestParseError, NotFoundError, VersionError
from .models import (
    SUPPORTED_SCHEMA_VERSIONS,
    ArtifactRef,
    AssessmentSession,
    Clock,
    IntakeRecord,
    PatientRecord,
    new_id,
    utc_now,
)

_MANIFEST_RE = re.compile(r"^manifest\.v(\d+)\.json$")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: Path, payload: dict) -> None:
    atomic_write_bytes(path, json.dumps(payload, indent=2).encode("utf-8"))


def _check_relpath(relpath: str) -> str:
    """Artifacts live inside their session directory; no escapes."""
    path = Path(relpath)
    if path.is_absolute() or ".." in path.parts:
        raise IntegrityError(f"artifact path {relpath!r} escapes its session directory")
    return relpath


class SessionStore:
    """One directory per patient, one per session, manifest per session."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "patients").mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------------
    # patients

    def patient_dir(self, patient_id: str) -> Path:
        return self.root / "patients" / patient_id

    def add_patient(self, patient: PatientRecord) -> Path:
        path = self.patient_dir(patient.patient_id) / "patient.json"
        if path.exists():
            raise IntegrityError(f"patient {patient.patient_id} already exists")
        atomic_write_json(path, patient.to_dict())
        return path

    def get_patient(self, patient_id: str) -> PatientRecord:
        path = self.patient_dir(patient_id) / "patient.json"
        if not path.exists():
            raise NotFoundError(f"unknown patient id {patient_id!r}")
        return PatientRecord.from_dict(json.loads(path.read_text()))

    def list_patients(self) -> list[PatientRecord]:
        out = []
        for pdir in sorted((self.root / "patients").iterdir()):
            record = pdir / "patient.json"
            if record.exists():
                out.append(PatientRecord.from_dict(json.loads(record.read_text())))
        return out

    # ------------------------------------------------------------------
    # sessions

    def session_dir(self, patient_id: str, session_id: str) -> Path:
        return self.patient_dir(patient_id) / "sessions" / session_id

    def create_session(
        self, patient: PatientRecord | str, intake: IntakeRecord, clock: Clock = utc_now
    ) -> AssessmentSession:
        """New session for an existing patient; artifact lists start empty."""
        patient_id = patient if isinstance(patient, str) else patient.patient_id
        self.get_patient(patient_id)  # not-found guard
        session = AssessmentSession(
            session_id=new_id(),
            patient_id=patient_id,
            captured_at=clock(),
            intake=intake,
        )
        self.session_dir(patient_id, session.session_id).mkdir(parents=True, exist_ok=True)
        return session

    def _find_session_dir(self, session_id: str) -> Path:
        for pdir in (self.root / "patients").iterdir():
            cand = pdir / "sessions" / session_id
            if cand.is_dir():
                return cand
        raise NotFoundError(f"unknown session id {session_id!r}")

    def _manifest_versions(self, sdir: Path) -> list[tuple[int, Path]]:
        versions = []
        for child in sdir.iterdir():
            m = _MANIFEST_RE.match(child.name)
            if m:
                versions.append((int(m.group(1)), child))
        return sorted(versions)

    def persist_session(self, session: AssessmentSession) -> Path:
        """Write the next manifest version; earlier versions are retained."""
        sdir = self.session_dir(session.patient_id, session.session_id)
        sdir.mkdir(parents=True, exist_ok=True)
        for ref in session.artifacts():
            apath = sdir / _check_relpath(ref.relpath)
            if not apath.is_file():
                raise IntegrityError(
                    f"session {session.session_id} references missing artifact {ref.relpath}"
                )
        versions = self._manifest_versions(sdir)
        next_version = versions[-1][0] + 1 if versions else 1
        path = sdir / f"manifest.v{next_version}.json"
        atomic_write_json(path, session.to_dict())
        return path

    def load_session(self, session_id: str, verify_hashes: bool = False) -> AssessmentSession:
        sdir = self._find_session_dir(session_id)
        versions = self._manifest_versions(sdir)
        if not versions:
            raise NotFoundError(f"session {session_id!r} has no persisted manifest")
        _, path = versions[-1]
        try:
            raw = json.loads(path.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ManifestParseError(f"cannot parse manifest {path}: {exc}") from exc
        schema_version = raw.get("schema_version")
        if schema_version not in SUPPORTED_SCHEMA_VERSIONS:
            raise VersionError(
                f"manifest {path} has unsupported schema_version {schema_version!r}; "
                f"supported: {sorted(SUPPORTED_SCHEMA_VERSIONS)}"
            )
        session = AssessmentSession.from_dict(raw)
        if verify_hashes:
            for ref in session.artifacts():
                apath = sdir / ref.relpath
                if not apath.is_file():
                    raise IntegrityError(f"missing artifact {ref.relpath}")
                if sha256_hex(apath.read_bytes()) != ref.sha256:
                    raise IntegrityError(f"hash mismatch for artifact {ref.relpath}")
        return session

    def list_sessions(self, patient_id: str) -> list[AssessmentSession]:
        """Persisted sessions for a patient, sorted by captured_at (canonical timeline)."""
        self.get_patient(patient_id)
        sess_root = self.patient_dir(patient_id) / "sessions"
        sessions = []
        if sess_root.is_dir():
            for sdir in sess_root.iterdir():
                if self._manifest_versions(sdir):
                    sessions.append(self.load_session(sdir.name))
        sessions.sort(key=lambda s: (s.captured_at, s.session_id))
        return sessions

    # ------------------------------------------------------------------
    # artifacts

    def add_artifact(
        self,
        session: AssessmentSession,
        kind: str,
        filename: str,
        data: bytes,
        subdir: Optional[str] = None,
    ) -> ArtifactRef:
        """Write artifact bytes into the session directory, hashed and atomic."""
        relpath = _check_relpath(f"{subdir}/{filename}" if subdir else filename)
        sdir = self.session_dir(session.patient_id, session.session_id)
        atomic_write_bytes(sdir / relpath, data)
        return ArtifactRef(relpath=relpath, sha256=sha256_hex(data), kind=kind)

    def artifact_path(self, session: AssessmentSession, ref: ArtifactRef) -> Path:
        _check_relpath(ref.relpath)
        return self.session_dir(session.patient_id, session.session_id) / ref.relpath

    def read_artifact(self, session: AssessmentSession, ref: ArtifactRef) -> bytes:
        path = self.artifact_path(session, ref)
        if not path.is_file():
            raise IntegrityError(f"missing artifact {ref.relpath}")
        return path.read_bytes()
