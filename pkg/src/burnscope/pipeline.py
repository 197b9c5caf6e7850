"""Analysis pipeline stages over a stored session.

Stage order: qc -> features -> sfm -> scale -> paint -> metrics ->
align -> report. Each stage loads what it needs from the session store,
persists its outputs through atomic manifests, and returns the updated
session, so an interrupted run leaves the store valid. Sessions whose
reconstruction was ingested directly (a pre-labeled metric mesh) skip
the image stages.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import clinical
from .config import ServiceConfig
from .errors import IncompleteSessionError, ValidationError
from .features import (
    build_scale_space,
    compute_descriptors,
    detect_keypoints,
    match_descriptors,
)
from .geometry.camera import CameraIntrinsics, CameraPose
from .geometry.cloud import SparseCloud, cameras_to_text
from .geometry.scale import ScaleCalibration, apply_metric_scale
from .geometry.sfm import SfmParams, run_incremental_sfm
from .geometry.triangulate import triangulate_point
from .longitudinal import HealingSeries, IcpParams, compute_deltas, icp_align
from .mapping import BurnMask, PaintView, paint_mesh
from .mesh import LabeledMesh
from .models import (
    AlignmentRecord,
    AssessmentSession,
    Clock,
    MeshRecord,
    ReportRef,
    utc_now,
)
from .quality import ConfidenceIndicators, ImageBuffer, validate_image_set
from .report import generate_report
from .store import SessionStore

STAGES = ("qc", "features", "sfm", "scale", "paint", "metrics", "align", "report")

ProgressCallback = Callable[[str, str], None]  # (stage, status)


@dataclass
class PipelineContext:
    store: SessionStore
    config: ServiceConfig = field(default_factory=ServiceConfig)
    rng: Optional[np.random.Generator] = None
    clock: Clock = utc_now

    def __post_init__(self):
        if self.rng is None:
            seed = self.config.seed
            self.rng = np.random.default_rng(seed)

    # ------------------------------------------------------------------
    # helpers

    def _load_image(self, session, view) -> ImageBuffer:
        return ImageBuffer.from_bytes(self.store.read_artifact(session, view.image))

    def _features_path(self, session, view_id):
        sdir = self.store.session_dir(session.patient_id, session.session_id)
        return sdir / "features" / f"{view_id}.npz"

    def _load_mesh(self, session) -> LabeledMesh:
        if session.reconstruction is None:
            raise IncompleteSessionError("session has no mesh")
        return LabeledMesh.from_ply_bytes(
            self.store.read_artifact(session, session.reconstruction.artifact)
        )

    def _store_mesh(self, session, mesh: LabeledMesh, filename: str) -> None:
        ref = self.store.add_artifact(session, "mesh", filename, mesh.to_ply_bytes())
        session.reconstruction = MeshRecord(
            artifact=ref,
            units=mesh.units,
            n_vertices=mesh.n_vertices,
            n_faces=mesh.n_faces,
        )

    def _accepted_views(self, session) -> list:
        return [v for v in session.views if v.qc and v.qc.accepted]

    def mesh_direct(self, session) -> bool:
        """True when analysis runs on an ingested metric mesh, not images."""
        return session.reconstruction is not None and not session.views

    # ------------------------------------------------------------------
    # stages

    def stage_qc(self, session: AssessmentSession) -> AssessmentSession:
        if self.mesh_direct(session):
            return session
        images = [self._load_image(session, v) for v in session.views]
        verdicts, set_verdict = validate_image_set(images, self.config.qc)
        for view, verdict in zip(session.views, verdicts):
            view.qc = verdict
        self.store.persist_session(session)
        if not set_verdict.accepted:
            raise ValidationError(
                "image set rejected: " + "; ".join(set_verdict.reasons)
            )
        return session

    def stage_features(self, session: AssessmentSession) -> AssessmentSession:
        if self.mesh_direct(session):
            return session
        for view in self._accepted_views(session):
            image = self._load_image(session, view)
            space = build_scale_space(image, self.config.scale_space)
            keypoints = detect_keypoints(space, self.config.detect)
            result = compute_descriptors(space, keypoints)
            kept = [keypoints[i] for i in result.keypoint_indices]
            path = self._features_path(session, view.view_id)
            path.parent.mkdir(parents=True, exist_ok=True)
            buf = io.BytesIO()
            np.savez_compressed(
                buf,
                pixels=np.array([[k.x, k.y] for k in kept]).reshape(-1, 2),
                sigmas=np.array([k.sigma for k in kept]),
                thetas=np.array([k.theta for k in kept]),
                descriptors=result.descriptors,
            )
            from .store import atomic_write_bytes

            atomic_write_bytes(path, buf.getvalue())
        return session

    def _load_features(self, session) -> tuple:
        pixels, descriptors = {}, {}
        for view in self._accepted_views(session):
            path = self._features_path(session, view.view_id)
            if not path.exists():
                raise IncompleteSessionError(
                    f"features missing for view {view.view_id}; run the features stage"
                )
            data = np.load(path)
            pixels[view.view_id] = data["pixels"]
            descriptors[view.view_id] = data["descriptors"]
        return pixels, descriptors

    def stage_sfm(self, session: AssessmentSession) -> AssessmentSession:
        if self.mesh_direct(session):
            return session
        pixels, descriptors = self._load_features(session)
        views = self._accepted_views(session)
        view_ids = [v.view_id for v in views]
        intrinsics = {
            v.view_id: self.config.intrinsics_for(v.width, v.height) for v in views
        }
        pair_matches = {}
        for i in range(len(view_ids)):
            for j in range(i + 1, len(view_ids)):
                a, b = view_ids[i], view_ids[j]
                if len(descriptors[a]) < 2 or len(descriptors[b]) < 2:
                    continue
                matches = match_descriptors(
                    descriptors[a], descriptors[b], self.config.ratio_threshold
                )
                good = np.array(
                    [[m.index_a, m.index_b] for m in matches if m.passed_ratio]
                )
                if len(good) >= self.config.min_pair_matches:
                    pair_matches[(a, b)] = good

        result = run_incremental_sfm(
            pixels, pair_matches, intrinsics, SfmParams(), self.rng
        )
        for view in views:
            if view.view_id in result.views:
                K, pose = result.views[view.view_id]
                view.intrinsics = [K.fx, K.fy, K.cx, K.cy, K.skew]
                view.rotation = [float(x) for x in pose.rotation.reshape(-1)]
                view.translation = [float(x) for x in pose.translation]

        cloud_ref = self.store.add_artifact(
            session, "cloud", "sparse_cloud.ply", result.cloud.to_ply().encode()
        )
        session.sparse_cloud = cloud_ref
        cams = {vid: result.views[vid] for vid in result.views}
        self.store.add_artifact(
            session, "cameras", "cameras.txt", cameras_to_text(cams).encode()
        )
        session.confidence = ConfidenceIndicators(
            n_images=result.n_images,
            inlier_ratio=min(result.inlier_ratio, 1.0),
            mean_reprojection_error=result.mean_reprojection_px,
            coverage=session.confidence.coverage if session.confidence else 0.0,
        )
        self.store.persist_session(session)
        return session

    def _posed_views(self, session) -> dict:
        out = {}
        for view in session.views:
            if view.rotation and view.translation and view.intrinsics:
                K = CameraIntrinsics.from_list(view.intrinsics)
                pose = CameraPose(
                    np.array(view.rotation).reshape(3, 3), np.array(view.translation)
                )
                out[view.view_id] = (K, pose)
        return out

    def stage_scale(self, session: AssessmentSession) -> AssessmentSession:
        if self.mesh_direct(session):
            return session
        if session.scale_ref is None:
            raise ValidationError(
                "no scale reference designated; POST the reference pixel pair first"
            )
        if session.sparse_cloud is None:
            raise IncompleteSessionError("run the sfm stage before scaling")
        posed = self._posed_views(session)
        ref = session.scale_ref
        for vid in (ref.view_a, ref.view_b):
            if vid not in posed:
                raise ValidationError(f"scale reference view {vid!r} has no pose")
        cams = [posed[ref.view_a], posed[ref.view_b]]
        point1, _ = triangulate_point(ref.point1_pixels, cams)
        point2, _ = triangulate_point(ref.point2_pixels, cams)
        cal = ScaleCalibration(
            point1=point1, point2=point2, known_distance=ref.known_distance_cm
        )
        s = cal.scale_factor
        ref.scale_factor = float(s)
        ref.model_distance = float(cal.model_distance)

        cloud = SparseCloud.from_ply(
            self.store.read_artifact(session, session.sparse_cloud).decode()
        )
        scaled = apply_metric_scale(cloud, cal)
        session.sparse_cloud = self.store.add_artifact(
            session, "cloud", "sparse_cloud_cm.ply", scaled.to_ply().encode()
        )
        for view in session.views:
            if view.translation:
                view.translation = [float(x * s) for x in view.translation]
        self.store.persist_session(session)
        return session

    def stage_paint(self, session: AssessmentSession) -> AssessmentSession:
        if session.reconstruction is None:
            raise IncompleteSessionError(
                "no mesh ingested for this session; upload one before painting"
            )
        if self.mesh_direct(session) or not session.masks:
            return session  # labels ship with the ingested mesh
        mesh = self._load_mesh(session)
        if mesh.units != "cm":
            raise ValidationError("ingested mesh must be in cm for painting")

        if self.config.register_mesh and session.sparse_cloud is not None:
            cloud = SparseCloud.from_ply(
                self.store.read_artifact(session, session.sparse_cloud).decode()
            )
            if cloud.units == "cm" and len(cloud.points) >= 3:
                icp = icp_align(
                    mesh.vertices, cloud.points, IcpParams(trim=True, max_iterations=30)
                )
                mesh = mesh.transformed(icp.transform.rotation, icp.transform.translation)

        posed = self._posed_views(session)
        paint_views = []
        for record in session.masks:
            if record.view_id not in posed:
                continue
            K, pose = posed[record.view_id]
            mask = BurnMask.from_png_bytes(
                self.store.read_artifact(session, record.artifact)
            )
            paint_views.append(PaintView(intrinsics=K, pose=pose, mask=mask))
        if not paint_views:
            raise IncompleteSessionError("no masks align with posed views")

        result = paint_mesh(mesh, paint_views, self.config.fusion)
        self._store_mesh(session, result.mesh, "mesh_labeled.ply")
        if session.confidence:
            session.confidence = ConfidenceIndicators(
                n_images=session.confidence.n_images,
                inlier_ratio=session.confidence.inlier_ratio,
                mean_reprojection_error=session.confidence.mean_reprojection_error,
                coverage=result.coverage,
            )
        self.store.persist_session(session)
        return session

    def stage_metrics(self, session: AssessmentSession) -> AssessmentSession:
        from .surface import compute_burn_metrics

        mesh = self._load_mesh(session)
        patient = self.store.get_patient(session.patient_id)
        bsa_cm2 = None
        if patient.height_cm and patient.weight_kg:
            bsa_cm2 = clinical.estimate_bsa_cm2(patient.height_cm, patient.weight_kg)
        session.metrics = compute_burn_metrics(
            mesh,
            body_surface_area_cm2=bsa_cm2,
            hops=self.config.ring_hops,
            fit_method=self.config.reference_fit,
            clock=self.clock,
        )
        weight = session.intake.weight_kg or patient.weight_kg
        tbsa = session.metrics.tbsa_percent
        if weight and tbsa:
            session.fluids = clinical.parkland_plan(weight, tbsa)
        if session.confidence:
            session.confidence = session.confidence.with_score()
        self.store.persist_session(session)
        return session

    def stage_align(self, session: AssessmentSession) -> AssessmentSession:
        sessions = self.store.list_sessions(session.patient_id)
        baseline = next(
            (s for s in sessions if s.reconstruction is not None), None
        )
        if baseline is None or baseline.session_id == session.session_id:
            return session
        current = self._load_mesh(session)
        base_mesh = self._load_mesh(baseline)

        def healthy_vertices(mesh: LabeledMesh) -> np.ndarray:
            burned = set(mesh.burn_vertex_indices().tolist())
            if not burned:
                return mesh.vertices
            keep = [i for i in range(mesh.n_vertices) if i not in burned]
            return mesh.vertices[keep]

        result = icp_align(
            healthy_vertices(current),
            healthy_vertices(base_mesh),
            IcpParams(trim=True),
        )
        session.alignment = AlignmentRecord(
            baseline_session_id=baseline.session_id,
            rotation=[float(x) for x in result.transform.rotation.reshape(-1)],
            translation=[float(x) for x in result.transform.translation],
            rms=result.rms,
            iterations=result.iterations,
        )
        self.store.persist_session(session)
        return session

    def patient_series(self, patient_id: str) -> Optional[HealingSeries]:
        sessions = [
            s
            for s in self.store.list_sessions(patient_id)
            if s.metrics is not None
        ]
        if not sessions:
            return None
        baseline_time = sessions[0].captured_at
        series = [
            (
                (s.captured_at - baseline_time).total_seconds() / 86400.0,
                s.metrics,
            )
            for s in sessions
        ]
        return compute_deltas(series)

    def stage_report(self, session: AssessmentSession) -> AssessmentSession:
        patient = self.store.get_patient(session.patient_id)
        recommendations = None
        if session.metrics is not None:
            ruleset = (
                clinical.Ruleset.from_file(self.config.ruleset_path)
                if self.config.ruleset_path
                else clinical.DEFAULT_RULESET
            )
            recommendations = clinical.recommend(session, ruleset)
        series = self.patient_series(session.patient_id)
        document = generate_report(
            session,
            patient=patient,
            series=series,
            recommendations=recommendations,
            clock=self.clock,
        )
        version = (session.report.version + 1) if session.report else 1
        structured = self.store.add_artifact(
            session, "report", f"report.v{version}.json", document.to_json().encode()
        )
        html_ref = self.store.add_artifact(
            session, "report", f"report.v{version}.html", document.to_html().encode()
        )
        session.report = ReportRef(
            version=version,
            content_hash=document.content_hash,
            structured=structured,
            html=html_ref,
        )
        self.store.persist_session(session)
        return session

    # ------------------------------------------------------------------

    def run_stage(self, stage: str, session: AssessmentSession) -> AssessmentSession:
        runner = getattr(self, f"stage_{stage}", None)
        if runner is None:
            raise ValidationError(f"unknown pipeline stage {stage!r}")
        return runner(session)

    def run_all(
        self,
        session_id: str,
        progress: Optional[ProgressCallback] = None,
    ) -> AssessmentSession:
        session = self.store.load_session(session_id)
        for stage in STAGES:
            if progress:
                progress(stage, "running")
            session = self.run_stage(stage, session)
            if progress:
                progress(stage, "done")
        return session
