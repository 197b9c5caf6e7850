/**
 * Single-page clinician console: mode -> intake -> capture -> analyze ->
 * review -> report. All clinical numbers render exactly as served; the
 * console never computes them.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderLineChart } from "./charts.js";
import {
  ABCDE_ITEMS,
  IntakeFormModel,
  IntakeMode,
  completion,
  emptyIntakeForm,
  submitEnabled,
  toApiPayload,
  validateIntake,
} from "./intake.js";
import { describeStages, pollJob } from "./jobs.js";
import { buildTimeline } from "./timeline.js";
import type { ServiceConfigPayload } from "./types.js";

interface AppState {
  config: ServiceConfigPayload | null;
  patientId: string | null;
  sessionId: string | null;
  form: IntakeFormModel;
  acceptedImages: number;
  screen: "mode" | "intake" | "capture" | "analyze" | "review";
}

const api = new ApiClient("");
const state: AppState = {
  config: null,
  patientId: null,
  sessionId: null,
  form: emptyIntakeForm(),
  acceptedImages: 0,
  screen: "mode",
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function show(screen: AppState["screen"]): void {
  state.screen = screen;
  for (const name of ["mode", "intake", "capture", "analyze", "review"]) {
    el(`screen-${name}`).hidden = name !== screen;
  }
}

function banner(message: string, kind: "info" | "error" = "info"): void {
  const node = el("banner");
  node.textContent = message;
  node.className = `banner ${kind}`;
  node.hidden = message === "";
}

// ---------------------------------------------------------------------
// mode selection

function wireModeScreen(): void {
  el("btn-emergency").addEventListener("click", () => startIntake("emergency"));
  el("btn-consultation").addEventListener("click", () => startIntake("consultation"));
}

function startIntake(mode: IntakeMode): void {
  state.form = emptyIntakeForm(mode);
  renderIntake();
  show("intake");
}

// ---------------------------------------------------------------------
// intake form

function renderIntake(): void {
  const form = state.form;
  el("intake-mode").textContent = form.mode;
  const abcdeBlock = el("abcde-block");
  abcdeBlock.hidden = form.mode !== "emergency";
  if (form.mode === "emergency" && abcdeBlock.childElementCount === 0) {
    for (const item of ABCDE_ITEMS) {
      const label = document.createElement("label");
      label.textContent = item;
      const input = document.createElement("input");
      input.dataset.abcde = item;
      input.addEventListener("input", () => {
        form.abcde[item] = input.value;
        refreshIntakeValidity();
      });
      label.appendChild(input);
      abcdeBlock.appendChild(label);
    }
  }
  refreshIntakeValidity();
}

function refreshIntakeValidity(): void {
  const errors = validateIntake(state.form);
  const list = el("intake-errors");
  list.innerHTML = "";
  for (const err of errors) {
    const li = document.createElement("li");
    li.textContent = `${err.field}: ${err.message}`;
    list.appendChild(li);
  }
  (el("btn-intake-submit") as HTMLButtonElement).disabled = !submitEnabled(state.form);
  el("intake-progress").textContent = `${Math.round(completion(state.form) * 100)}% complete`;
}

function wireIntakeScreen(): void {
  const bind = (id: string, apply: (value: string) => void) => {
    el(id).addEventListener("input", (event) => {
      apply((event.target as HTMLInputElement).value);
      refreshIntakeValidity();
    });
  };
  bind("f-mechanism", (v) => (state.form.mechanismText = v));
  bind("f-category", (v) => (state.form.mechanismCategory = v));
  bind("f-site", (v) => (state.form.burnSite = v));
  bind("f-depth", (v) => (state.form.suspectedDepth = v));
  bind("f-weight", (v) => (state.form.weightKg = v === "" ? null : Number(v)));
  bind("f-age", (v) => (state.form.ageYears = v === "" ? null : Number(v)));
  el("f-circumferential").addEventListener("change", (event) => {
    state.form.circumferential = (event.target as HTMLInputElement).checked;
  });

  el("btn-intake-submit").addEventListener("click", async () => {
    try {
      if (!state.patientId) {
        const created = await api.createPatient({
          weight_kg: state.form.weightKg,
          age_years: state.form.ageYears,
        });
        state.patientId = created.patient_id;
      }
      const session = await api.createSession(state.patientId, toApiPayload(state.form));
      state.sessionId = session.session_id;
      banner(`session ${session.session_id.slice(0, 8)} created`);
      renderCaptureChecklist();
      show("capture");
    } catch (err) {
      banner(err instanceof ApiError ? err.detail : String(err), "error");
    }
  });
}

// ---------------------------------------------------------------------
// guided capture

function renderCaptureChecklist(): void {
  const min = state.config?.min_images ?? 6;
  el("capture-rules").innerHTML = [
    `capture at least <strong>${min}</strong> overlapping views in an arc around the wound`,
    `minimum resolution ${state.config?.min_width ?? 800}x${state.config?.min_height ?? 600}`,
    "avoid motion blur; rest elbows or use a support",
    "even diffuse lighting; no flash hotspots",
    "include the scale reference (ruler) in at least two views",
    "upload one segmentation mask per view, named after the view id",
  ]
    .map((rule) => `<li>${rule}</li>`)
    .join("");
  updateCaptureCount();
}

function updateCaptureCount(): void {
  const min = state.config?.min_images ?? 6;
  el("capture-count").textContent = `${state.acceptedImages}/${min} accepted images`;
  (el("btn-analyze") as HTMLButtonElement).disabled = state.acceptedImages < min;
}

function wireCaptureScreen(): void {
  el("input-images").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    if (!input.files || !state.sessionId) return;
    try {
      const views = await api.uploadImages(state.sessionId, Array.from(input.files));
      state.acceptedImages += views.filter((v) => v.verdict.accepted).length;
      const rejected = views.filter((v) => !v.verdict.accepted);
      banner(
        rejected.length
          ? `${rejected.length} image(s) rejected: ${rejected
              .map((v) => v.verdict.reasons.join(", "))
              .join("; ")}`
          : `${views.length} image(s) accepted`,
        rejected.length ? "error" : "info",
      );
      updateCaptureCount();
    } catch (err) {
      banner(err instanceof ApiError ? err.detail : String(err), "error");
    }
  });

  el("input-masks").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    if (!input.files || !state.sessionId) return;
    try {
      await api.uploadMasks(state.sessionId, Array.from(input.files));
      banner("masks uploaded");
    } catch (err) {
      banner(err instanceof ApiError ? err.detail : String(err), "error");
    }
  });

  el("input-mesh").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    if (!input.files || !input.files[0] || !state.sessionId) return;
    try {
      await api.uploadMesh(state.sessionId, input.files[0]);
      banner("mesh uploaded");
    } catch (err) {
      banner(err instanceof ApiError ? err.detail : String(err), "error");
    }
  });

  el("btn-analyze").addEventListener("click", async () => {
    if (!state.sessionId) return;
    try {
      const submitted = await api.analyze(state.sessionId);
      show("analyze");
      await trackJob(submitted.job_id);
    } catch (err) {
      banner(err instanceof ApiError ? err.detail : String(err), "error");
    }
  });
}

// ---------------------------------------------------------------------
// analysis progress

async function trackJob(jobId: string): Promise<void> {
  const progress = el("job-progress");
  const outcome = await pollJob(
    (id) => api.fetchJob(id),
    jobId,
    (update) => {
      if (update.kind === "transient-error") {
        banner(update.transientMessage ?? "transient network issue", "error");
        return;
      }
      banner("");
      if (update.snapshot) {
        progress.textContent = describeStages(update.snapshot);
      }
    },
  );
  if (outcome.terminalState === "done" && state.sessionId && state.patientId) {
    progress.textContent = "analysis complete";
    await renderReview();
    show("review");
  } else if (outcome.terminalState === "not-found") {
    progress.textContent = "job not found";
  } else if (outcome.snapshot) {
    progress.textContent = `analysis failed at stage ${outcome.snapshot.error_stage}: ${outcome.snapshot.error_detail}`;
  }
}

// ---------------------------------------------------------------------
// review: metrics, timeline charts, report link

async function renderReview(): Promise<void> {
  if (!state.sessionId || !state.patientId) return;
  const metrics = await api.getMetrics(state.sessionId);
  el("review-metrics").innerHTML = [
    ["area", `${metrics.area_cm2} cm&sup2;`],
    ["perimeter", `${metrics.perimeter_cm} cm`],
    ["max depth proxy", `${metrics.d_max_mm} mm`],
    ["volume proxy", `${metrics.volume_proxy_cm3} cm&sup3;`],
    ["TBSA", metrics.tbsa_percent === null ? "n/a" : `${metrics.tbsa_percent} %`],
    ["confidence", metrics.confidence?.score === null ? "n/a" : `${metrics.confidence?.score}`],
  ]
    .map(([k, v]) => `<tr><th>${k}</th><td>${v}</td></tr>`)
    .join("");

  const timeline = buildTimeline(await api.getTimeline(state.patientId));
  const charts = el("review-charts");
  if (timeline.chartsVisible) {
    charts.innerHTML =
      renderLineChart({ title: "area", unit: "cm2", points: timeline.areaSeries }) +
      renderLineChart({ title: "max depth", unit: "mm", points: timeline.depthSeries }) +
      renderLineChart({ title: "volume", unit: "cm3", points: timeline.volumeSeries });
  } else {
    charts.innerHTML = "<p>charts appear after a second assessment</p>";
  }
  el("review-badges").innerHTML = timeline.percentBadges
    .map((b) => `<span class="badge">day ${b.day}: ${b.percent === null ? "baseline" : `${b.percent}%`}</span>`)
    .join(" ");
  (el("link-report") as HTMLAnchorElement).href = api.reportUrl(state.sessionId, "html");
  (el("link-report-json") as HTMLAnchorElement).href = api.reportUrl(state.sessionId, "structured");
}

// ---------------------------------------------------------------------

export async function startApp(): Promise<void> {
  wireModeScreen();
  wireIntakeScreen();
  wireCaptureScreen();
  try {
    state.config = await api.getConfig();
  } catch {
    banner("service configuration unavailable; using defaults", "error");
  }
  show("mode");
}

if (typeof document !== "undefined" && document.getElementById("screen-mode")) {
  void startApp();
}
