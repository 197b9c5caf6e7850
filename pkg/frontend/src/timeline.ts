/**
 * Timeline view model: session cards plus chart series.
 *
 * Every displayed number is taken verbatim from the API response;
 * the console never recomputes clinical values.
 */

import type { HealingSeriesPayload, SessionCard, TimelineResponse } from "./types.js";

export interface SeriesPoint {
  day: number;
  value: number;
}

export interface TimelineViewModel {
  cards: SessionCard[]; // ascending captured_at
  areaSeries: SeriesPoint[]; // cm^2 vs days since baseline
  depthSeries: SeriesPoint[]; // d_max mm
  volumeSeries: SeriesPoint[]; // cm^3
  percentBadges: Array<{ day: number; percent: number | null }>;
  healingRate: number | null; // cm^2/day, as served
  projectedRecoveryDays: number | null;
  chartsVisible: boolean; // hidden for degenerate single-point series
}

export function buildTimeline(response: TimelineResponse): TimelineViewModel {
  const cards = [...response.sessions].sort((a, b) =>
    a.captured_at < b.captured_at ? -1 : a.captured_at > b.captured_at ? 1 : 0,
  );
  const series: HealingSeriesPayload | null = response.series;
  const points = series ? series.points : [];
  return {
    cards,
    areaSeries: points.map((p) => ({ day: p.day, value: p.metrics.area_cm2 })),
    depthSeries: points.map((p) => ({ day: p.day, value: p.metrics.d_max_mm })),
    volumeSeries: points.map((p) => ({ day: p.day, value: p.metrics.volume_proxy_cm3 })),
    percentBadges: points.map((p) => ({ day: p.day, percent: p.percent_area_change })),
    healingRate: series ? series.healing_rate_cm2_per_day : null,
    projectedRecoveryDays: series ? series.projected_recovery_days : null,
    chartsVisible: points.length >= 2,
  };
}

/** Every number shown by the timeline, for the no-client-computation contract. */
export function displayedNumbers(model: TimelineViewModel): number[] {
  const out: number[] = [];
  for (const s of [model.areaSeries, model.depthSeries, model.volumeSeries]) {
    for (const p of s) {
      out.push(p.day, p.value);
    }
  }
  for (const badge of model.percentBadges) {
    out.push(badge.day);
    if (badge.percent !== null) out.push(badge.percent);
  }
  if (model.healingRate !== null) out.push(model.healingRate);
  if (model.projectedRecoveryDays !== null) out.push(model.projectedRecoveryDays);
  return out;
}
