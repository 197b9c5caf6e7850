/** Minimal dependency-free SVG line charts for the healing triptych. */

import type { SeriesPoint } from "./timeline.js";

export interface ChartSpec {
  title: string;
  unit: string;
  points: SeriesPoint[];
  width?: number;
  height?: number;
}

function scale(values: number[], outMin: number, outMax: number): (v: number) => number {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  return (v) => outMin + ((v - lo) / span) * (outMax - outMin);
}

export function renderLineChart(spec: ChartSpec): string {
  const width = spec.width ?? 260;
  const height = spec.height ?? 160;
  const margin = 28;
  if (spec.points.length === 0) {
    return `<svg width="${width}" height="${height}" role="img"></svg>`;
  }
  const xs = spec.points.map((p) => p.day);
  const ys = spec.points.map((p) => p.value);
  const sx = scale(xs, margin, width - 8);
  const sy = scale(ys, height - margin, 14);
  const path = spec.points
    .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.day).toFixed(1)},${sy(p.value).toFixed(1)}`)
    .join(" ");
  const dots = spec.points
    .map(
      (p) =>
        `<circle cx="${sx(p.day).toFixed(1)}" cy="${sy(p.value).toFixed(1)}" r="3">` +
        `<title>day ${p.day}: ${p.value} ${spec.unit}</title></circle>`,
    )
    .join("");
  return (
    `<svg width="${width}" height="${height}" role="img" class="chart">` +
    `<text x="${margin}" y="12" class="chart-title">${spec.title} (${spec.unit})</text>` +
    `<path d="${path}" fill="none" stroke="currentColor" stroke-width="2"/>` +
    dots +
    `<line x1="${margin}" y1="${height - margin}" x2="${width - 8}" y2="${height - margin}" stroke="#999"/>` +
    `</svg>`
  );
}
