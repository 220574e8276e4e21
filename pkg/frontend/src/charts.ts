/**
 * Time-series charts as self-contained SVG strings.
 *
 * The chart domain is explicit state owned by the page: presets anchor
 * to the newest entry, wheel zoom scales the span around the cursor,
 * drag pans it. Rendering is a pure function of (entries, field,
 * domain) so tests assert on geometry without a DOM.
 */

import type { Entry } from "./model.js";

/** Inclusive visible time range, epoch milliseconds. */
export interface Domain {
  start: number;
  end: number;
}

export type RangePreset = "1h" | "24h" | "7d";

export const PRESET_MS: Record<RangePreset, number> = {
  "1h": 3_600_000,
  "24h": 86_400_000,
  "7d": 604_800_000,
};

/** Narrower than this, zoom stops: one device upload cycle. */
export const MIN_SPAN_MS = 15_000;

export interface Point {
  t: number;
  v: number;
}

export function presetDomain(preset: RangePreset, anchorMs: number): Domain {
  return { start: anchorMs - PRESET_MS[preset], end: anchorMs };
}

export function visiblePoints(
  entries: Entry[],
  fieldIndex: number,
  domain: Domain,
): Point[] {
  const pts: Point[] = [];
  for (const e of entries) {
    const v = e.fields[fieldIndex - 1];
    if (v !== null && e.createdAt >= domain.start && e.createdAt <= domain.end) {
      pts.push({ t: e.createdAt, v });
    }
  }
  return pts;
}

export function zoomDomain(
  d: Domain,
  factor: number,
  centerMs: number,
): Domain {
  const span = Math.max(MIN_SPAN_MS, (d.end - d.start) * factor);
  const mid = Math.min(Math.max(centerMs, d.start), d.end);
  const frac = (mid - d.start) / (d.end - d.start || 1);
  return { start: mid - span * frac, end: mid + span * (1 - frac) };
}

export function panDomain(d: Domain, deltaMs: number): Domain {
  return { start: d.start + deltaMs, end: d.end + deltaMs };
}

export const WIDTH = 640;
export const HEIGHT = 180;
export const PAD_LEFT = 48;
export const PAD_RIGHT = 10;
const PAD_TOP = 10;
const PAD_BOTTOM = 22;

/** Time under a horizontal fraction of the plot area (0 = left edge). */
export function timeAtPlotFraction(d: Domain, frac: number): number {
  return d.start + Math.min(1, Math.max(0, frac)) * (d.end - d.start);
}

function xPixel(t: number, d: Domain): number {
  const frac = (t - d.start) / (d.end - d.start || 1);
  return PAD_LEFT + frac * (WIDTH - PAD_LEFT - PAD_RIGHT);
}

function timeTick(ms: number, spanMs: number): string {
  const d = new Date(ms);
  const hh = String(d.getUTCHours()).padStart(2, "0");
  const mm = String(d.getUTCMinutes()).padStart(2, "0");
  if (spanMs > 2 * 86_400_000) {
    return `${d.getUTCMonth() + 1}/${d.getUTCDate()} ${hh}:${mm}`;
  }
  if (spanMs < 120_000) {
    const ss = String(d.getUTCSeconds()).padStart(2, "0");
    return `${hh}:${mm}:${ss}`;
  }
  return `${hh}:${mm}`;
}

/** Round to a pleasant tick step: 1/2/5 times a power of ten. */
export function niceStep(rawStep: number): number {
  if (!(rawStep > 0) || !Number.isFinite(rawStep)) {
    return 1;
  }
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  for (const m of [1, 2, 5, 10]) {
    if (rawStep <= m * mag) {
      return m * mag;
    }
  }
  return 10 * mag;
}

function yTicks(lo: number, hi: number): number[] {
  const step = niceStep((hi - lo) / 4);
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-9; v += step) {
    ticks.push(Number(v.toFixed(10)));
  }
  return ticks;
}

export function renderChart(
  entries: Entry[],
  fieldIndex: number,
  label: string,
  domain: Domain,
): string {
  const pts = visiblePoints(entries, fieldIndex, domain);
  const head =
    `<svg class="chart" data-field="${fieldIndex}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `xmlns="http://www.w3.org/2000/svg" role="img" aria-label="${label}">`;
  const title = `<text class="chart-title" x="${PAD_LEFT}" y="${PAD_TOP + 2}">${label}</text>`;
  if (pts.length === 0) {
    return (
      `${head}${title}<text class="chart-empty" x="${WIDTH / 2}" y="${HEIGHT / 2}" ` +
      `text-anchor="middle">no data in range</text></svg>`
    );
  }

  let lo = Infinity;
  let hi = -Infinity;
  for (const p of pts) {
    lo = Math.min(lo, p.v);
    hi = Math.max(hi, p.v);
  }
  if (hi - lo < 1e-9) {
    lo -= 1;
    hi += 1;
  }
  const margin = 0.08 * (hi - lo);
  lo -= margin;
  hi += margin;

  const yPixel = (v: number) =>
    HEIGHT - PAD_BOTTOM - ((v - lo) / (hi - lo)) * (HEIGHT - PAD_TOP - PAD_BOTTOM);

  // One vertex per horizontal pixel is plenty; stride past the rest.
  const stride = Math.max(1, Math.ceil(pts.length / (WIDTH - PAD_LEFT - PAD_RIGHT)));
  const coords: string[] = [];
  for (let i = 0; i < pts.length; i += stride) {
    const p = pts[i];
    coords.push(`${xPixel(p.t, domain).toFixed(1)},${yPixel(p.v).toFixed(1)}`);
  }
  const last = pts[pts.length - 1];
  coords.push(`${xPixel(last.t, domain).toFixed(1)},${yPixel(last.v).toFixed(1)}`);

  const span = domain.end - domain.start;
  const grid: string[] = [];
  for (const v of yTicks(lo, hi)) {
    const y = yPixel(v).toFixed(1);
    grid.push(
      `<line class="grid" x1="${PAD_LEFT}" y1="${y}" x2="${WIDTH - PAD_RIGHT}" y2="${y}"/>`,
      `<text class="tick" x="${PAD_LEFT - 6}" y="${y}" text-anchor="end" dominant-baseline="middle">${v}</text>`,
    );
  }
  for (let i = 0; i <= 4; i++) {
    const t = domain.start + (span * i) / 4;
    const x = xPixel(t, domain).toFixed(1);
    grid.push(
      `<text class="tick" x="${x}" y="${HEIGHT - 6}" text-anchor="middle">${timeTick(t, span)}</text>`,
    );
  }

  return (
    `${head}${title}${grid.join("")}` +
    `<polyline class="series" fill="none" points="${coords.join(" ")}"/>` +
    `</svg>`
  );
}
