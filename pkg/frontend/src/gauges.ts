/**
 * Live gauge panel: one gauge per channel field, newest entry only.
 *
 * Band coloring follows the device LED semantics — green inside the
 * configured band, yellow outside it, red for critical water level or
 * a critical alert field — and a field absent from the newest entry
 * renders as "no data" rather than a stale or invented value.
 */

import {
  latestEntry,
  type Entry,
  type Thresholds,
  type ViewModel,
} from "./model.js";

export type Zone = "ok" | "warn" | "crit" | "info";

export interface GaugeSpec {
  field: number;
  label: string;
  unit: string;
  min: number;
  max: number;
  decimals: number;
}

export const GAUGES: GaugeSpec[] = [
  { field: 1, label: "Temperature", unit: "°C", min: 0, max: 50, decimals: 1 },
  { field: 2, label: "Humidity", unit: "%", min: 0, max: 100, decimals: 1 },
  { field: 3, label: "Soil moisture", unit: "%", min: 0, max: 100, decimals: 1 },
  { field: 4, label: "Water level", unit: "cm", min: 0, max: 45, decimals: 1 },
  { field: 5, label: "Nutrient temp", unit: "°C", min: 0, max: 50, decimals: 1 },
  { field: 6, label: "Pump", unit: "", min: 0, max: 1, decimals: 0 },
  { field: 7, label: "Alert level", unit: "", min: 0, max: 2, decimals: 0 },
  { field: 8, label: "Sampling rate", unit: "Hz", min: 0, max: 1, decimals: 1 },
];

/** Zone of a value on one gauge under the current thresholds. */
export function gaugeZone(
  field: number,
  value: number,
  th: Thresholds,
): Zone {
  switch (field) {
    case 3:
      return value >= th.soilLowPct && value <= th.soilHighPct ? "ok" : "warn";
    case 4:
      return value <= th.waterCriticalCm ? "crit" : "ok";
    case 7:
      return value >= 2 ? "crit" : value >= 1 ? "warn" : "ok";
    case 6:
    case 8:
      return "info";
    default:
      return "ok";
  }
}

export function formatValue(spec: GaugeSpec, value: number): string {
  if (spec.field === 6) {
    return value ? "ON" : "OFF";
  }
  if (spec.field === 7) {
    return ["OK", "WARN", "CRIT"][Math.min(2, Math.max(0, Math.round(value)))];
  }
  const text = value.toFixed(spec.decimals);
  return spec.unit ? `${text} ${spec.unit}` : text;
}

function barPercent(spec: GaugeSpec, value: number): number {
  const span = spec.max - spec.min;
  const frac = span > 0 ? (value - spec.min) / span : 0;
  return Math.round(100 * Math.min(1, Math.max(0, frac)));
}

/** Band edges drawn on the bar, as [fromPct, toPct, zone] stripes. */
export function bandStripes(
  spec: GaugeSpec,
  th: Thresholds,
): [number, number, Zone][] {
  const pct = (v: number) => barPercent(spec, v);
  if (spec.field === 3) {
    return [
      [0, pct(th.soilLowPct), "warn"],
      [pct(th.soilLowPct), pct(th.soilHighPct), "ok"],
      [pct(th.soilHighPct), 100, "warn"],
    ];
  }
  if (spec.field === 4) {
    return [
      [0, pct(th.waterCriticalCm), "crit"],
      [pct(th.waterCriticalCm), 100, "ok"],
    ];
  }
  return [[0, 100, "info"]];
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderGauge(
  spec: GaugeSpec,
  entry: Entry | null,
  th: Thresholds,
): string {
  const value = entry ? entry.fields[spec.field - 1] : null;
  const stripes = bandStripes(spec, th)
    .map(
      ([from, to, zone]) =>
        `<span class="band band-${zone}" style="left:${from}%;width:${to - from}%"></span>`,
    )
    .join("");
  if (value === null) {
    return `
      <div class="gauge gauge-empty" data-field="${spec.field}">
        <div class="gauge-label">${esc(spec.label)}</div>
        <div class="gauge-value">no data</div>
        <div class="gauge-bar">${stripes}</div>
      </div>`;
  }
  const zone = gaugeZone(spec.field, value, th);
  return `
    <div class="gauge gauge-${zone}" data-field="${spec.field}">
      <div class="gauge-label">${esc(spec.label)}</div>
      <div class="gauge-value">${esc(formatValue(spec, value))}</div>
      <div class="gauge-bar">${stripes}<span class="needle" style="left:${barPercent(spec, value)}%"></span></div>
    </div>`;
}

/** True when the newest entry carries a critical alert level. */
export function criticalActive(m: ViewModel): boolean {
  const e = latestEntry(m);
  return e !== null && e.fields[6] !== null && e.fields[6] >= 2;
}

export function renderGauges(m: ViewModel): string {
  const entry = latestEntry(m);
  const banner = criticalActive(m)
    ? `<div class="banner banner-crit">CRITICAL: device reports alert level 2 — check water level and sensors</div>`
    : "";
  const cells = GAUGES.map((spec) => renderGauge(spec, entry, m.thresholds));
  return `${banner}<div class="gauges">${cells.join("")}</div>`;
}
