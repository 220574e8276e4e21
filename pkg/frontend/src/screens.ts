/**
 * Device display mirror: the four 16x2-style OLED screens rendered as
 * dashboard tabs, built from the same telemetry the device uploads.
 * Formats track the device renderer (fixed-width columns) so an
 * operator sees the text the device is showing.
 */

import { latestEntry, type ViewModel } from "./model.js";

export type ScreenName = "Main" | "Secondary" | "Historical" | "Settings";

export const SCREEN_ORDER: ScreenName[] = [
  "Main",
  "Secondary",
  "Historical",
  "Settings",
];

const LEVEL_NAMES = ["Green", "Yellow", "Red"];

function pad(value: number | null, width: number, decimals: number): string {
  const text = value === null ? "--" : value.toFixed(decimals);
  return text.padStart(width);
}

function statsRow(label: string, values: number[]): string {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const mean = values.reduce((a, b) => a + b, 0) / values.length;
  return `${label.padEnd(4)}${lo.toFixed(1).padStart(5)}${mean
    .toFixed(1)
    .padStart(6)}${hi.toFixed(1).padStart(6)}`;
}

export function screenLines(m: ViewModel, screen: ScreenName): string[] {
  const e = latestEntry(m);
  const f = (i: number) => (e ? e.fields[i - 1] : null);
  if (screen === "Main") {
    const pump = f(6);
    return [
      "PLANT MONITOR",
      `Temp ${pad(f(1), 6, 1)} C`,
      `Hum  ${pad(f(2), 6, 1)} %`,
      `Soil ${pad(f(3), 6, 1)} %`,
      `Pump ${pump === null ? "--" : pump ? "ON" : "OFF"}`,
    ];
  }
  if (screen === "Secondary") {
    const level = f(7);
    const led =
      level === null ? "--" : LEVEL_NAMES[Math.min(2, Math.max(0, level))];
    return [
      "SYSTEM STATUS",
      `Water ${pad(f(4), 5, 1)} cm`,
      `Nutr  ${pad(f(5), 5, 1)} C`,
      `LED   ${led}`,
      `Rate  ${pad(f(8), 4, 1)} Hz`,
    ];
  }
  if (screen === "Historical") {
    const header = "24H  MIN  MEAN   MAX";
    const dayAgo = e ? e.createdAt - 86_400_000 : 0;
    const window = m.entries.filter((x) => x.createdAt >= dayAgo);
    const series = (i: number) =>
      window.map((x) => x.fields[i - 1]).filter((v): v is number => v !== null);
    const temp = series(1);
    if (temp.length === 0) {
      return [header, "no data"];
    }
    return [
      header,
      statsRow("Temp", temp),
      statsRow("Hum", series(2)),
      statsRow("Soil", series(3)),
      statsRow("Watr", series(4)),
    ];
  }
  const th = m.thresholds;
  return [
    "SETTINGS",
    `SoilLo ${th.soilLowPct.toFixed(1).padStart(5)} %`,
    `SoilHi ${th.soilHighPct.toFixed(1).padStart(5)} %`,
    `WatCrit ${th.waterCriticalCm.toFixed(1).padStart(4)} cm`,
  ];
}

export function renderScreen(m: ViewModel, screen: ScreenName): string {
  const lines = screenLines(m, screen)
    .map((l) => l.replace(/&/g, "&amp;").replace(/</g, "&lt;"))
    .join("\n");
  return `<pre class="oled" data-screen="${screen}">${lines}</pre>`;
}

export function renderScreenTabs(m: ViewModel, active: ScreenName): string {
  const tabs = SCREEN_ORDER.map(
    (name) =>
      `<button type="button" class="tab${name === active ? " tab-active" : ""}" ` +
      `data-action="screen" data-screen="${name}">${name}</button>`,
  ).join("");
  return `<div class="tabs">${tabs}</div>${renderScreen(m, active)}`;
}
