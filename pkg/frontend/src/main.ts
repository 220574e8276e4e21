/**
 * Page wiring: bootstrap keys from the serving host, start the poll
 * loop, and route DOM events to the poller and chart state. All
 * presentation comes from the pure render modules; this file owns the
 * two pieces of UI-only state (active tab, chart domain).
 */

import { ApiClient, bootstrap } from "./api.js";
import {
  PAD_LEFT,
  PAD_RIGHT,
  WIDTH,
  panDomain,
  presetDomain,
  renderChart,
  timeAtPlotFraction,
  zoomDomain,
  type Domain,
  type RangePreset,
} from "./charts.js";
import { GAUGES, renderGauges } from "./gauges.js";
import { renderAlerts, renderBadge } from "./alerts.js";
import { renderControl } from "./control.js";
import { exportFilename, fetchVisibleCsv, triggerDownload } from "./csv.js";
import { latestEntry, type ViewModel } from "./model.js";
import { Poller } from "./poll.js";
import { renderScreenTabs, type ScreenName } from "./screens.js";

type Tab = "dashboard" | "charts" | "alerts" | "control" | "device";

const TABS: [Tab, string][] = [
  ["dashboard", "Dashboard"],
  ["charts", "Charts"],
  ["alerts", "Alerts"],
  ["control", "Control"],
  ["device", "Device"],
];

const CHART_FIELDS_DEFAULT = [3, 4];

interface UiState {
  tab: Tab;
  screen: ScreenName;
  preset: RangePreset;
  /** Domain slides with incoming data until the user zooms or pans. */
  followLatest: boolean;
  domain: Domain;
  chartFields: number[];
}

const ui: UiState = {
  tab: "dashboard",
  screen: "Main",
  preset: "1h",
  followLatest: true,
  domain: { start: 0, end: 1 },
  chartFields: [...CHART_FIELDS_DEFAULT],
};

let client: ApiClient;
let poller: Poller;

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing #${id}`);
  }
  return el;
}

function anchorDomain(m: ViewModel): void {
  const latest = latestEntry(m);
  const anchor = latest ? latest.createdAt : Date.now();
  ui.domain = presetDomain(ui.preset, anchor);
}

function renderHeader(m: ViewModel): string {
  const name = m.channel ? m.channel.name : "connecting…";
  const conn = `<span class="conn conn-${m.connection}">${m.connection}</span>`;
  const tabs = TABS.map(
    ([tab, label]) =>
      `<button type="button" class="tab${tab === ui.tab ? " tab-active" : ""}" ` +
      `data-action="tab" data-tab="${tab}">${label}${
        tab === "alerts" ? " " + renderBadge(m) : ""
      }</button>`,
  ).join("");
  return `
    <h1>${name}</h1>
    <nav class="tabs">${tabs}</nav>
    <div class="conn-box">${conn}</div>`;
}

function renderCharts(m: ViewModel): string {
  const boxes = GAUGES.map(
    (g) =>
      `<label class="field-pick"><input type="checkbox" data-action="chart-field" ` +
      `value="${g.field}"${ui.chartFields.includes(g.field) ? " checked" : ""}>` +
      `${g.label}</label>`,
  ).join("");
  const presets = (["1h", "24h", "7d"] as RangePreset[])
    .map(
      (p) =>
        `<button type="button" class="preset${
          ui.preset === p && ui.followLatest ? " tab-active" : ""
        }" data-action="preset" data-preset="${p}">${p}</button>`,
    )
    .join("");
  const charts = ui.chartFields
    .map((f) => {
      const spec = GAUGES.find((g) => g.field === f);
      return `<div class="chart-box" data-field="${f}">${renderChart(
        m.entries,
        f,
        spec ? spec.label : `field${f}`,
        ui.domain,
      )}</div>`;
    })
    .join("");
  return `
    <div class="chart-controls">
      ${presets}
      <button type="button" data-action="export-csv">Export CSV (visible range)</button>
      <span class="hint">scroll to zoom, drag to pan</span>
    </div>
    <div class="field-picks">${boxes}</div>
    <div data-role="charts">${charts}</div>`;
}

function render(m: ViewModel): void {
  if (ui.followLatest) {
    anchorDomain(m);
  }
  byId("header").innerHTML = renderHeader(m);
  const content = byId("content");
  // Re-rendering under the user's cursor would eat form input focus.
  if (content.contains(document.activeElement) &&
      document.activeElement instanceof HTMLInputElement) {
    return;
  }
  switch (ui.tab) {
    case "dashboard":
      content.innerHTML = renderGauges(m);
      break;
    case "charts":
      content.innerHTML = renderCharts(m);
      break;
    case "alerts":
      content.innerHTML = renderAlerts(m);
      break;
    case "control":
      content.innerHTML = renderControl(m);
      break;
    case "device":
      content.innerHTML = renderScreenTabs(m, ui.screen);
      break;
  }
}

function plotFraction(box: HTMLElement, clientX: number): number {
  const rect = box.getBoundingClientRect();
  const scale = rect.width / WIDTH;
  const left = rect.left + PAD_LEFT * scale;
  const width = (WIDTH - PAD_LEFT - PAD_RIGHT) * scale;
  return (clientX - left) / width;
}

function wireEvents(): void {
  const content = byId("content");

  document.addEventListener("click", (ev) => {
    const el = (ev.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!el) {
      return;
    }
    const action = el.dataset.action;
    if (action === "tab") {
      ui.tab = el.dataset.tab as Tab;
      render(poller.model);
    } else if (action === "screen") {
      ui.screen = el.dataset.screen as ScreenName;
      render(poller.model);
    } else if (action === "preset") {
      ui.preset = el.dataset.preset as RangePreset;
      ui.followLatest = true;
      render(poller.model);
    } else if (action === "pump-on") {
      poller.issue("PumpOn", {});
    } else if (action === "pump-off") {
      poller.issue("PumpOff", {});
    } else if (action === "ack") {
      poller.ack(Number(el.dataset.alertId));
    } else if (action === "export-csv") {
      void fetchVisibleCsv(client, ui.domain).then((text) =>
        triggerDownload(text, exportFilename(ui.domain)),
      );
    }
  });

  document.addEventListener("submit", (ev) => {
    const form = ev.target as HTMLFormElement;
    if (form.dataset.action !== "set-thresholds") {
      return;
    }
    ev.preventDefault();
    const data = new FormData(form);
    poller.issue("SetThresholds", {
      soil_low_pct: Number(data.get("soil_low_pct")),
      soil_high_pct: Number(data.get("soil_high_pct")),
      water_critical_cm: Number(data.get("water_critical_cm")),
    });
    (document.activeElement as HTMLElement | null)?.blur();
    render(poller.model);
  });

  document.addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.dataset.action === "chart-field") {
      const field = Number(input.value);
      ui.chartFields = input.checked
        ? [...ui.chartFields, field].sort((a, b) => a - b)
        : ui.chartFields.filter((f) => f !== field);
      render(poller.model);
    }
  });

  content.addEventListener(
    "wheel",
    (ev) => {
      const box = (ev.target as HTMLElement).closest<HTMLElement>(".chart-box");
      if (!box) {
        return;
      }
      ev.preventDefault();
      const factor = ev.deltaY > 0 ? 1.25 : 0.8;
      const center = timeAtPlotFraction(ui.domain, plotFraction(box, ev.clientX));
      ui.domain = zoomDomain(ui.domain, factor, center);
      ui.followLatest = false;
      render(poller.model);
    },
    { passive: false },
  );

  let dragging: { x: number; domain: Domain } | null = null;
  content.addEventListener("pointerdown", (ev) => {
    const box = (ev.target as HTMLElement).closest<HTMLElement>(".chart-box");
    if (box) {
      dragging = { x: ev.clientX, domain: { ...ui.domain } };
      box.setPointerCapture(ev.pointerId);
    }
  });
  content.addEventListener("pointermove", (ev) => {
    if (!dragging) {
      return;
    }
    const box = (ev.target as HTMLElement).closest<HTMLElement>(".chart-box");
    if (!box) {
      return;
    }
    const rect = box.getBoundingClientRect();
    const scale = rect.width / WIDTH;
    const span = dragging.domain.end - dragging.domain.start;
    const perPixel = span / ((WIDTH - PAD_LEFT - PAD_RIGHT) * scale);
    ui.domain = panDomain(dragging.domain, (dragging.x - ev.clientX) * perPixel);
    ui.followLatest = false;
    render(poller.model);
  });
  content.addEventListener("pointerup", () => {
    dragging = null;
  });
}

async function start(): Promise<void> {
  const cfg = await bootstrap(window.location.origin);
  client = new ApiClient(cfg);
  poller = new Poller(client, render);
  wireEvents();
  poller.start();
}

void start().catch((err) => {
  byId("content").innerHTML =
    `<p class="notice">Cannot reach the service: ${String(err)}. ` +
    `Start it with <code>plantsim serve --assets &lt;dashboard dist&gt;</code> ` +
    `and reload.</p>`;
});
