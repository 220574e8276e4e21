/**
 * Manual control panel: pump override, threshold editing, and the
 * pending-command list. Buttons only issue commands — acceptance,
 * refusal, and every safety decision stay on the device, and the
 * panel reports what telemetry confirmed.
 */

import {
  latestField,
  type PendingCommand,
  type ViewModel,
} from "./model.js";

const STATUS_TEXT: Record<PendingCommand["status"], string> = {
  queued: "queued (will retry until sent)",
  sent: "sent, awaiting telemetry",
  confirmed: "confirmed",
  unconfirmed: "unconfirmed",
};

function describe(cmd: PendingCommand): string {
  if (cmd.verb === "SetThresholds") {
    const a = cmd.args as Record<string, number>;
    return `SetThresholds(${a.soil_low_pct}, ${a.soil_high_pct}, ${a.water_critical_cm})`;
  }
  if (cmd.verb === "AckAlert") {
    return `AckAlert(#${(cmd.args as Record<string, number>).alert_id})`;
  }
  return cmd.verb;
}

function renderPending(m: ViewModel): string {
  if (m.pending.length === 0) {
    return `<p class="empty">No commands issued.</p>`;
  }
  const rows = [...m.pending]
    .reverse()
    .map((cmd) => {
      const note = cmd.note ? ` — ${cmd.note}` : "";
      return `
        <li class="cmd cmd-${cmd.status}" data-ref="${cmd.ref}">
          <span class="cmd-name">${describe(cmd)}</span>
          <span class="cmd-status">${STATUS_TEXT[cmd.status]}${note}</span>
        </li>`;
    })
    .join("");
  return `<ul class="cmd-list">${rows}</ul>`;
}

export function renderControl(m: ViewModel): string {
  const pump = latestField(m, 6);
  const pumpText = pump === null ? "unknown" : pump ? "ON" : "OFF";
  const th = m.thresholds;
  const notice = m.notice
    ? `<p class="notice" data-role="notice">${m.notice}</p>`
    : "";
  return `
    ${notice}
    <section class="panel">
      <h3>Pump override</h3>
      <p>Reported pump state: <strong data-role="pump-state">${pumpText}</strong></p>
      <p>
        <button type="button" data-action="pump-on">Pump ON</button>
        <button type="button" data-action="pump-off">Pump OFF</button>
      </p>
      <p class="hint">The device refuses pump commands while water is
      critical or a sensor fault is active; a refused command shows as
      unconfirmed here and as rejected in the device log.</p>
    </section>
    <section class="panel">
      <h3>Thresholds</h3>
      <form data-action="set-thresholds">
        <label>Soil low %
          <input name="soil_low_pct" type="number" step="0.1" value="${th.soilLowPct}">
        </label>
        <label>Soil high %
          <input name="soil_high_pct" type="number" step="0.1" value="${th.soilHighPct}">
        </label>
        <label>Water critical cm
          <input name="water_critical_cm" type="number" step="0.1" value="${th.waterCriticalCm}">
        </label>
        <button type="submit">Apply</button>
      </form>
    </section>
    <section class="panel">
      <h3>Issued commands</h3>
      ${renderPending(m)}
    </section>`;
}
