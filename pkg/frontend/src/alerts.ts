/**
 * Alert history panel: fired alerts with delivery outcome and local
 * acknowledgment. The badge counts unacknowledged alerts; Ack marks
 * the row and queues an AckAlert command for the device.
 */

import { GAUGES } from "./gauges.js";
import { unackedCount, type AlertItem, type ViewModel } from "./model.js";

function fieldLabel(fieldIndex: number): string {
  const spec = GAUGES.find((g) => g.field === fieldIndex);
  return spec ? spec.label : `field${fieldIndex}`;
}

function when(ms: number): string {
  return new Date(ms).toISOString().replace(".000Z", "Z").replace("T", " ");
}

function renderRow(a: AlertItem): string {
  const condition = `${fieldLabel(a.fieldIndex)} ${a.comparator} ${a.threshold}`;
  const delivery = a.delivery ?? "pending";
  const button = a.acked
    ? `<span class="acked">acked</span>`
    : `<button type="button" data-action="ack" data-alert-id="${a.id}">Ack</button>`;
  return `
    <tr class="alert-row severity-${a.severity}${a.acked ? " alert-acked" : ""}" data-alert-id="${a.id}">
      <td>${when(a.createdAt)}</td>
      <td>${condition}</td>
      <td>${a.value.toFixed(1)}</td>
      <td>${a.severity}</td>
      <td>${a.sink}: ${delivery}</td>
      <td>${button}</td>
    </tr>`;
}

export function renderBadge(m: ViewModel): string {
  const n = unackedCount(m);
  return n > 0
    ? `<span class="badge badge-active" data-role="alert-badge">${n}</span>`
    : `<span class="badge" data-role="alert-badge">0</span>`;
}

export function renderAlerts(m: ViewModel): string {
  if (m.alerts.length === 0) {
    return `<p class="empty">No alerts fired.</p>`;
  }
  const rows = [...m.alerts].reverse().map(renderRow).join("");
  return `
    <table class="alert-table">
      <thead>
        <tr><th>Time (UTC)</th><th>Rule</th><th>Value</th><th>Severity</th><th>Delivery</th><th></th></tr>
      </thead>
      <tbody>${rows}</tbody>
    </table>`;
}
