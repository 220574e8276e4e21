/**
 * Dashboard view model: plain data plus pure reducers over API payloads.
 *
 * No business logic lives here — thresholds and the pump interlock are
 * enforced device-side. The model is bookkeeping: the rolling entry
 * series, alert list with local acknowledgment state, and issued
 * commands tracked from "queued" until telemetry confirms them or a
 * timeout marks them unconfirmed. Reducers return fresh objects so
 * rendering can compare by reference.
 */

import type { AlertsDoc, ChannelDoc, EntryDoc, FeedDoc } from "./api.js";

export const FIELD_COUNT = 8;

/** Confirmation budget for pump commands: two 15 s upload cycles + slack. */
export const CONFIRM_TIMEOUT_MS = 60_000;

/** Entries beyond the feed-results cap are dropped oldest-first. */
export const MAX_ENTRIES = 8000;

/** New entries after which a pump command without effect is suspect. */
export const CONFIRM_ENTRY_BUDGET = 3;

export interface ChannelMeta {
  id: number;
  name: string;
  createdAt: number;
  labels: string[];
}

export interface Entry {
  entryId: number;
  createdAt: number;
  fields: (number | null)[];
}

export interface Thresholds {
  soilLowPct: number;
  soilHighPct: number;
  waterCriticalCm: number;
}

export const DEFAULT_THRESHOLDS: Thresholds = {
  soilLowPct: 60,
  soilHighPct: 80,
  waterCriticalCm: 5,
};

export type CommandVerb = "PumpOn" | "PumpOff" | "SetThresholds" | "AckAlert";

export type CommandStatus = "queued" | "sent" | "confirmed" | "unconfirmed";

export interface PendingCommand {
  ref: number;
  verb: CommandVerb;
  args: Record<string, unknown>;
  issuedAt: number;
  /** Newest entry id when issued; confirmation looks only past this. */
  baselineEntryId: number;
  status: CommandStatus;
  commandId: number | null;
  note: string;
}

export interface AlertItem {
  id: number;
  ruleId: number;
  fieldIndex: number;
  comparator: string;
  threshold: number;
  value: number;
  severity: string;
  sink: string;
  createdAt: number;
  acked: boolean;
  delivery: string | null;
}

export type Connection = "connecting" | "online" | "offline";

export interface ViewModel {
  channel: ChannelMeta | null;
  entries: Entry[];
  alerts: AlertItem[];
  pending: PendingCommand[];
  thresholds: Thresholds;
  connection: Connection;
  lastPollAt: number | null;
  notice: string;
  nextRef: number;
}

export function emptyModel(): ViewModel {
  return {
    channel: null,
    entries: [],
    alerts: [],
    pending: [],
    thresholds: { ...DEFAULT_THRESHOLDS },
    connection: "connecting",
    lastPollAt: null,
    notice: "",
    nextRef: 1,
  };
}

/** Wire timestamp to epoch milliseconds. */
export function parseIso(s: string): number {
  return Date.parse(s);
}

/** Epoch milliseconds to the wire's whole-second ISO-8601 UTC form. */
export function isoUtc(ms: number): string {
  return new Date(Math.floor(ms / 1000) * 1000)
    .toISOString()
    .replace(".000Z", "Z");
}

export function channelFromDoc(doc: ChannelDoc): ChannelMeta {
  const labels: string[] = [];
  for (let i = 1; i <= FIELD_COUNT; i++) {
    labels.push(String(doc[`field${i}`] ?? `field${i}`));
  }
  return {
    id: doc.id,
    name: doc.name,
    createdAt: parseIso(doc.created_at),
    labels,
  };
}

export function entryFromDoc(doc: EntryDoc): Entry {
  const fields: (number | null)[] = [];
  for (let i = 1; i <= FIELD_COUNT; i++) {
    const v = doc[`field${i}`];
    fields.push(typeof v === "number" ? v : null);
  }
  return { entryId: doc.entry_id, createdAt: parseIso(doc.created_at), fields };
}

export function latestEntry(m: ViewModel): Entry | null {
  return m.entries.length ? m.entries[m.entries.length - 1] : null;
}

/** Gauge invariant source: field value from the newest entry, else null. */
export function latestField(m: ViewModel, fieldIndex: number): number | null {
  const e = latestEntry(m);
  return e ? e.fields[fieldIndex - 1] : null;
}

/** Merge one feeds.json page into the rolling series (dedup by entry id). */
export function applyFeed(m: ViewModel, doc: FeedDoc): ViewModel {
  const byId = new Map<number, Entry>();
  for (const e of m.entries) {
    byId.set(e.entryId, e);
  }
  for (const d of doc.feeds) {
    const e = entryFromDoc(d);
    byId.set(e.entryId, e);
  }
  let entries = [...byId.values()].sort((a, b) => a.entryId - b.entryId);
  if (entries.length > MAX_ENTRIES) {
    entries = entries.slice(entries.length - MAX_ENTRIES);
  }
  return { ...m, channel: channelFromDoc(doc.channel), entries };
}

/** Refresh the alert list, keeping local acknowledgment marks. */
export function applyAlerts(m: ViewModel, doc: AlertsDoc): ViewModel {
  const acked = new Set(m.alerts.filter((a) => a.acked).map((a) => a.id));
  const delivery = new Map<number, string>();
  for (const d of doc.delivery_log) {
    delivery.set(d.alert_id, d.status); // last attempt wins
  }
  const alerts = doc.alerts.map((a) => ({
    id: a.id,
    ruleId: a.rule_id,
    fieldIndex: a.field_index,
    comparator: a.comparator,
    threshold: a.threshold,
    value: a.value,
    severity: a.severity,
    sink: a.sink,
    createdAt: parseIso(a.created_at),
    acked: acked.has(a.id),
    delivery: delivery.get(a.id) ?? null,
  }));
  alerts.sort((a, b) => a.id - b.id);
  return { ...m, alerts };
}

export function unackedCount(m: ViewModel): number {
  return m.alerts.filter((a) => !a.acked).length;
}

export function markPoll(m: ViewModel, ok: boolean, nowMs: number): ViewModel {
  return { ...m, connection: ok ? "online" : "offline", lastPollAt: nowMs };
}

/**
 * Record an operator command locally; the poll loop sends queued
 * commands and retries them while the service is unreachable.
 */
export function issueCommand(
  m: ViewModel,
  verb: CommandVerb,
  args: Record<string, unknown>,
  nowMs: number,
): ViewModel {
  const latest = latestEntry(m);
  const cmd: PendingCommand = {
    ref: m.nextRef,
    verb,
    args,
    issuedAt: nowMs,
    baselineEntryId: latest ? latest.entryId : 0,
    status: "queued",
    commandId: null,
    note: "",
  };
  return { ...m, pending: [...m.pending, cmd], nextRef: m.nextRef + 1 };
}

function patchPending(
  m: ViewModel,
  ref: number,
  patch: Partial<PendingCommand>,
): ViewModel {
  return {
    ...m,
    pending: m.pending.map((c) => (c.ref === ref ? { ...c, ...patch } : c)),
  };
}

/**
 * The service accepted the command. Pump verbs now await their echo in
 * field6; SetThresholds and AckAlert have no telemetry echo, so queue
 * acceptance is their confirmation (the device drains the queue FIFO).
 */
export function commandSent(
  m: ViewModel,
  ref: number,
  commandId: number,
): ViewModel {
  const cmd = m.pending.find((c) => c.ref === ref);
  if (!cmd) {
    return m;
  }
  if (cmd.verb === "PumpOn" || cmd.verb === "PumpOff") {
    return patchPending(m, ref, { status: "sent", commandId });
  }
  const next = patchPending(m, ref, { status: "confirmed", commandId });
  if (cmd.verb === "SetThresholds") {
    return {
      ...next,
      thresholds: {
        soilLowPct: num(cmd.args.soil_low_pct, m.thresholds.soilLowPct),
        soilHighPct: num(cmd.args.soil_high_pct, m.thresholds.soilHighPct),
        waterCriticalCm: num(
          cmd.args.water_critical_cm,
          m.thresholds.waterCriticalCm,
        ),
      },
    };
  }
  return next;
}

function num(v: unknown, fallback: number): number {
  return typeof v === "number" && Number.isFinite(v) ? v : fallback;
}

export function commandSendFailed(m: ViewModel, ref: number): ViewModel {
  return patchPending(m, ref, {
    note: "send failed; will retry",
  });
}

/**
 * Settle sent pump commands against the newest telemetry: field6 equal
 * to the requested state in any entry past the issue baseline confirms;
 * several fresh entries without the flip, or a timeout, marks the
 * command unconfirmed (the usual cause is the device-side safety
 * interlock refusing the pump, which its log reports explicitly).
 */
export function reconcilePending(m: ViewModel, nowMs: number): ViewModel {
  if (!m.pending.some((c) => c.status === "sent")) {
    return m;
  }
  const pending = m.pending.map((cmd) => {
    if (cmd.status !== "sent") {
      return cmd;
    }
    const want = cmd.verb === "PumpOn" ? 1 : 0;
    const after = m.entries.filter((e) => e.entryId > cmd.baselineEntryId);
    if (after.some((e) => e.fields[5] === want)) {
      return { ...cmd, status: "confirmed" as const, note: "" };
    }
    const stale =
      after.length >= CONFIRM_ENTRY_BUDGET ||
      nowMs - cmd.issuedAt > CONFIRM_TIMEOUT_MS;
    if (!stale) {
      return cmd;
    }
    const level = latestField(m, 7);
    const note =
      level === 2
        ? "not reflected in telemetry; device reports a critical state, " +
          "likely refused by the safety interlock"
        : "not reflected in telemetry";
    return { ...cmd, status: "unconfirmed" as const, note };
  });
  return { ...m, pending };
}

/**
 * Acknowledge an alert: mark it locally and queue an AckAlert command
 * so the device silences its buzzer too. Re-acking an acknowledged
 * alert is a no-op; unknown ids leave a notice instead of a command.
 */
export function ackAlert(
  m: ViewModel,
  alertId: number,
  nowMs: number,
): ViewModel {
  const alert = m.alerts.find((a) => a.id === alertId);
  if (!alert) {
    return { ...m, notice: `alert ${alertId} is not in the list` };
  }
  if (alert.acked) {
    return m;
  }
  const marked = {
    ...m,
    alerts: m.alerts.map((a) => (a.id === alertId ? { ...a, acked: true } : a)),
    notice: "",
  };
  return issueCommand(marked, "AckAlert", { alert_id: alertId }, nowMs);
}

export function clearNotice(m: ViewModel): ViewModel {
  return m.notice ? { ...m, notice: "" } : m;
}

/** Drop settled commands older than an hour to keep the panel short. */
export function pruneSettled(m: ViewModel, nowMs: number): ViewModel {
  const keep = m.pending.filter(
    (c) =>
      c.status === "queued" ||
      c.status === "sent" ||
      nowMs - c.issuedAt < 3_600_000,
  );
  return keep.length === m.pending.length ? m : { ...m, pending: keep };
}
