/**
 * Builders for wire-shaped documents, so tests read as data.
 */

import type {
  AlertDoc,
  AlertsDoc,
  ChannelDoc,
  EntryDoc,
  FeedDoc,
} from "../src/api.js";

export const EPOCH = Date.parse("2026-03-01T00:00:00Z");

export function iso(ms: number): string {
  return new Date(ms).toISOString().replace(".000Z", "Z");
}

export const CHANNEL: ChannelDoc = {
  id: 1,
  name: "plant-monitor",
  created_at: iso(EPOCH),
  field1: "temp_c",
  field2: "humidity_pct",
  field3: "soil_moisture_pct",
  field4: "water_level_cm",
  field5: "nutrient_temp_c",
  field6: "pump_state",
  field7: "alert_level",
  field8: "sampling_rate_hz",
};

/** Entry with sane defaults; override individual fields as needed. */
export function entryDoc(
  entryId: number,
  offsetS: number,
  overrides: Partial<Record<number, number | null>> = {},
): EntryDoc {
  const defaults: Record<number, number | null> = {
    1: 21.5,
    2: 60.0,
    3: 70.0,
    4: 40.0,
    5: 21.0,
    6: 0,
    7: 0,
    8: 0.5,
  };
  const doc: EntryDoc = {
    created_at: iso(EPOCH + offsetS * 1000),
    entry_id: entryId,
  };
  for (let i = 1; i <= 8; i++) {
    doc[`field${i}`] = i in overrides ? overrides[i] : defaults[i];
  }
  return doc;
}

export function feedDoc(entries: EntryDoc[]): FeedDoc {
  return { channel: CHANNEL, feeds: entries };
}

export function alertDoc(
  id: number,
  offsetS: number,
  overrides: Partial<AlertDoc> = {},
): AlertDoc {
  return {
    id,
    rule_id: 1,
    channel_id: 1,
    field_index: 3,
    comparator: "<",
    threshold: 60,
    value: 54.2,
    severity: "warning",
    sink: "EmailLike",
    created_at: iso(EPOCH + offsetS * 1000),
    ...overrides,
  };
}

export function alertsDoc(
  alerts: AlertDoc[],
  delivered = true,
): AlertsDoc {
  return {
    channel_id: 1,
    rules: [
      {
        id: 1,
        field_index: 3,
        comparator: "<",
        threshold: 60,
        severity: "warning",
        sink: "EmailLike",
        rearm_gap: 2,
      },
    ],
    alerts,
    delivery_log: delivered
      ? alerts.map((a) => ({
          alert_id: a.id,
          sink: a.sink,
          enqueued_at: a.created_at,
          delivered_at: a.created_at,
          status: "Delivered",
        }))
      : [],
  };
}
