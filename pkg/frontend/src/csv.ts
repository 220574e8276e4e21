/**
 * CSV export of the visible chart range.
 *
 * The dashboard never re-serializes entries: it downloads the
 * service's own export.csv for the visible start/end, so the file a
 * user saves is byte-identical to what the API returns for that
 * range (full-precision floats included).
 */

import type { IsoRange } from "./api.js";
import type { Domain } from "./charts.js";
import { isoUtc } from "./model.js";

/** What the exporter needs from the API client. */
export interface CsvSource {
  exportCsv(range?: IsoRange): Promise<string>;
}

/** Chart domain to inclusive wire-format bounds. */
export function rangeParams(domain: Domain): IsoRange {
  return { start: isoUtc(domain.start), end: isoUtc(domain.end) };
}

export function exportFilename(domain: Domain): string {
  const tag = (ms: number) => isoUtc(ms).replace(/[:]/g, "").replace("Z", "");
  return `feed_${tag(domain.start)}_${tag(domain.end)}.csv`;
}

export async function fetchVisibleCsv(
  client: CsvSource,
  domain: Domain,
): Promise<string> {
  return client.exportCsv(rangeParams(domain));
}

/** Browser download of a text blob (no-op outside a DOM). */
export function triggerDownload(text: string, filename: string): void {
  if (typeof document === "undefined") {
    return;
  }
  const blob = new Blob([text], { type: "text/csv;charset=utf-8" });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  document.body.appendChild(a);
  a.click();
  document.body.removeChild(a);
  URL.revokeObjectURL(url);
}
