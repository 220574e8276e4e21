/**
 * REST client for the plant-monitor ingest service.
 *
 * Wire shapes mirror the service exactly (docs/api.md in the backend
 * repo): timestamps are ISO-8601 UTC with whole-second resolution,
 * field values are numbers or null, ids are integers. The client adds
 * nothing on top — one method per endpoint, errors surfaced as ApiError.
 */

export interface ApiConfig {
  baseUrl: string;
  channelId: number;
  channelName: string;
  readKey: string;
  writeKey: string;
}

export interface ChannelDoc {
  id: number;
  name: string;
  created_at: string;
  [label: `field${number}`]: string | number | undefined;
}

export interface EntryDoc {
  created_at: string;
  entry_id: number;
  [value: `field${number}`]: number | string | null | undefined;
}

export interface FeedDoc {
  channel: ChannelDoc;
  feeds: EntryDoc[];
}

export interface RuleDoc {
  id: number;
  field_index: number;
  comparator: string;
  threshold: number;
  severity: string;
  sink: string;
  rearm_gap: number;
}

export interface AlertDoc {
  id: number;
  rule_id: number;
  channel_id: number;
  field_index: number;
  comparator: string;
  threshold: number;
  value: number;
  severity: string;
  sink: string;
  created_at: string;
}

export interface DeliveryDoc {
  alert_id: number;
  sink: string;
  enqueued_at: string;
  delivered_at: string;
  status: string;
}

export interface AlertsDoc {
  channel_id: number;
  rules: RuleDoc[];
  alerts: AlertDoc[];
  delivery_log: DeliveryDoc[];
}

export interface CommandDoc {
  id: number;
  verb: string;
  args: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** ISO range in wire format; both bounds inclusive. */
export interface IsoRange {
  start: string;
  end: string;
}

async function getJson<T>(url: string): Promise<T> {
  const r = await fetch(url);
  if (!r.ok) {
    throw new ApiError(r.status, await errorText(r));
  }
  return (await r.json()) as T;
}

async function errorText(r: Response): Promise<string> {
  try {
    const doc = (await r.json()) as { error?: string };
    return doc.error ?? `HTTP ${r.status}`;
  } catch {
    return `HTTP ${r.status}`;
  }
}

/** Fetch channel id and keys from a server started by `plantsim serve`. */
export async function bootstrap(baseUrl: string): Promise<ApiConfig> {
  const base = baseUrl.replace(/\/$/, "");
  const doc = await getJson<{
    channel_id: number;
    name: string;
    read_key: string;
    write_key: string;
  }>(`${base}/bootstrap.json`);
  return {
    baseUrl: base,
    channelId: doc.channel_id,
    channelName: doc.name,
    readKey: doc.read_key,
    writeKey: doc.write_key,
  };
}

export class ApiClient {
  constructor(readonly cfg: ApiConfig) {}

  private channelUrl(suffix: string, params: Record<string, string>): string {
    const q = new URLSearchParams(params);
    return `${this.cfg.baseUrl}/channels/${this.cfg.channelId}/${suffix}?${q}`;
  }

  readFeed(results: number, range?: IsoRange): Promise<FeedDoc> {
    const params: Record<string, string> = {
      api_key: this.cfg.readKey,
      results: String(results),
    };
    if (range) {
      params.start = range.start;
      params.end = range.end;
    }
    return getJson<FeedDoc>(this.channelUrl("feeds.json", params));
  }

  readField(fieldIndex: number, results: number): Promise<FeedDoc> {
    return getJson<FeedDoc>(
      this.channelUrl(`fields/${fieldIndex}.json`, {
        api_key: this.cfg.readKey,
        results: String(results),
      }),
    );
  }

  alerts(): Promise<AlertsDoc> {
    return getJson<AlertsDoc>(
      this.channelUrl("alerts.json", { api_key: this.cfg.readKey }),
    );
  }

  /** POST a remote command; resolves to the command id the queue assigned. */
  async postCommand(
    verb: string,
    args: Record<string, unknown> = {},
  ): Promise<number> {
    const url = this.channelUrl("commands", { api_key: this.cfg.writeKey });
    const r = await fetch(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ verb, args }),
    });
    if (!r.ok) {
      throw new ApiError(r.status, await errorText(r));
    }
    const doc = (await r.json()) as { id: number };
    return doc.id;
  }

  /** The service's own CSV for a time range, byte-for-byte. */
  async exportCsv(range?: IsoRange): Promise<string> {
    const params: Record<string, string> = { api_key: this.cfg.readKey };
    if (range) {
      params.start = range.start;
      params.end = range.end;
    }
    const r = await fetch(this.channelUrl("export.csv", params));
    if (!r.ok) {
      throw new ApiError(r.status, await errorText(r));
    }
    return r.text();
  }

  /** Write an entry directly (test injection; devices normally own this). */
  async update(
    fields: Record<number, number>,
    seq: number,
    createdAt?: string,
  ): Promise<number> {
    const params = new URLSearchParams({
      api_key: this.cfg.writeKey,
      seq: String(seq),
    });
    for (const [i, v] of Object.entries(fields)) {
      params.set(`field${i}`, String(v));
    }
    if (createdAt) {
      params.set("created_at", createdAt);
    }
    const r = await fetch(`${this.cfg.baseUrl}/update?${params}`);
    if (!r.ok) {
      throw new ApiError(r.status, await errorText(r));
    }
    return parseInt(await r.text(), 10);
  }

  /** Dequeue one pending command (the device's role; used by tests). */
  async executeCommand(): Promise<CommandDoc | null> {
    const r = await fetch(
      this.channelUrl("commands/execute", { api_key: this.cfg.writeKey }),
    );
    if (r.status === 204) {
      return null;
    }
    if (!r.ok) {
      throw new ApiError(r.status, await errorText(r));
    }
    return (await r.json()) as CommandDoc;
  }
}
