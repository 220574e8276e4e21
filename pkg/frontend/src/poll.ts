/**
 * The dashboard's single polling loop.
 *
 * One tick = send any queued commands, then one feeds.json request and
 * one alerts.json request, then settle pending confirmations. Ticks
 * run no closer than POLL_INTERVAL_MS apart, so the dashboard never
 * issues more than one feed request per five seconds per channel; a
 * failed tick flips the connection state and everything queued is
 * retried next tick.
 */

import type { AlertsDoc, FeedDoc } from "./api.js";
import {
  applyAlerts,
  applyFeed,
  commandSendFailed,
  commandSent,
  emptyModel,
  issueCommand,
  markPoll,
  pruneSettled,
  reconcilePending,
  ackAlert as reduceAck,
  type CommandVerb,
  type ViewModel,
} from "./model.js";

export const POLL_INTERVAL_MS = 5000;

/** First fetch backfills history; later ones only top up the tail. */
export const INITIAL_RESULTS = 8000;
export const REFRESH_RESULTS = 400;

/** What the loop needs from the API client. */
export interface FeedSource {
  readFeed(results: number): Promise<FeedDoc>;
  alerts(): Promise<AlertsDoc>;
  postCommand(verb: string, args?: Record<string, unknown>): Promise<number>;
}

export class Poller {
  model: ViewModel = emptyModel();

  private timer: ReturnType<typeof setInterval> | null = null;
  private ticking = false;
  private primed = false;
  private flushing: Promise<void> | null = null;

  constructor(
    private readonly client: FeedSource,
    private readonly onChange: (m: ViewModel) => void,
    private readonly intervalMs: number = POLL_INTERVAL_MS,
  ) {}

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => void this.tick(), this.intervalMs);
      void this.tick();
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private emit(m: ViewModel): void {
    this.model = m;
    this.onChange(m);
  }

  /** Queue an operator command and push it out without waiting a tick. */
  issue(verb: CommandVerb, args: Record<string, unknown>): void {
    this.emit(issueCommand(this.model, verb, args, Date.now()));
    void this.flushCommands();
  }

  ack(alertId: number): void {
    this.emit(reduceAck(this.model, alertId, Date.now()));
    void this.flushCommands();
  }

  /**
   * POST queued commands in issue order; stop at the first failure.
   * Single-flight: concurrent callers share the in-flight pass instead
   * of starting a second one that would double-post whatever the first
   * pass has not yet marked sent.
   */
  flushCommands(): Promise<void> {
    if (this.flushing === null) {
      this.flushing = this.drainQueued().finally(() => {
        this.flushing = null;
      });
    }
    return this.flushing;
  }

  private async drainQueued(): Promise<void> {
    // Re-read the model each round so a command issued mid-drain still
    // goes out in this pass rather than waiting for the next tick.
    for (;;) {
      const cmd = this.model.pending.find((c) => c.status === "queued");
      if (cmd === undefined) {
        return;
      }
      try {
        const id = await this.client.postCommand(cmd.verb, cmd.args);
        this.emit(commandSent(this.model, cmd.ref, id));
      } catch {
        this.emit(commandSendFailed(this.model, cmd.ref));
        return;
      }
    }
  }

  async tick(nowMs: number = Date.now()): Promise<void> {
    if (this.ticking) {
      return;
    }
    this.ticking = true;
    try {
      await this.flushCommands();
      const results = this.primed ? REFRESH_RESULTS : INITIAL_RESULTS;
      const feed = await this.client.readFeed(results);
      const alerts = await this.client.alerts();
      this.primed = true;
      let m = applyFeed(this.model, feed);
      m = applyAlerts(m, alerts);
      m = reconcilePending(m, nowMs);
      m = pruneSettled(m, nowMs);
      this.emit(markPoll(m, true, nowMs));
    } catch {
      this.emit(markPoll(this.model, false, nowMs));
    } finally {
      this.ticking = false;
    }
  }
}
