import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { AlertsDoc, FeedDoc } from "../src/api.js";
import { unackedCount, type ViewModel } from "../src/model.js";
import {
  INITIAL_RESULTS,
  POLL_INTERVAL_MS,
  Poller,
  REFRESH_RESULTS,
  type FeedSource,
} from "../src/poll.js";
import { alertDoc, alertsDoc, entryDoc, feedDoc } from "./fixtures.js";

/** Scriptable in-memory service facade. */
class FakeClient implements FeedSource {
  feedCalls: number[] = [];
  posted: [string, Record<string, unknown> | undefined][] = [];
  feed: FeedDoc = feedDoc([entryDoc(1, 0)]);
  alertsDoc: AlertsDoc = alertsDoc([]);
  failFeeds = false;
  failPosts = false;
  private nextCommandId = 1;

  readFeed(results: number): Promise<FeedDoc> {
    this.feedCalls.push(results);
    if (this.failFeeds) {
      return Promise.reject(new Error("connection refused"));
    }
    return Promise.resolve(this.feed);
  }

  alerts(): Promise<AlertsDoc> {
    return Promise.resolve(this.alertsDoc);
  }

  postCommand(
    verb: string,
    args?: Record<string, unknown>,
  ): Promise<number> {
    if (this.failPosts) {
      return Promise.reject(new Error("connection refused"));
    }
    this.posted.push([verb, args]);
    return Promise.resolve(this.nextCommandId++);
  }
}

function lastModel(states: ViewModel[]): ViewModel {
  return states[states.length - 1];
}

describe("Poller", () => {
  let client: FakeClient;
  let states: ViewModel[];
  let poller: Poller;

  beforeEach(() => {
    client = new FakeClient();
    states = [];
    poller = new Poller(client, (m) => states.push(m));
  });

  it("a tick applies feed and alerts and marks the connection online", async () => {
    client.alertsDoc = alertsDoc([alertDoc(1, 5)]);
    await poller.tick(1000);
    const m = lastModel(states);
    expect(m.entries.length).toBe(1);
    expect(m.alerts.length).toBe(1);
    expect(m.connection).toBe("online");
    expect(m.lastPollAt).toBe(1000);
  });

  it("backfills on the first tick, tops up afterwards", async () => {
    await poller.tick(1000);
    await poller.tick(2000);
    expect(client.feedCalls).toEqual([INITIAL_RESULTS, REFRESH_RESULTS]);
  });

  it("a failed tick flips offline and keeps the last data", async () => {
    await poller.tick(1000);
    client.failFeeds = true;
    await poller.tick(2000);
    const m = lastModel(states);
    expect(m.connection).toBe("offline");
    expect(m.entries.length).toBe(1);
  });

  it("issue posts immediately and reconciles to confirmed", async () => {
    await poller.tick(1000);
    poller.issue("PumpOn", {});
    await poller.flushCommands();
    expect(client.posted).toEqual([["PumpOn", {}]]);

    client.feed = feedDoc([entryDoc(1, 0), entryDoc(2, 15, { 6: 1 })]);
    await poller.tick(2000);
    expect(lastModel(states).pending[0].status).toBe("confirmed");
  });

  it("queued commands survive outages and send on recovery, in order", async () => {
    client.failPosts = true;
    poller.issue("PumpOn", {});
    poller.ack(5); // unknown alert: notice only, no command
    poller.issue("PumpOff", {});
    await poller.flushCommands();
    expect(client.posted).toEqual([]);
    expect(
      lastModel(states).pending.map((c) => c.status),
    ).toEqual(["queued", "queued"]);

    client.failPosts = false;
    await poller.tick(5000);
    expect(client.posted.map(([verb]) => verb)).toEqual(["PumpOn", "PumpOff"]);
  });

  it("acking a live alert queues AckAlert and clears the badge", async () => {
    client.alertsDoc = alertsDoc([alertDoc(7, 5)]);
    await poller.tick(1000);
    expect(unackedCount(poller.model)).toBe(1);

    poller.ack(7);
    await poller.flushCommands();
    expect(unackedCount(poller.model)).toBe(0);
    expect(client.posted).toEqual([["AckAlert", { alert_id: 7 }]]);
  });

  it("overlapping ticks collapse to one request", async () => {
    const p1 = poller.tick(1000);
    const p2 = poller.tick(1001);
    await Promise.all([p1, p2]);
    expect(client.feedCalls.length).toBe(1);
  });

  describe("cadence", () => {
    beforeEach(() => vi.useFakeTimers());
    afterEach(() => vi.useRealTimers());

    it("never exceeds one feed request per interval", async () => {
      poller.start();
      await vi.advanceTimersByTimeAsync(3 * POLL_INTERVAL_MS);
      poller.stop();
      // Start fires one immediate tick, then one per interval.
      expect(client.feedCalls.length).toBe(4);
      expect(POLL_INTERVAL_MS).toBeGreaterThanOrEqual(5000);
    });
  });
});
