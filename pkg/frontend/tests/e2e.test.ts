/**
 * End-to-end: the dashboard modules against a real `plantsim serve`
 * process fed by a real `plantsim device` process.
 *
 * Spawns both CLIs on an ephemeral port, then drives the Poller and
 * render functions exactly as main.ts does: pump override confirmed
 * through the telemetry echo, alert acknowledgement round-tripped to
 * the device's stdout, and the visible-range CSV export byte-compared
 * against the service's own export endpoint.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { existsSync } from "node:fs";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { ApiClient, bootstrap } from "../src/api.js";
import { renderBadge } from "../src/alerts.js";
import { fetchVisibleCsv, rangeParams } from "../src/csv.js";
import { latestEntry, latestField, unackedCount } from "../src/model.js";
import { renderGauges } from "../src/gauges.js";
import { Poller } from "../src/poll.js";

const FRONTEND_ROOT = fileURLToPath(new URL("..", import.meta.url));
const REPO_ROOT = resolve(FRONTEND_ROOT, "..");

interface Child {
  proc: ChildProcess;
  out: string;
}

function spawnCli(args: string[]): Child {
  const child: Child = {
    proc: spawn("python3", ["-m", "plantsim.cli", ...args], {
      cwd: REPO_ROOT,
      stdio: ["ignore", "pipe", "pipe"],
    }),
    out: "",
  };
  child.proc.stdout!.on("data", (b) => {
    child.out += String(b);
  });
  child.proc.stderr!.on("data", (b) => {
    child.out += String(b);
  });
  return child;
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function waitFor(
  cond: () => boolean,
  ms: number,
  what: string,
): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await sleep(100);
  }
}

async function stopChild(child: Child | null): Promise<void> {
  if (child === null || child.proc.exitCode !== null) {
    return;
  }
  child.proc.kill("SIGTERM");
  const deadline = Date.now() + 10_000;
  while (child.proc.exitCode === null && Date.now() < deadline) {
    await sleep(100);
  }
  if (child.proc.exitCode === null) {
    child.proc.kill("SIGKILL");
  }
}

describe("dashboard against live serve + device", () => {
  let workDir = "";
  let server: Child | null = null;
  let device: Child | null = null;
  let baseUrl = "";
  let client: ApiClient;
  let poller: Poller;

  // One tick = one feeds.json poll. The shipped loop spaces these five
  // seconds apart; the test drives them directly to keep the run short.
  const refresh = () => poller.tick();

  beforeAll(async () => {
    if (!existsSync(join(FRONTEND_ROOT, "dist", "index.html"))) {
      execFileSync("npm", ["run", "build"], {
        cwd: FRONTEND_ROOT,
        stdio: "ignore",
      });
    }

    workDir = await mkdtemp(join(tmpdir(), "dash-e2e-"));
    server = spawnCli([
      "serve",
      "--bind", "127.0.0.1:0",
      "--data", join(workDir, "data"),
      "--out", join(workDir, "srv"),
      "--rate-limit", "0.2",
      "--assets", join(FRONTEND_ROOT, "dist"),
    ]);
    await waitFor(
      () => /serving channel \d+ .* on http:/.test(server!.out),
      30_000,
      `serve startup (output so far: ${JSON.stringify(server.out)})`,
    );
    const m = server.out.match(/on (http:\/\/[0-9.]+:\d+)/);
    baseUrl = m![1];

    client = new ApiClient(await bootstrap(baseUrl));
    poller = new Poller(client, () => {});

    device = spawnCli([
      "device",
      "--service", baseUrl,
      "--interval", "0.5",
      "--duration", "600",
      "--out", join(workDir, "dev"),
      "--seed", "7",
    ]);
    await waitFor(
      () => /device online/.test(device!.out),
      30_000,
      "device startup",
    );

    // Two entries on the wire before any assertions run.
    await waitFor(() => {
      void refresh();
      return poller.model.entries.length >= 2;
    }, 30_000, "first telemetry entries");
  });

  afterAll(async () => {
    await stopChild(device);
    await stopChild(server);
    if (workDir !== "") {
      await rm(workDir, { recursive: true, force: true });
    }
  });

  test("all eight gauges render live values", async () => {
    await refresh();
    const html = renderGauges(poller.model);
    expect(html.match(/class="gauge /g)?.length).toBe(8);
    expect(html).not.toContain("no data");
    for (const label of [
      "Temperature", "Humidity", "Soil moisture", "Water level",
      "Nutrient temp", "Pump", "Alert level", "Sampling rate",
    ]) {
      expect(html).toContain(label);
    }
  });

  test("PumpOn override reflects in field6 within two upload cycles", async () => {
    await refresh();
    const baseline = latestEntry(poller.model)!.entryId;

    poller.issue("PumpOn", {});
    await poller.flushCommands();

    let echo: number | null = null;
    await waitFor(() => {
      void refresh();
      const hit = poller.model.entries.find(
        (e) => e.entryId > baseline && e.fields[5] === 1,
      );
      if (hit) {
        echo = hit.entryId;
      }
      return echo !== null;
    }, 15_000, "pump-on telemetry echo");
    expect(echo! - baseline).toBeLessThanOrEqual(2);

    await refresh();
    const cmd = poller.model.pending.find((c) => c.verb === "PumpOn")!;
    expect(cmd.status).toBe("confirmed");

    // Put the pump back so later tests see the idle steady state.
    poller.issue("PumpOff", {});
    await poller.flushCommands();
    await waitFor(() => {
      void refresh();
      return latestField(poller.model, 6) === 0;
    }, 15_000, "pump-off telemetry echo");
  });

  test("alert ack round-trips to the device", async () => {
    // Fire the stock soil rule with an injected low sample; the device's
    // own in-band uploads rearm it immediately afterwards. Retry while
    // the service's rate limiter is in the window of a device upload.
    await waitFor(() => poller.model.entries.length >= 1, 5000, "telemetry");
    let stored = 0;
    await waitFor(() => {
      void client.update({ 3: 55 }, 900_001)
        .then((id) => {
          stored = id;
        })
        .catch(() => {});
      return stored > 0;
    }, 15_000, "injected low-soil entry");

    let alertId = -1;
    await waitFor(() => {
      void refresh();
      const live = poller.model.alerts.find((a) => !a.acked);
      if (live) {
        alertId = live.id;
      }
      return alertId >= 0;
    }, 15_000, "fired alert");
    expect(unackedCount(poller.model)).toBeGreaterThan(0);
    expect(renderBadge(poller.model)).toContain("badge-active");

    poller.ack(alertId);
    await poller.flushCommands();
    await waitFor(
      () => /command AckAlert: ok/.test(device!.out),
      15_000,
      "device AckAlert execution",
    );
    expect(unackedCount(poller.model)).toBe(0);
    expect(renderBadge(poller.model)).not.toContain("badge-active");

    // Re-acking is a no-op: no second command, no error.
    const sent = poller.model.pending.length;
    poller.ack(alertId);
    await poller.flushCommands();
    expect(poller.model.pending.length).toBe(sent);
  });

  test("visible-range CSV export byte-matches the service export", async () => {
    await waitFor(() => {
      void refresh();
      return poller.model.entries.length >= 6;
    }, 20_000, "enough entries for a subrange");

    const entries = poller.model.entries;
    const domain = {
      start: entries[1].createdAt,
      end: entries[entries.length - 2].createdAt,
    };
    const range = rangeParams(domain);

    const viaDashboard = await fetchVisibleCsv(client, domain);
    const q = new URLSearchParams({
      api_key: client.cfg.readKey,
      start: range.start,
      end: range.end,
    });
    const direct = await fetch(
      `${baseUrl}/channels/${client.cfg.channelId}/export.csv?${q}`,
    );
    expect(direct.status).toBe(200);
    expect(viaDashboard).toBe(await direct.text());

    // Same range through the JSON endpoint lists the same entries.
    const lines = viaDashboard.trimEnd().split("\n");
    expect(lines[0]).toBe(
      "entry_id,created_at,field1,field2,field3,field4,"
      + "field5,field6,field7,field8",
    );
    const csvIds = lines.slice(1).map((l) => parseInt(l.split(",")[0], 10));
    expect(csvIds.length).toBeGreaterThan(0);
    const feed = await client.readFeed(8000, range);
    expect(feed.feeds.map((e) => e.entry_id)).toEqual(csvIds);

    // The injected sample survives the round trip in repr form
    // (header order: entry_id, created_at, field1..field8).
    const injected = lines.find((l) => l.split(",")[4] === "55.0");
    expect(injected).toBeDefined();
  });

  test("serve hands out the built dashboard as static assets", async () => {
    const index = await fetch(`${baseUrl}/`);
    expect(index.status).toBe(200);
    expect(index.headers.get("content-type")).toContain("text/html");
    const body = await index.text();
    expect(body).toContain("<title>Plant Monitor</title>");
    expect(body).toContain("main.js");

    const js = await fetch(`${baseUrl}/main.js`);
    expect(js.status).toBe(200);
    expect(js.headers.get("content-type")).toContain("javascript");

    const css = await fetch(`${baseUrl}/style.css`);
    expect(css.status).toBe(200);

    const missing = await fetch(`${baseUrl}/definitely-missing.html`);
    expect(missing.status).toBe(404);

    const escape = await fetch(
      `${baseUrl}/${encodeURIComponent("../pyproject.toml")}`,
    );
    expect(escape.status).toBe(404);
  });
});
