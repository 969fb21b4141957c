/**
 * End-to-end test against a real server process.
 *
 * Spawns the Python service, drives the scripted consent flow through the
 * same api/stream modules the browser console uses, then checks that the
 * event log replays with zero divergence and that a console reload leaves
 * the trace untouched.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { SessionApi } from "../src/api.js";
import { StreamClient, type WsLike } from "../src/stream.js";
import { initialViewModel, reduce, type ConsoleViewModel } from "../src/viewmodel.js";
import type { StreamMessage } from "../src/types.js";

const PYTHON = "python3";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no address"));
      }
    });
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

const wsFactory = (url: string): WsLike => new WebSocket(url) as unknown as WsLike;

let server: ChildProcess | null = null;
let baseUrl = "";
let wsUrl = "";
let logDir = "";

beforeAll(async () => {
  const port = await freePort();
  const dir = mkdtempSync(join(tmpdir(), "carebot-e2e-"));
  logDir = join(dir, "logs");
  const configPath = join(dir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      host: "127.0.0.1",
      port,
      log_dir: logDir,
      sync_llm: true,
    }),
  );
  server = spawn(PYTHON, ["-m", "carebot.cli", "serve", "--config", configPath], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  baseUrl = `http://127.0.0.1:${port}`;
  wsUrl = `ws://127.0.0.1:${port}`;

  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/docs`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("server did not start");
    await sleep(200);
  }
}, 40000);

afterAll(() => {
  server?.kill();
});

describe("operator console against the live service", () => {
  it(
    "runs the scripted consent flow, replays clean, survives a reload",
    async () => {
      const api = new SessionApi(baseUrl);
      const sid = await api.createSession();
      const logPath = join(logDir, `${sid}.jsonl`);

      let vm: ConsoleViewModel = initialViewModel();
      const pushes: StreamMessage[] = [];
      let stream = new StreamClient(
        `${wsUrl}/sessions/${sid}/stream`,
        {
          onMessage: (msg) => {
            pushes.push(msg);
            vm = reduce(vm, msg);
          },
        },
        wsFactory,
      );
      stream.connect();
      const waitForPushes = async (n: number) => {
        const until = Date.now() + 15000;
        while (pushes.length < n) {
          if (Date.now() > until) throw new Error(`only ${pushes.length}/${n} pushes`);
          await sleep(25);
        }
      };
      await waitForPushes(1); // initial snapshot
      expect(pushes[0]!.type).toBe("snapshot");

      let t = 0;
      const post = (kind: string, data: Record<string, unknown>) => {
        t += 100;
        return api.postEvent(sid, kind, t, data);
      };

      // greet
      await post("FaceDetected", { identity: null });
      await post("FaceDetected", { identity: null });
      // sadness debounce: third consecutive sad frame triggers the offer
      for (let i = 0; i < 3; i++) {
        await post("EmotionObserved", { label: "sad", score: 0.9 });
      }
      expect((await api.getState(sid)).state).toBe("OfferingHug");
      await post("Tick", { dt_ms: 100 });
      // operator slides the distance to 30 cm, inside the consent gate
      await post("DistanceChanged", { cm: 30 });
      // nod goes through the server's real optical-flow pipeline
      t += 100;
      const { verdict } = await api.postGesture(sid, "nod", t);
      expect(verdict.kind).toBe("nod");
      expect(verdict.confidence).toBeGreaterThan(0);
      expect((await api.getState(sid)).state).toBe("Hugging");

      // --- console reload mid-session: must not touch the trace ---
      const logBeforeReload = readFileSync(logPath, "utf-8");
      stream.close();
      vm = initialViewModel();
      pushes.length = 0;
      stream = new StreamClient(
        `${wsUrl}/sessions/${sid}/stream`,
        {
          onMessage: (msg) => {
            pushes.push(msg);
            vm = reduce(vm, msg);
          },
        },
        wsFactory,
      );
      stream.connect();
      await waitForPushes(1);
      expect(vm.robotState).toBe("Hugging");
      expect(readFileSync(logPath, "utf-8")).toBe(logBeforeReload);

      // hug runs to completion over ticks
      for (let i = 0; i < 4; i++) {
        await post("Tick", { dt_ms: 1000 });
      }
      expect((await api.getState(sid)).state).toBe("SnackOffer");
      // snack accepted
      await post("UserUtterance", { text: "yes please" });
      // one ordinary chat turn
      await post("UserUtterance", { text: "thank you robot" });

      const state = await api.getState(sid);
      expect(state.state).toBe("Conversing");
      expect(state.hw.snack_count).toBe(4);
      expect(state.transcript.some((u) => u.role === "robot")).toBe(true);
      expect(state.transcript.at(-1)?.role).toBe("robot");

      // the view model tracks the server exactly, including after the reload
      await waitForPushes(8);
      stream.close();
      expect(vm.robotState).toBe(state.state);
      expect(vm.snackCount).toBe(state.hw.snack_count);
      expect(vm.distanceCm).toBe(state.hw.distance_cm);
      expect(vm.transcript).toEqual(state.transcript);

      // idempotency: replaying the same key does not append a new event
      const logBeforeDup = readFileSync(logPath, "utf-8");
      const key = "dup-key-1";
      const r1 = await api.postEvent(sid, "Tick", t + 100, { dt_ms: 10 }, key);
      const r2 = await api.postEvent(sid, "Tick", t + 100, { dt_ms: 10 }, key);
      expect(r2.seq).toBe(r1.seq);
      const lines = (s: string) => s.split("\n").filter(Boolean).length;
      expect(lines(readFileSync(logPath, "utf-8"))).toBe(lines(logBeforeDup) + 1);

      // server-side replay of the trace must show zero divergence
      const replayRun = spawnSync(PYTHON, ["-m", "carebot.cli", "replay", logPath], {
        encoding: "utf-8",
      });
      expect(replayRun.status).toBe(0);
      const report = JSON.parse(replayRun.stdout);
      expect(report.divergences).toEqual([]);
      expect(report.final_state).toBe("Conversing");
      expect(report.events_applied).toBeGreaterThanOrEqual(13);
    },
    120000,
  );
});
