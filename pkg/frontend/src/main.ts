import { SessionApi, newIdempotencyKey } from "./api.js";
import { StreamClient } from "./stream.js";
import type { ConnectionStatus } from "./stream.js";
import {
  binLatencies,
  HIST_BIN_MS,
  hugInProgress,
  initialViewModel,
  reduce,
  setConnection,
  setLatencies,
  type ConsoleViewModel,
} from "./viewmodel.js";
import type { StreamMessage } from "./types.js";

const httpBase = window.location.origin;
const wsBase = httpBase.replace(/^http/, "ws");
const api = new SessionApi(httpBase);

let vm: ConsoleViewModel = initialViewModel();
let stream: StreamClient | null = null;
let clock = 0; // session-relative ms; advanced by operator inputs

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function now(): number {
  clock += 100;
  return clock;
}

function render(): void {
  $("session-id").textContent = vm.sessionId ?? "—";
  const conn = $("connection");
  conn.textContent = vm.connection;
  conn.className = `badge conn-${vm.connection}`;
  const badge = $("robot-state");
  badge.textContent = vm.ended ? `${vm.robotState} (ended)` : vm.robotState;
  badge.className = `badge state-${vm.robotState.toLowerCase()}`;

  ($("left-arm") as HTMLProgressElement).value = vm.leftArmDeg;
  ($("right-arm") as HTMLProgressElement).value = vm.rightArmDeg;
  $("left-arm-deg").textContent = `${vm.leftArmDeg.toFixed(0)}°`;
  $("right-arm-deg").textContent = `${vm.rightArmDeg.toFixed(0)}°`;
  $("snack-count").textContent = String(vm.snackCount);
  $("distance-readout").textContent = `${vm.distanceCm.toFixed(0)} cm`;

  const gesture = $("gesture-chip");
  gesture.textContent = vm.lastGesture
    ? `${vm.lastGesture.kind} (${vm.lastGesture.confidence.toFixed(2)})`
    : "none yet";
  const emotion = $("emotion-chip");
  emotion.textContent = vm.lastEmotion
    ? `${vm.lastEmotion.label} (${vm.lastEmotion.score.toFixed(2)})`
    : "none yet";

  const log = $("transcript");
  log.innerHTML = "";
  for (const entry of vm.transcript) {
    const li = document.createElement("li");
    li.className = `turn turn-${entry.role}`;
    li.textContent = `[${entry.role}] ${entry.text}`;
    log.appendChild(li);
  }
  log.scrollTop = log.scrollHeight;

  const disabled = vm.sessionId === null || vm.ended;
  for (const el of document.querySelectorAll<HTMLButtonElement>("button[data-needs-session]")) {
    el.disabled = disabled || (hugInProgress(vm) && el.dataset["hugSafe"] !== "1");
  }
  ($("distance") as HTMLInputElement).disabled = disabled;

  renderHistogram();
}

function renderHistogram(): void {
  const bins = binLatencies(vm.latenciesMs);
  const max = Math.max(1, ...bins);
  const chart = $("latency-chart");
  chart.innerHTML = "";
  bins.forEach((count, i) => {
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.height = `${(count / max) * 100}%`;
    bar.title = `${i}-${i + 1}s: ${count} turn(s), bin ${HIST_BIN_MS} ms`;
    chart.appendChild(bar);
  });
}

function onStream(msg: StreamMessage): void {
  vm = reduce(vm, msg);
  render();
  if (msg.type === "applied" && vm.sessionId) {
    // Turn latency only changes when a robot turn lands; cheap to refresh.
    void api.getMetrics(vm.sessionId).then((turns) => {
      vm = setLatencies(vm, turns);
      renderHistogram();
    });
  }
}

function onStatus(status: ConnectionStatus): void {
  vm = setConnection(vm, status);
  render();
}

function attachStream(sid: string): void {
  stream?.close();
  stream = new StreamClient(
    `${wsBase}/sessions/${sid}/stream`,
    { onMessage: onStream, onStatus },
    (url) => new WebSocket(url) as unknown as import("./stream.js").WsLike,
  );
  stream.connect();
}

async function startSession(): Promise<void> {
  const sid = await api.createSession();
  clock = 0;
  vm = initialViewModel();
  vm.sessionId = sid;
  window.location.hash = sid; // reload re-attaches without a new session
  attachStream(sid);
  render();
}

function resumeFromHash(): boolean {
  const sid = window.location.hash.slice(1);
  if (!sid) return false;
  vm.sessionId = sid;
  attachStream(sid);
  return true;
}

function wire(): void {
  $("new-session").addEventListener("click", () => void startSession());

  const slider = $("distance") as HTMLInputElement;
  slider.addEventListener("change", () => {
    if (!vm.sessionId) return;
    void api.postEvent(vm.sessionId, "DistanceChanged", now(), {
      cm: Number(slider.value),
    });
  });

  $("btn-face").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postEvent(vm.sessionId, "FaceDetected", now(), {
      identity: "operator",
    });
  });
  $("btn-face-lost").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postEvent(vm.sessionId, "FaceLost", now(), {});
  });
  $("btn-nod").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postGesture(vm.sessionId, "nod", now());
  });
  $("btn-shake").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postGesture(vm.sessionId, "shake", now());
  });
  $("btn-tick").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postEvent(vm.sessionId, "Tick", now(), { dt_ms: 1000 });
  });
  $("btn-end").addEventListener("click", () => {
    if (!vm.sessionId) return;
    void api.postEvent(vm.sessionId, "OperatorCommand", now(), {
      command: "end",
    });
  });

  for (const el of document.querySelectorAll<HTMLButtonElement>("button[data-emotion]")) {
    el.addEventListener("click", () => {
      if (!vm.sessionId) return;
      const label = el.dataset["emotion"]!;
      void api.postEvent(vm.sessionId, "EmotionObserved", now(), {
        label,
        score: 0.9,
      });
    });
  }

  const chatForm = $("chat-form") as HTMLFormElement;
  chatForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = $("chat-input") as HTMLInputElement;
    const text = input.value.trim();
    if (!text || !vm.sessionId) return;
    input.value = "";
    void api.postEvent(
      vm.sessionId,
      "UserUtterance",
      now(),
      { text },
      newIdempotencyKey(),
    );
  });
}

wire();
if (!resumeFromHash()) {
  render();
}
