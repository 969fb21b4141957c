import type {
  GestureVerdict,
  Snapshot,
  StreamMessage,
  TranscriptEntry,
  TurnMetricsView,
} from "./types.js";
import type { ConnectionStatus } from "./stream.js";

/** Latency chart bins match the server bench: 1 s bins over 0-15 s. */
export const HIST_BIN_MS = 1000;
export const HIST_RANGE_MS = 15000;

export interface ConsoleViewModel {
  sessionId: string | null;
  connection: ConnectionStatus;
  robotState: string;
  ended: boolean;
  leftArmDeg: number;
  rightArmDeg: number;
  distanceCm: number;
  snackCount: number;
  transcript: TranscriptEntry[];
  lastGesture: GestureVerdict | null;
  lastEmotion: { label: string; score: number } | null;
  latenciesMs: number[];
  lastSeq: number;
}

export function initialViewModel(): ConsoleViewModel {
  return {
    sessionId: null,
    connection: "closed",
    robotState: "Idle",
    ended: false,
    leftArmDeg: 0,
    rightArmDeg: 0,
    distanceCm: 400,
    snackCount: 0,
    transcript: [],
    lastGesture: null,
    lastEmotion: null,
    latenciesMs: [],
    lastSeq: -1,
  };
}

function applySnapshot(vm: ConsoleViewModel, snap: Snapshot): ConsoleViewModel {
  return {
    ...vm,
    sessionId: snap.id,
    robotState: snap.state,
    ended: snap.ended,
    leftArmDeg: snap.hw.left_arm_deg,
    rightArmDeg: snap.hw.right_arm_deg,
    distanceCm: snap.hw.distance_cm,
    snackCount: snap.hw.snack_count,
    transcript: snap.transcript,
  };
}

/** Pure reducer over server pushes. The view never simulates robot logic:
 *  every field comes straight from the pushed snapshot/record. */
export function reduce(vm: ConsoleViewModel, msg: StreamMessage): ConsoleViewModel {
  if (msg.type === "snapshot") {
    return applySnapshot(vm, msg.snapshot);
  }
  if (msg.record.seq <= vm.lastSeq) {
    return vm; // stale or duplicate push
  }
  let next = applySnapshot(vm, msg.snapshot);
  next.lastSeq = msg.record.seq;
  const ev = msg.record.event;
  if (ev.kind === "GestureObserved") {
    next = { ...next, lastGesture: ev.data["verdict"] as GestureVerdict };
  } else if (ev.kind === "EmotionObserved") {
    next = {
      ...next,
      lastEmotion: {
        label: String(ev.data["label"] ?? "neutral"),
        score: Number(ev.data["score"] ?? 0),
      },
    };
  }
  return next;
}

export function setConnection(
  vm: ConsoleViewModel,
  status: ConnectionStatus,
): ConsoleViewModel {
  return { ...vm, connection: status };
}

export function setLatencies(
  vm: ConsoleViewModel,
  turns: TurnMetricsView[],
): ConsoleViewModel {
  return { ...vm, latenciesMs: turns.map((t) => t.latency_ms) };
}

export function binLatencies(latenciesMs: number[]): number[] {
  const bins = new Array<number>(HIST_RANGE_MS / HIST_BIN_MS).fill(0);
  for (const ms of latenciesMs) {
    const idx = Math.min(Math.floor(ms / HIST_BIN_MS), bins.length - 1);
    bins[idx] += 1;
  }
  return bins;
}

/** Controls that would conflict mid-hug are disabled optimistically. */
export function hugInProgress(vm: ConsoleViewModel): boolean {
  return vm.robotState === "Hugging";
}
