export interface HardwareView {
  left_arm_deg: number;
  right_arm_deg: number;
  distance_cm: number;
  snack_count: number;
  hug_elapsed_ms: number;
}

export interface TranscriptEntry {
  role: "user" | "robot" | "system";
  text: string;
  t: number;
}

export interface Snapshot {
  id: string;
  state: string;
  ended: boolean;
  hw: HardwareView;
  transcript: TranscriptEntry[];
}

export interface GestureVerdict {
  kind: "nod" | "shake" | "none";
  confidence: number;
  window: [number, number];
}

export interface AppliedRecord {
  seq: number;
  t: number;
  event: { kind: string; t: number; data: Record<string, unknown> };
  state_after: string;
  actions: Array<Record<string, unknown>>;
}

export type StreamMessage =
  | { type: "snapshot"; snapshot: Snapshot }
  | { type: "applied"; record: AppliedRecord; snapshot: Snapshot };

export interface TurnMetricsView {
  t_request: number;
  t_response: number;
  latency_ms: number;
  regenerated: boolean;
  degraded: boolean;
}
