"""Session composition: event-sourced interaction loop, replay, latency bench."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass, field

from . import dialogue, emotion, robot
from .dialogue import DialogueContext, LlmEndpoint, StubLlm, TurnMetrics, Utterance
from .flow import FlowParams
from .gesture import GestureParams
from .robot import HardwareState, HugConfig, MachineState, SimEvent

log = logging.getLogger(__name__)


class SessionGoneError(RuntimeError):
    pass


class LogParseError(ValueError):
    def __init__(self, message, line_number):
        super().__init__("%s (line %d)" % (message, line_number))
        self.line_number = line_number


class BenchConfigError(RuntimeError):
    pass


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    cascade_path: str = None
    lbph_model_path: str = None
    emotion_classifier: str = "heuristic"  # heuristic | scripted
    scripted_scores_path: str = None
    llm_base_url: str = "stub:"
    llm_model: str = "llama-3.1-8b-instant"
    llm_api_key_ref: str = "LLM_API_KEY"
    llm_timeout_ms: int = 20000
    hug: HugConfig = field(default_factory=HugConfig)
    flow: FlowParams = field(default_factory=FlowParams)
    gesture: GestureParams = field(default_factory=GestureParams)
    log_dir: str = "logs"
    sync_llm: bool = False  # inline dialogue turns (tests, replay scripts)

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path) as f:
            data = json.load(f)
        kwargs = dict(data)
        if "hug" in kwargs:
            kwargs["hug"] = HugConfig(**kwargs["hug"])
        if "flow" in kwargs:
            kwargs["flow"] = FlowParams(**kwargs["flow"])
        if "gesture" in kwargs:
            kwargs["gesture"] = GestureParams(**kwargs["gesture"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        for p in (self.cascade_path, self.lbph_model_path,
                  self.scripted_scores_path):
            if p is not None and not os.path.exists(p):
                raise FileNotFoundError("configured file missing: %s" % p)
        if self.emotion_classifier not in ("heuristic", "scripted"):
            raise ValueError("emotion_classifier must be heuristic or scripted")
        if self.emotion_classifier == "scripted" and not self.scripted_scores_path:
            raise ValueError("scripted classifier needs scripted_scores_path")

    def endpoint(self) -> LlmEndpoint:
        return LlmEndpoint(base_url=self.llm_base_url, model_name=self.llm_model,
                           api_key_ref=self.llm_api_key_ref,
                           timeout_ms=self.llm_timeout_ms)


class Session:
    def __init__(self, sid: str, config: ServiceConfig, log_path: str,
                 classifier=None, stub: StubLlm = None):
        self.id = sid
        self.created_t = int(time.time() * 1000)
        self.config = config
        self.ms = MachineState()
        self.hw = HardwareState()
        self.ctx = DialogueContext()
        self.metrics: list[TurnMetrics] = []
        self.transcript: list[Utterance] = []
        self.trigger = emotion.SadnessTrigger()
        self.classifier = classifier
        self.stub = stub
        self.seq = 0
        self.ended = False
        self.turn_pending = False
        self.lock = threading.RLock()
        self.subscribers: list = []  # queue.Queue per streaming consumer
        self.applied_keys: dict = {}  # idempotency_key -> record
        self.log_path = log_path
        self._log_file = open(log_path, "a", encoding="utf-8")

    def close(self):
        self._log_file.close()

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "state": self.ms.state,
            "ended": self.ended,
            "hw": {
                "left_arm_deg": self.hw.left_arm_deg,
                "right_arm_deg": self.hw.right_arm_deg,
                "distance_cm": self.hw.distance_cm,
                "snack_count": self.hw.snack_count,
                "hug_elapsed_ms": self.hw.hug_elapsed_ms,
            },
            "transcript": [{"role": u.role, "text": u.text, "t": u.t}
                           for u in self.transcript],
        }


class SessionManager:
    def __init__(self, config: ServiceConfig = None):
        self.config = config or ServiceConfig()
        os.makedirs(self.config.log_dir, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _make_classifier(self):
        if self.config.emotion_classifier == "scripted":
            with open(self.config.scripted_scores_path) as f:
                return emotion.ScriptedClassifier(json.load(f))
        return emotion.HeuristicStub()

    def create_session(self, stub: StubLlm = None) -> Session:
        sid = uuid.uuid4().hex[:12]
        log_path = os.path.join(self.config.log_dir, "%s.jsonl" % sid)
        session = Session(sid, self.config, log_path,
                          classifier=self._make_classifier(), stub=stub)
        with self._lock:
            self.sessions[sid] = session
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise KeyError(sid)
        return session

    def submit_event(self, session: Session, event: SimEvent,
                     idempotency_key: str = None) -> dict:
        """Apply one event in order, execute its actions, persist the record."""
        with session.lock:
            if session.ended:
                raise SessionGoneError("session %s has ended" % session.id)
            if idempotency_key is not None:
                prior = session.applied_keys.get(idempotency_key)
                if prior is not None:
                    return prior

            event = self._enrich(session, event)
            session.ms, session.hw, actions = robot.apply_event(
                session.ms, session.hw, event, self.config.hug)
            record = {
                "seq": session.seq,
                "t": event.t,
                "event": event.to_dict(),
                "state_after": session.ms.state,
                "actions": actions,
            }
            session.seq += 1
            session._log_file.write(json.dumps(record, sort_keys=True) + "\n")
            session._log_file.flush()
            self._execute_actions(session, event, actions)
            if idempotency_key is not None:
                session.applied_keys[idempotency_key] = record
            self._push(session, {"type": "applied", "record": record,
                                 "snapshot": session.snapshot()})
            return record

    def _enrich(self, session: Session, event: SimEvent) -> SimEvent:
        # the sadness debounce runs here so the logged event replays purely
        if event.kind == "EmotionObserved" and "sad_triggered" not in event.data:
            dom = emotion.DominantEmotion(label=event.data.get("label", "neutral"),
                                          score=float(event.data.get("score", 0.0)))
            event.data["sad_triggered"] = session.trigger.update(dom)
        return event

    def _execute_actions(self, session: Session, event: SimEvent, actions):
        for act in actions:
            kind = act["kind"]
            if kind == "Speak":
                utt = Utterance(role="robot", text=act["text"], t=event.t)
                session.transcript.append(utt)
                session.ctx.append(utt)
            elif kind == "RequestLlmTurn":
                user = Utterance(role="user", text=act["text"], t=event.t)
                session.transcript.append(user)
                session.ctx.append(user)
                self._start_llm_turn(session, event.t)
            elif kind == "EndSession":
                session.ended = True

    def _start_llm_turn(self, session: Session, t: int):
        if session.turn_pending:
            log.warning("session %s: turn already in flight, utterance queued "
                        "into context only", session.id)
            return
        session.turn_pending = True
        if self.config.sync_llm:
            self._run_llm_turn(session, t)
        else:
            threading.Thread(target=self._run_llm_turn, args=(session, t),
                             daemon=True).start()

    def _run_llm_turn(self, session: Session, t: int):
        try:
            session.ctx.emotion_label = _current_emotion(session)
            # respond appends to ctx history itself; transcript entry comes
            # from the RobotTurnReady -> Speak path, so pop the duplicate
            utt, metrics = dialogue.respond(session.ctx, self.config.endpoint(),
                                            stub=session.stub, t=t)
            session.ctx.history.pop()
            session.metrics.append(metrics)
        except Exception:
            log.exception("session %s: dialogue turn failed", session.id)
            session.turn_pending = False
            return
        session.turn_pending = False
        self.submit_event(session, SimEvent(
            kind="RobotTurnReady", t=t + max(metrics.latency_ms, 1),
            data={"text": utt.text}))

    def _push(self, session: Session, message: dict):
        for q in list(session.subscribers):
            try:
                q.put_nowait(message)
            except Exception:
                pass


def _current_emotion(session: Session) -> str:
    return session.ctx.emotion_label or "neutral"


@dataclass
class Divergence:
    seq: int
    field_name: str
    recorded: object
    recomputed: object


@dataclass
class ReplayResult:
    ms: MachineState
    hw: HardwareState
    events_applied: int
    divergences: list


def read_log(log_path: str):
    """Parse a JSONL session log; a truncated final line is dropped with a
    warning, a malformed interior line is a hard parse error."""
    records = []
    with open(log_path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            if i == len(lines) - 1:
                log.warning("dropping truncated final log line %d in %s",
                            i + 1, log_path)
                break
            raise LogParseError("malformed log line: %s" % e, i + 1) from None
    return records


def replay(log_path: str, cfg: HugConfig = None) -> ReplayResult:
    """Re-fold the event stream through the pure transition and diff against
    the recorded trace."""
    cfg = cfg or HugConfig()
    records = read_log(log_path)
    ms = MachineState()
    hw = HardwareState()
    divergences = []
    for rec in records:
        event = SimEvent.from_dict(rec["event"])
        ms, hw, actions = robot.apply_event(ms, hw, event, cfg)
        if ms.state != rec["state_after"]:
            divergences.append(Divergence(rec["seq"], "state_after",
                                          rec["state_after"], ms.state))
        if json.dumps(actions, sort_keys=True) != json.dumps(rec["actions"],
                                                             sort_keys=True):
            divergences.append(Divergence(rec["seq"], "actions",
                                          rec["actions"], actions))
    return ReplayResult(ms=ms, hw=hw, events_applied=len(records),
                        divergences=divergences)


HIST_BIN_MS = 1000
HIST_RANGE_MS = 15000


def parse_delay_model(spec: str):
    """'constant:X' or 'uniform:LO,HI' (milliseconds)."""
    kind, _, args = spec.partition(":")
    if kind == "constant":
        return ("constant", int(args or 0))
    if kind == "uniform":
        lo, hi = (int(v) for v in args.split(","))
        if lo > hi:
            raise BenchConfigError("uniform delay lo > hi")
        return ("uniform", lo, hi)
    raise BenchConfigError("unknown delay model: %s" % spec)


def bench_latency(n_turns: int, delay_model: str = "uniform:5000,10000",
                  endpoint: LlmEndpoint = None, seed: int = 0,
                  force_live: bool = False) -> dict:
    """Scripted dialogue turns against a delay-injecting stub; per-turn
    latency, p50/p90, and a fixed 1 s-bin histogram over 0-15 s."""
    endpoint = endpoint or LlmEndpoint(base_url="stub:")
    if not endpoint.is_stub and not force_live:
        raise BenchConfigError("bench refuses a live endpoint without force_live")
    model = parse_delay_model(delay_model)
    rng = random.Random(seed)
    delays = []
    for _ in range(n_turns):
        if model[0] == "constant":
            delays.append(model[1])
        else:
            delays.append(rng.randint(model[1], model[2]))
    stub = StubLlm(delays_ms=delays)
    ctx = DialogueContext()
    latencies = []
    for i in range(n_turns):
        ctx.append(Utterance(role="user", text="bench turn %d checking in" % i,
                             t=i))
        _, metrics = dialogue.respond(ctx, endpoint, stub=stub, t=i)
        latencies.append(metrics.latency_ms)
    ordered = sorted(latencies)

    def pct(p):
        idx = min(len(ordered) - 1, max(0, int(round(p * (len(ordered) - 1)))))
        return ordered[idx]

    bins = [0] * (HIST_RANGE_MS // HIST_BIN_MS)
    for ms in latencies:
        bins[min(ms // HIST_BIN_MS, len(bins) - 1)] += 1
    return {
        "n_turns": n_turns,
        "latencies_ms": latencies,
        "injected_ms": delays,
        "p50_ms": pct(0.50),
        "p90_ms": pct(0.90),
        "histogram": {"bin_ms": HIST_BIN_MS, "counts": bins},
    }
