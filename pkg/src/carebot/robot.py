"""Interaction automaton and simulated hardware (hug arms, range sensor, snacks).

The transition core (`step`) is a pure function over an explicit machine
state; `apply_event` composes it with the hardware integrator so a session
is a deterministic fold over its event stream. Consent (a nod or an
affirmative utterance) AND proximity within the hug gate are both required
before the arms ever close. When speech and a gesture land in the same
event window (same timestamp), speech wins.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

# RobotState values
IDLE = "Idle"
FACE_SEARCH = "FaceSearch"
GREETING = "Greeting"
ASSESSING = "Assessing"
CONVERSING = "Conversing"
OFFERING_HUG = "OfferingHug"
AWAITING_CONSENT = "AwaitingConsent"
HUGGING = "Hugging"
SNACK_OFFER = "SnackOffer"
FAREWELL = "Farewell"

ROBOT_STATES = (IDLE, FACE_SEARCH, GREETING, ASSESSING, CONVERSING,
                OFFERING_HUG, AWAITING_CONSENT, HUGGING, SNACK_OFFER, FAREWELL)

EVENT_KINDS = ("FaceDetected", "FaceLost", "EmotionObserved", "GestureObserved",
               "UserUtterance", "RobotTurnReady", "DistanceChanged", "Tick",
               "OperatorCommand")

FACE_LOST_FAREWELL_MS = 5000
ASSESS_DWELL_MS = 5000

AFFIRMATIVE_WORDS = {"yes", "yeah", "yep", "ok", "okay", "sure", "please",
                     "alright", "fine"}
NEGATIVE_WORDS = {"no", "nope", "nah", "dont", "don't", "stop", "never"}

LINES = {
    "greet_known": "Hello {name}! It's so good to see you again.",
    "greet_unknown": "Hello there! I'm so glad you came to see me.",
    "offer_hug": "You seem like you're having a hard time. Would you like a hug?",
    "come_closer": "Come a little closer and I'll give you that hug.",
    "comfort": "That's completely okay. I'm right here if you want to talk instead.",
    "no_pressure": "No pressure at all. We can just keep talking.",
    "snack_offer": "That was a nice hug. Would you like a snack?",
    "snack_enjoy": "Here you go! I hope it helps a little.",
    "snack_decline": "Okay! Just let me know if you change your mind.",
    "post_hug": "I hope that helped a little. I'm here for you.",
    "hug_abort": "Oh, sorry! I'll let go. I'm still right here.",
    "farewell": "Goodbye for now. Take care of yourself!",
}


@dataclass
class SimEvent:
    kind: str
    t: int
    data: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "t": self.t, "data": self.data}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") not in EVENT_KINDS:
            raise ValueError("unknown event kind: %r" % d.get("kind"))
        return cls(kind=d["kind"], t=int(d["t"]), data=dict(d.get("data", {})))


@dataclass
class HardwareState:
    left_arm_deg: float = 0.0
    right_arm_deg: float = 0.0
    arm_rate: float = 60.0  # deg/s
    distance_cm: float = 400.0
    snack_count: int = 5
    hug_elapsed_ms: int = 0
    left_target_deg: float = 0.0
    right_target_deg: float = 0.0


@dataclass
class HugConfig:
    hug_distance_cm: float = 40.0
    hug_duration_ms: int = 3000
    arm_close_deg: float = 85.0
    abort_distance_cm: float = 60.0
    consent_timeout_ms: int = 10000

    def __post_init__(self):
        if self.abort_distance_cm <= self.hug_distance_cm:
            raise ValueError("abort_distance must exceed hug_distance")
        if min(self.hug_distance_cm, self.hug_duration_ms, self.arm_close_deg,
               self.consent_timeout_ms) <= 0:
            raise ValueError("hug config values must be positive")


@dataclass
class MachineState:
    state: str = IDLE
    user_name: str = None
    face_lost: bool = False
    face_lost_ms: int = 0
    assess_elapsed_ms: int = 0
    consent_elapsed_ms: int = 0
    last_utterance_t: int = None
    hug_entry_gate: bool = False  # gate held at the tick Hugging was entered


def classify_utterance(text: str) -> str:
    words = {w.strip(".,!?").lower() for w in text.split()}
    if words & NEGATIVE_WORDS:
        return "negative"
    if words & AFFIRMATIVE_WORDS:
        return "affirmative"
    return "other"


def hug_gate(hw: HardwareState, cfg: HugConfig, consent: bool) -> bool:
    return bool(consent) and hw.distance_cm <= cfg.hug_distance_cm


def _speak(text):
    return {"kind": "Speak", "text": text}


def _consent_given(ms, hw, cfg):
    """Shared consent handling for OfferingHug/AwaitingConsent/SnackOffer paths."""
    if hug_gate(hw, cfg, consent=True):
        nxt = replace(ms, state=HUGGING, consent_elapsed_ms=0, hug_entry_gate=True)
        return nxt, [{"kind": "MoveArms", "target_deg": cfg.arm_close_deg}]
    return replace(ms, consent_elapsed_ms=0), [_speak(LINES["come_closer"])]


def step(ms: MachineState, event: SimEvent, hw: HardwareState, cfg: HugConfig):
    """Pure transition: (machine state, event, hardware, config) -> (next, actions).

    Unknown event/state combinations are no-ops.
    """
    state = ms.state
    kind = event.kind
    d = event.data

    if kind == "OperatorCommand":
        cmd = d.get("command")
        if cmd == "reset":
            return MachineState(), []
        if cmd == "end":
            return replace(ms, state=FAREWELL), [_speak(LINES["farewell"]),
                                                 {"kind": "EndSession"}]
        return ms, []

    if kind == "FaceDetected":
        ms = replace(ms, face_lost=False, face_lost_ms=0)
        identity = d.get("identity")
        if state == IDLE:
            return replace(ms, state=FACE_SEARCH), []
        if state == FACE_SEARCH:
            if identity:
                line = LINES["greet_known"].format(name=identity)
            else:
                line = LINES["greet_unknown"]
            return replace(ms, state=GREETING, user_name=identity,
                           assess_elapsed_ms=0), [_speak(line)]
        return ms, []

    if kind == "FaceLost":
        return replace(ms, face_lost=True, face_lost_ms=0), []

    if kind == "EmotionObserved":
        if state in (GREETING, ASSESSING, CONVERSING):
            if d.get("sad_triggered"):
                return replace(ms, state=OFFERING_HUG, consent_elapsed_ms=0), \
                    [_speak(LINES["offer_hug"])]
            if state in (GREETING, ASSESSING):
                return replace(ms, state=CONVERSING), []
        return ms, []

    if kind == "UserUtterance":
        text = d.get("text", "")
        ms = replace(ms, last_utterance_t=event.t)
        if state in (GREETING, ASSESSING, CONVERSING):
            return replace(ms, state=CONVERSING), \
                [{"kind": "RequestLlmTurn", "text": text}]
        if state in (OFFERING_HUG, AWAITING_CONSENT):
            mood = classify_utterance(text)
            if mood == "affirmative":
                return _consent_given(ms, hw, cfg)
            if mood == "negative":
                return replace(ms, state=CONVERSING), [_speak(LINES["comfort"])]
            return ms, []
        if state == SNACK_OFFER:
            mood = classify_utterance(text)
            if mood == "affirmative":
                return replace(ms, state=CONVERSING), \
                    [{"kind": "DispenseSnack"}, _speak(LINES["snack_enjoy"])]
            if mood == "negative":
                return replace(ms, state=CONVERSING), [_speak(LINES["snack_decline"])]
            return ms, []
        return ms, []

    if kind == "GestureObserved":
        if ms.last_utterance_t is not None and event.t == ms.last_utterance_t:
            return ms, []  # speech already spoke for this window
        gkind = d.get("verdict", {}).get("kind")
        if state in (OFFERING_HUG, AWAITING_CONSENT):
            if gkind == "nod":
                return _consent_given(ms, hw, cfg)
            if gkind == "shake":
                return replace(ms, state=CONVERSING), [_speak(LINES["comfort"])]
            return ms, []
        if state == SNACK_OFFER:
            if gkind == "nod":
                return replace(ms, state=CONVERSING), \
                    [{"kind": "DispenseSnack"}, _speak(LINES["snack_enjoy"])]
            if gkind == "shake":
                return replace(ms, state=CONVERSING), [_speak(LINES["snack_decline"])]
            return ms, []
        return ms, []

    if kind == "RobotTurnReady":
        if state in (GREETING, ASSESSING, CONVERSING, OFFERING_HUG,
                     AWAITING_CONSENT, SNACK_OFFER):
            return ms, [_speak(d.get("text", ""))]
        return ms, []

    if kind == "DistanceChanged":
        if state == HUGGING:
            abort = hug_abort_check(state, hw, cfg)
            if abort is not None:
                next_state, actions = abort
                return replace(ms, state=next_state), actions
        return ms, []

    if kind == "Tick":
        dt = int(d.get("dt_ms", 0))
        if dt <= 0:
            return ms, []
        actions = []
        if ms.face_lost and state != IDLE:
            lost = ms.face_lost_ms + dt
            if lost > FACE_LOST_FAREWELL_MS and state != FAREWELL:
                return replace(ms, state=FAREWELL, face_lost_ms=lost), \
                    [_speak(LINES["farewell"])]
            ms = replace(ms, face_lost_ms=lost)
        if state == GREETING:
            return replace(ms, state=ASSESSING, assess_elapsed_ms=0), actions
        if state == ASSESSING:
            dwell = ms.assess_elapsed_ms + dt
            if dwell >= ASSESS_DWELL_MS:
                return replace(ms, state=CONVERSING, assess_elapsed_ms=dwell), actions
            return replace(ms, assess_elapsed_ms=dwell), actions
        if state == OFFERING_HUG:
            return replace(ms, state=AWAITING_CONSENT, consent_elapsed_ms=0), actions
        if state == AWAITING_CONSENT:
            waited = ms.consent_elapsed_ms + dt
            if waited > cfg.consent_timeout_ms:
                return replace(ms, state=CONVERSING, consent_elapsed_ms=waited), \
                    actions + [_speak(LINES["no_pressure"])]
            return replace(ms, consent_elapsed_ms=waited), actions
        if state == HUGGING:
            abort = hug_abort_check(state, hw, cfg)
            if abort is not None:
                next_state, abort_actions = abort
                return replace(ms, state=next_state), actions + abort_actions
            if hw.hug_elapsed_ms >= cfg.hug_duration_ms:
                actions.append({"kind": "MoveArms", "target_deg": 0.0})
                if hw.snack_count > 0:
                    actions.append(_speak(LINES["snack_offer"]))
                    return replace(ms, state=SNACK_OFFER, hug_entry_gate=False), actions
                actions.append(_speak(LINES["post_hug"]))
                return replace(ms, state=CONVERSING, hug_entry_gate=False), actions
            return ms, actions
        if state == FAREWELL:
            return MachineState(), actions
        return ms, actions

    return ms, []


def hug_abort_check(state: str, hw: HardwareState, cfg: HugConfig):
    """Mid-hug safety: release and apologize when the user backs away."""
    if state != HUGGING:
        return None
    if hw.distance_cm > cfg.abort_distance_cm:
        return CONVERSING, [{"kind": "MoveArms", "target_deg": 0.0},
                            _speak(LINES["hug_abort"])]
    return None


def tick_hardware(hw: HardwareState, dt_ms: int, hugging: bool = False,
                  noise=None) -> HardwareState:
    """Integrate arm motion toward targets at the rate limit; accumulate hug time."""
    if dt_ms <= 0:
        raise ValueError("dt must be positive")
    max_step = hw.arm_rate * dt_ms / 1000.0
    hw = copy.copy(hw)

    def toward(pos, target):
        delta = target - pos
        if abs(delta) <= max_step:
            pos = target
        else:
            pos += max_step if delta > 0 else -max_step
        return min(max(pos, 0.0), 120.0)

    hw.left_arm_deg = toward(hw.left_arm_deg, hw.left_target_deg)
    hw.right_arm_deg = toward(hw.right_arm_deg, hw.right_target_deg)
    if hugging:
        hw.hug_elapsed_ms += dt_ms
    if noise is not None:
        hw.distance_cm = min(max(hw.distance_cm + noise.uniform(-2.0, 2.0), 0.0),
                             400.0)
    return hw


def apply_event(ms: MachineState, hw: HardwareState, event: SimEvent,
                cfg: HugConfig, noise=None):
    """Deterministic fold step used by both the live session and replay:
    integrate hardware, run the pure transition, execute hardware actions."""
    hw = copy.copy(hw)
    if event.kind == "DistanceChanged":
        hw.distance_cm = min(max(float(event.data.get("cm", hw.distance_cm)),
                                 0.0), 400.0)
    elif event.kind == "Tick":
        dt = int(event.data.get("dt_ms", 0))
        if dt > 0:
            hw = tick_hardware(hw, dt, hugging=ms.state == HUGGING, noise=noise)
    was_hugging = ms.state == HUGGING
    ms, actions = step(ms, event, hw, cfg)
    if ms.state == HUGGING and not was_hugging:
        hw.hug_elapsed_ms = 0
    for act in actions:
        if act["kind"] == "MoveArms":
            hw.left_target_deg = act["target_deg"]
            hw.right_target_deg = act["target_deg"]
        elif act["kind"] == "DispenseSnack":
            if hw.snack_count <= 0:
                raise AssertionError("DispenseSnack with empty dispenser")
            hw.snack_count -= 1
    return ms, hw, actions


def transition_table():
    """Machine-readable summary of the main transition rows (one source of
    truth for docs, tests, and the operator console)."""
    rows = [
        (IDLE, "FaceDetected", None, FACE_SEARCH, []),
        (FACE_SEARCH, "FaceDetected", None, GREETING, ["Speak"]),
        (GREETING, "EmotionObserved", "sad_triggered", OFFERING_HUG, ["Speak"]),
        (GREETING, "EmotionObserved", "not sad_triggered", CONVERSING, []),
        (GREETING, "Tick", None, ASSESSING, []),
        (ASSESSING, "EmotionObserved", "sad_triggered", OFFERING_HUG, ["Speak"]),
        (ASSESSING, "EmotionObserved", "not sad_triggered", CONVERSING, []),
        (ASSESSING, "Tick", "dwell >= %d ms" % ASSESS_DWELL_MS, CONVERSING, []),
        (CONVERSING, "UserUtterance", None, CONVERSING, ["RequestLlmTurn"]),
        (CONVERSING, "RobotTurnReady", None, CONVERSING, ["Speak"]),
        (CONVERSING, "EmotionObserved", "sad_triggered", OFFERING_HUG, ["Speak"]),
        (OFFERING_HUG, "Tick", None, AWAITING_CONSENT, []),
        (AWAITING_CONSENT, "GestureObserved", "nod AND hug_gate", HUGGING,
         ["MoveArms"]),
        (AWAITING_CONSENT, "GestureObserved", "nod AND NOT hug_gate",
         AWAITING_CONSENT, ["Speak"]),
        (AWAITING_CONSENT, "UserUtterance", "affirmative AND hug_gate", HUGGING,
         ["MoveArms"]),
        (AWAITING_CONSENT, "GestureObserved", "shake", CONVERSING, ["Speak"]),
        (AWAITING_CONSENT, "UserUtterance", "negative", CONVERSING, ["Speak"]),
        (AWAITING_CONSENT, "Tick", "waited > consent_timeout", CONVERSING,
         ["Speak"]),
        (HUGGING, "Tick", "hug_elapsed >= hug_duration AND snacks > 0",
         SNACK_OFFER, ["MoveArms", "Speak"]),
        (HUGGING, "Tick", "hug_elapsed >= hug_duration AND snacks == 0",
         CONVERSING, ["MoveArms", "Speak"]),
        (HUGGING, "DistanceChanged", "distance > abort_distance", CONVERSING,
         ["MoveArms", "Speak"]),
        (SNACK_OFFER, "UserUtterance", "affirmative", CONVERSING,
         ["DispenseSnack", "Speak"]),
        (SNACK_OFFER, "GestureObserved", "nod", CONVERSING,
         ["DispenseSnack", "Speak"]),
        (SNACK_OFFER, "UserUtterance", "negative", CONVERSING, ["Speak"]),
        ("any", "Tick", "face lost > %d ms" % FACE_LOST_FAREWELL_MS, FAREWELL,
         ["Speak"]),
        (FAREWELL, "Tick", None, IDLE, []),
        ("any", "OperatorCommand", "reset", IDLE, []),
        ("any", "OperatorCommand", "end", FAREWELL, ["Speak", "EndSession"]),
    ]
    return [{"state": s, "event": e, "guard": g, "next": n, "actions": a}
            for s, e, g, n, a in rows]
