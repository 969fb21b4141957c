"""Emotion-conditioned prompting, chat-completion client, repetition guard.

Speech I/O is modeled as text channels: this module consumes
post-transcription user text and produces text for downstream synthesis.
Endpoints with a ``stub:`` base_url never touch the network.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field

HISTORY_BOUND = 20
PROMPT_CHAR_BUDGET = 8000
MAX_CALLS_PER_TURN = 2

PERSONAS = {
    "companion": (
        "You are a gentle, empathetic companion robot. You offer comfort, "
        "never judge, and keep replies short and warm. You are talking with "
        "{user_name}, who currently seems {emotion}. Acknowledge their "
        "feelings before anything else."
    ),
}

FALLBACK_LINES = {
    "sad": "I'm here with you. Take all the time you need.",
    "angry": "That sounds really frustrating. I'm listening.",
    "fear": "You're safe here with me. I'm not going anywhere.",
    "happy": "I'm so glad to hear that. Tell me more!",
    "neutral": "I'm here and listening. Tell me what's on your mind.",
    "disgust": "That sounds unpleasant. I'm here if you want to talk about it.",
    "surprise": "Oh! That sounds like a lot to take in. I'm listening.",
}

ANTI_REPEAT_NOTE = (
    "Your previous reply was too similar to something you already said. "
    "Rephrase with fresh wording and add something new."
)


class ConfigurationError(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


@dataclass
class Utterance:
    role: str  # user | robot | system
    text: str
    t: int = 0

    def __post_init__(self):
        if self.role in ("user", "robot") and not self.text:
            raise ValueError("empty %s utterance" % self.role)


@dataclass
class DialogueContext:
    user_name: str = None
    emotion_label: str = "neutral"
    persona: str = "companion"
    history: list = field(default_factory=list)

    def append(self, utt: Utterance):
        self.history.append(utt)
        while len(self.history) > HISTORY_BOUND:
            self.history.pop(0)


@dataclass
class TurnMetrics:
    t_request: int
    t_response: int
    regenerated: bool = False
    degraded: bool = False

    @property
    def latency_ms(self) -> int:
        return self.t_response - self.t_request


@dataclass
class LlmEndpoint:
    base_url: str
    model_name: str = "llama-3.1-8b-instant"
    api_key_ref: str = "LLM_API_KEY"
    timeout_ms: int = 20000

    @property
    def is_stub(self) -> bool:
        return self.base_url.startswith("stub:")

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_ref, "")
        if not key:
            raise ConfigurationError(
                "missing API key in env var %s" % self.api_key_ref)
        return key


def _now_ms() -> int:
    return int(time.monotonic() * 1000)


def build_prompt(ctx: DialogueContext, extra_system: str = None):
    """System persona + history, oldest turns dropped past the char budget."""
    persona = PERSONAS[ctx.persona].format(
        user_name=ctx.user_name or "a new friend",
        emotion=ctx.emotion_label,
    )
    messages = [{"role": "system", "content": persona}]
    role_map = {"user": "user", "robot": "assistant", "system": "system"}
    history = [{"role": role_map[u.role], "content": u.text} for u in ctx.history]
    budget = PROMPT_CHAR_BUDGET - len(persona)
    if extra_system:
        budget -= len(extra_system)
    kept = []
    used = 0
    for msg in reversed(history):
        if used + len(msg["content"]) > budget and kept:
            break
        kept.append(msg)
        used += len(msg["content"])
    messages.extend(reversed(kept))
    if extra_system:
        messages.append({"role": "system", "content": extra_system})
    return messages


class StubLlm:
    """Deterministic in-process endpoint. Optional scripted lines and per-call
    delays (ms) let tests and the latency bench inject ground truth."""

    def __init__(self, lines=None, delays_ms=None):
        self.lines = list(lines) if lines else None
        self.delays_ms = list(delays_ms) if delays_ms else None
        self.calls = 0

    def complete(self, messages) -> str:
        i = self.calls
        self.calls += 1
        if self.delays_ms:
            time.sleep(self.delays_ms[min(i, len(self.delays_ms) - 1)] / 1000.0)
        if self.lines:
            return self.lines[min(i, len(self.lines) - 1)]
        last_user = next((m["content"] for m in reversed(messages)
                          if m["role"] == "user"), "")
        return "I hear you say: %s. I'm here for you." % (last_user or "hello")


def complete(endpoint: LlmEndpoint, messages, stub: StubLlm = None,
             fallback: str = None):
    """One chat-completion call; returns (text, TurnMetrics).

    Transport failures retry once, then degrade to the fallback line.
    """
    if fallback is None:
        fallback = FALLBACK_LINES["neutral"]
    t_request = _now_ms()
    if endpoint.is_stub:
        text = (stub or StubLlm()).complete(messages)
        return text, TurnMetrics(t_request=t_request, t_response=_now_ms())

    import httpx

    payload = {"model": endpoint.model_name, "messages": messages}
    headers = {"Authorization": "Bearer %s" % endpoint.api_key()}
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    timeout = endpoint.timeout_ms / 1000.0
    last_error = None
    for _ in range(2):  # one retry
        try:
            resp = httpx.post(url, json=payload, headers=headers, timeout=timeout)
            resp.raise_for_status()
            body = resp.json()
            try:
                text = body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                # malformed body: protocol error, degraded turn
                return fallback, TurnMetrics(t_request=t_request,
                                             t_response=_now_ms(), degraded=True)
            return text, TurnMetrics(t_request=t_request, t_response=_now_ms())
        except httpx.HTTPError as e:
            last_error = e
    del last_error
    return fallback, TurnMetrics(t_request=t_request, t_response=_now_ms(),
                                 degraded=True)


_WORD_RE = re.compile(r"[a-z0-9']+")


def _tokens(text: str):
    return _WORD_RE.findall(text.lower())


def _trigrams(tokens):
    return {tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)}


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def repetition_score(candidate: str, ctx: DialogueContext, k: int = 3) -> float:
    """Max word-trigram Jaccard against the last k robot utterances."""
    recent = [u.text for u in ctx.history if u.role == "robot"][-k:]
    if not recent:
        return 0.0
    cand_tokens = _tokens(candidate)
    best = 0.0
    for prev in recent:
        prev_tokens = _tokens(prev)
        if len(cand_tokens) < 3 or len(prev_tokens) < 3:
            if cand_tokens == prev_tokens:
                score = 1.0
            else:
                score = _jaccard(set(cand_tokens), set(prev_tokens))
        else:
            score = _jaccard(_trigrams(cand_tokens), _trigrams(prev_tokens))
        best = max(best, score)
    return best


def respond(ctx: DialogueContext, endpoint: LlmEndpoint,
            guard_threshold: float = 0.6, stub: StubLlm = None, t: int = None):
    """One dialogue turn: prompt, complete, regenerate at most once on
    repetition, append the robot utterance to history."""
    fallback = FALLBACK_LINES.get(ctx.emotion_label, FALLBACK_LINES["neutral"])
    messages = build_prompt(ctx)
    text, metrics = complete(endpoint, messages, stub=stub, fallback=fallback)
    if repetition_score(text, ctx) > guard_threshold:
        messages = build_prompt(ctx, extra_system=ANTI_REPEAT_NOTE)
        text, metrics2 = complete(endpoint, messages, stub=stub, fallback=fallback)
        metrics = TurnMetrics(t_request=metrics.t_request,
                              t_response=metrics2.t_response,
                              regenerated=True, degraded=metrics2.degraded)
    utt = Utterance(role="robot", text=text,
                    t=t if t is not None else metrics.t_response)
    ctx.append(utt)
    return utt, metrics
