"""HTTP + streaming API over the session manager."""

from __future__ import annotations

import queue

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from starlette.concurrency import run_in_threadpool

from .gesture import GestureVerdict
from .robot import SimEvent
from .session import ServiceConfig, SessionGoneError, SessionManager
from .synth import run_gesture_pipeline, synthesize_gesture_frames


def create_app(manager: SessionManager = None) -> FastAPI:
    manager = manager or SessionManager(ServiceConfig())
    app = FastAPI(title="carebot")
    app.state.manager = manager

    def _session(sid: str):
        try:
            return manager.get(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/sessions")
    def create_session():
        session = manager.create_session()
        return {"id": session.id}

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str):
        return _session(sid).snapshot()

    @app.post("/sessions/{sid}/events")
    def post_event(sid: str, body: dict):
        session = _session(sid)
        try:
            event = SimEvent.from_dict(body)
        except (ValueError, KeyError) as e:
            raise HTTPException(status_code=422, detail=str(e))
        try:
            record = manager.submit_event(session, event,
                                          idempotency_key=body.get("idempotency_key"))
        except SessionGoneError:
            raise HTTPException(status_code=410, detail="session ended")
        return record

    @app.post("/sessions/{sid}/gesture")
    def post_gesture(sid: str, body: dict):
        """Console nod/shake: synthesize a frame burst and run it through the
        real optical-flow pipeline unless direct mode is requested."""
        session = _session(sid)
        kind = body.get("kind")
        if kind not in ("nod", "shake"):
            raise HTTPException(status_code=422, detail="kind must be nod|shake")
        t = int(body.get("t", 0))
        if body.get("direct"):
            verdict = GestureVerdict(kind=kind, confidence=1.0, window=(t, t))
        else:
            frames, box = synthesize_gesture_frames(kind)
            verdict = run_gesture_pipeline(frames, box,
                                           flow_params=manager.config.flow,
                                           gesture_params=manager.config.gesture)
        event = SimEvent(kind="GestureObserved", t=t,
                         data={"verdict": verdict.to_dict()})
        try:
            record = manager.submit_event(session, event,
                                          idempotency_key=body.get("idempotency_key"))
        except SessionGoneError:
            raise HTTPException(status_code=410, detail="session ended")
        return {"verdict": verdict.to_dict(), "record": record}

    @app.get("/sessions/{sid}/metrics")
    def get_metrics(sid: str):
        session = _session(sid)
        return {"turns": [
            {"t_request": m.t_request, "t_response": m.t_response,
             "latency_ms": m.latency_ms, "regenerated": m.regenerated,
             "degraded": m.degraded}
            for m in session.metrics
        ]}

    @app.websocket("/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str):
        try:
            session = manager.get(sid)
        except KeyError:
            await ws.close(code=4404)
            return
        await ws.accept()
        q: queue.Queue = queue.Queue()
        session.subscribers.append(q)
        await ws.send_json({"type": "snapshot", "snapshot": session.snapshot()})
        try:
            while True:
                try:
                    message = await run_in_threadpool(q.get, True, 1.0)
                except Exception:
                    continue
                await ws.send_json(message)
        except WebSocketDisconnect:
            pass
        finally:
            if q in session.subscribers:
                session.subscribers.remove(q)

    return app
