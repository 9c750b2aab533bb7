"""WebSocket service speaking the frame-in / event-out wire protocol.

One socket endpoint carries everything. A client opens with
`hello{v}`; the server answers `hello_ack{model_info}`. After that the
client either pushes `ingest{frame}` messages (first ingester becomes
the session's single writer) or sends `subscribe{}` to receive every
EventMessage the session's pipeline emits. Unknown message kinds get an
error frame; unknown fields are ignored.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .actions import ActionClass
from .gcn import ModelParams, model_info
from .pipeline import PROTOCOL_VERSION, EventMessage, PipelineConfig, SessionPipeline
from .robot import Trajectory

log = logging.getLogger(__name__)

DEFAULT_SESSION = "default"


class _Session:
    def __init__(self, pipeline: SessionPipeline):
        self.pipeline = pipeline
        self.writer: Optional[int] = None  # id() of the owning socket
        self.subscribers: dict[int, WebSocket] = {}


def _error_frame(code: str, text: str) -> dict:
    return {"kind": "error", "code": code, "text": text}


def _event_frame(event: EventMessage) -> dict:
    return {"kind": "event", "event": event.to_obj()}


def create_app(
    params: ModelParams,
    config: PipelineConfig = PipelineConfig(),
    library: Optional[dict[ActionClass, Trajectory]] = None,
    static_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="har-teleop")
    sessions: dict[str, _Session] = {}

    def session_for(name: str) -> _Session:
        if name not in sessions:
            sessions[name] = _Session(SessionPipeline(params, config, library))
        return sessions[name]

    async def broadcast(session: _Session, events: list[EventMessage]) -> None:
        if not events or not session.subscribers:
            return
        dead = []
        for sid, ws in session.subscribers.items():
            try:
                for event in events:
                    await ws.send_json(_event_frame(event))
            except Exception:
                dead.append(sid)
        for sid in dead:
            session.subscribers.pop(sid, None)

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok", "sessions": len(sessions)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        me = id(ws)
        joined: list[_Session] = []
        try:
            try:
                first = json.loads(await ws.receive_text())
            except json.JSONDecodeError:
                await ws.send_json(_error_frame("parse", "handshake is not JSON"))
                await ws.close()
                return
            if not isinstance(first, dict) or first.get("kind") != "hello":
                await ws.send_json(
                    _error_frame("handshake", "first message must be hello")
                )
                await ws.close()
                return
            if first.get("v") != PROTOCOL_VERSION:
                await ws.send_json(
                    _error_frame(
                        "version",
                        f"protocol version {first.get('v')!r} unsupported, "
                        f"want {PROTOCOL_VERSION}",
                    )
                )
                await ws.close()
                return
            await ws.send_json(
                {
                    "kind": "hello_ack",
                    "v": PROTOCOL_VERSION,
                    "model_info": model_info(params),
                    "config": {
                        "window_size": config.window_size,
                        "fps": config.fps,
                        "k_consecutive": config.k_consecutive,
                    },
                    "actions": [a.name.lower() for a in ActionClass],
                }
            )

            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_json(_error_frame("parse", "message is not JSON"))
                    continue
                if not isinstance(msg, dict):
                    await ws.send_json(_error_frame("parse", "message must be an object"))
                    continue
                kind = msg.get("kind")

                if kind == "ingest":
                    frame = msg.get("frame")
                    if not isinstance(frame, dict):
                        await ws.send_json(
                            _error_frame("parse", "ingest needs a frame object")
                        )
                        continue
                    name = str(frame.get("session", DEFAULT_SESSION))
                    session = session_for(name)
                    if session.writer is None:
                        session.writer = me
                        if session not in joined:
                            joined.append(session)
                    if session.writer != me:
                        await ws.send_json(
                            _error_frame(
                                "single_writer",
                                f"session {name!r} already has a writer",
                            )
                        )
                        continue
                    result = session.pipeline.ingest_frame(frame)
                    events = list(result.events)
                    if result.accepted:
                        events.extend(session.pipeline.process_available())
                    else:
                        await ws.send_json(
                            _error_frame(result.reason or "rejected",
                                         "frame rejected")
                        )
                    await broadcast(session, events)

                elif kind == "subscribe":
                    name = str(msg.get("session", DEFAULT_SESSION))
                    session = session_for(name)
                    session.subscribers[me] = ws
                    if session not in joined:
                        joined.append(session)

                else:
                    await ws.send_json(
                        _error_frame("unknown_kind", f"unknown message kind {kind!r}")
                    )
        except WebSocketDisconnect:
            pass
        finally:
            for session in joined:
                session.subscribers.pop(me, None)
                if session.writer == me:
                    session.writer = None

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    elif static_dir is not None:
        log.warning("static dir %s missing; console not mounted", static_dir)

    return app
