"""HTTP and WebSocket surface over the session engine.

Commands within one session are serialized through a per-session lock;
execution progress fans out to any number of stream subscribers.
"""

from __future__ import annotations

import asyncio

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from ..policy import TrajectoryPolicy
from ..sim import depth_to_pgm, scene_from_dict
from .sessions import SessionError, SessionManager, render_session_depth


class CreateSessionBody(BaseModel):
    seed: int | None = None
    scene: dict | None = None


class TargetBody(BaseModel):
    x: float
    y: float


class CandidatesBody(BaseModel):
    k: int = 4


class ExecuteBody(BaseModel):
    candidate_id: int


class ManualBody(BaseModel):
    direction: str


def create_app(policy: TrajectoryPolicy | None = None,
               data_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pushgrasp teleop service")
    manager = SessionManager(policy=policy, data_dir=data_dir)
    app.state.manager = manager
    locks: dict[str, asyncio.Lock] = {}
    subscribers: dict[str, list[asyncio.Queue]] = {}

    def lock_for(session_id: str) -> asyncio.Lock:
        return locks.setdefault(session_id, asyncio.Lock())

    def broadcast(session_id: str):
        def emit(event: dict) -> None:
            for queue in subscribers.get(session_id, []):
                queue.put_nowait(event)
        return emit

    @app.exception_handler(SessionError)
    async def session_error_handler(_, exc: SessionError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.code, "message": exc.message})

    @app.get("/health")
    async def health():
        return {"status": "ok", "sessions": len(manager.sessions),
                "policy_loaded": manager.policy is not None}

    @app.post("/sessions")
    async def create_session(body: CreateSessionBody):
        scene = scene_from_dict(body.scene) if body.scene is not None else None
        session = manager.create(seed=body.seed, scene=scene)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return manager.get(session_id).snapshot()

    @app.post("/sessions/{session_id}/target")
    async def set_target(session_id: str, body: TargetBody):
        session = manager.get(session_id)
        async with lock_for(session_id):
            result = session.set_target((body.x, body.y))
        return {**result, "session": session.snapshot()}

    @app.post("/sessions/{session_id}/candidates")
    async def request_candidates(session_id: str, body: CandidatesBody):
        session = manager.get(session_id)
        async with lock_for(session_id):
            candidates = session.request_candidates(body.k)
        return {"candidates": [c.to_dict() for c in candidates],
                "state": session.state.value}

    @app.post("/sessions/{session_id}/execute")
    async def execute(session_id: str, body: ExecuteBody):
        session = manager.get(session_id)
        async with lock_for(session_id):
            record = session.execute(body.candidate_id,
                                     emit=broadcast(session_id))
        return {"episode": record.to_dict(), "session": session.snapshot()}

    @app.post("/sessions/{session_id}/manual")
    async def manual(session_id: str, body: ManualBody):
        session = manager.get(session_id)
        async with lock_for(session_id):
            record = session.manual_step(body.direction,
                                         emit=broadcast(session_id))
        return {"episode": record.to_dict(), "session": session.snapshot()}

    @app.post("/sessions/{session_id}/grasp")
    async def grasp(session_id: str):
        session = manager.get(session_id)
        async with lock_for(session_id):
            result = session.attempt_grasp(emit=broadcast(session_id))
        return {**result, "session": session.snapshot()}

    @app.get("/sessions/{session_id}/depth")
    async def depth(session_id: str):
        session = manager.get(session_id)
        data = depth_to_pgm(render_session_depth(session))
        return Response(content=data, media_type="image/x-portable-graymap")

    @app.get("/sessions/{session_id}/clusters")
    async def clusters(session_id: str):
        session = manager.get(session_id)
        return {"clusters": [c.to_dict() for c in session.clusters()]}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        try:
            manager.get(session_id)
        except SessionError:
            await websocket.close(code=4004)
            return
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        subscribers.setdefault(session_id, []).append(queue)
        try:
            while True:
                event = await queue.get()
                await websocket.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            subscribers[session_id].remove(queue)

    return app
