"""HTTP/WebSocket adapter over the gateway.

Exposes the same JSON message schema as the TCP channel so browser clients
can consume it: POST /config submits a procedure, GET /health reports
pipeline liveness and telemetry counters, and the /stream WebSocket relays
session messages.  When a built frontend bundle exists it is served at /.
"""

from __future__ import annotations

import asyncio
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .gateway import (SCHEMA_VERSION, GatewayServer, InfeasibleConfig,
                      ValidationError, _Client)

FRONTEND_DIST = Path(__file__).resolve().parents[2] / "frontend" / "dist"


def make_app(gateway: GatewayServer, frontend_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="runway overrun advisory gateway")

    @app.get("/health")
    def health():
        return gateway.health()

    @app.post("/config")
    def config(body: dict):
        try:
            static = gateway.submit_config(body.get("procedure", ""),
                                           body.get("config", {}))
        except ValidationError as e:
            return JSONResponse(status_code=422, content={
                "v": SCHEMA_VERSION, "type": "error", "code": "validation",
                "fields": e.fields})
        except InfeasibleConfig as e:
            return JSONResponse(status_code=409, content={
                "v": SCHEMA_VERSION, "type": "error", "code": "infeasible",
                "detail": str(e)})
        return static

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        client = _Client(conn=None)
        with gateway._clients_lock:
            gateway._clients.append(client)
        with gateway._session_lock:
            if gateway._last_static is not None:
                client.enqueue(gateway._last_static)
            if gateway.session is not None:
                client.enqueue(gateway.session.state_message())
        try:
            while True:
                batch = await asyncio.to_thread(client.next_batch, 0.5)
                for message in batch:
                    await ws.send_json(message)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            gateway._drop_client(client)

    static_dir = frontend_dir if frontend_dir is not None else FRONTEND_DIST
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="frontend")
    return app
