"""Live serving: per-query pipeline instances, frame fan-out, HTTP ingest.

One ingestion path feeds every instance; each instance owns a window, a
ticker thread, and a set of subscribers. Slow subscribers only ever see
the latest frame (queue of one, old frame dropped). A failed tick keeps
the previous frame published and never tears the instance down.
"""

from __future__ import annotations

import inspect
import logging
import queue
import threading
import time

import anyio
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from streammap.config import PipelineConfig
from streammap.mapgen import MapFrame
from streammap.messages import DuplicateMessageError, Message, Query, Window, matches
from streammap.pipeline import PipelineState, prepare_message, tick
from streammap.semantics import load_stopwords
from streammap.sources import parse_line
from streammap.wire import frame_to_dict, frame_to_json

log = logging.getLogger(__name__)

MAX_QUERY_LENGTH = 256


class BadQueryError(ValueError):
    pass


def parse_query(raw: str) -> Query:
    if len(raw) > MAX_QUERY_LENGTH or any(ord(ch) < 32 for ch in raw):
        raise BadQueryError("query must be printable and at most 256 characters")
    return Query.parse(raw)


class _Subscriber:
    """Latest-frame-only mailbox: a full queue drops the stale frame."""

    def __init__(self):
        self.frames: queue.Queue[MapFrame] = queue.Queue(maxsize=1)

    def publish(self, frame: MapFrame) -> None:
        while True:
            try:
                self.frames.put_nowait(frame)
                return
            except queue.Full:
                try:
                    self.frames.get_nowait()
                except queue.Empty:
                    pass

    def poll(self, timeout: float = 0.25) -> MapFrame | None:
        try:
            return self.frames.get(timeout=timeout)
        except queue.Empty:
            return None


# anyio renamed cancellable= to abandon_on_cancel=; support both so a
# cancelled websocket task never waits on a blocked queue read.
_CANCEL_KW = (
    "abandon_on_cancel"
    if "abandon_on_cancel" in inspect.signature(anyio.to_thread.run_sync).parameters
    else "cancellable"
)


async def _poll_in_thread(sub: _Subscriber) -> MapFrame | None:
    return await anyio.to_thread.run_sync(sub.poll, **{_CANCEL_KW: True})


class PipelineInstance:
    """One query's window + pipeline state + subscribers + ticker."""

    def __init__(self, query: Query, config: PipelineConfig):
        self.query = query
        self.config = config
        self.window = Window(capacity=config.window_capacity,
                             max_age_ms=config.window_max_age_ms)
        self.state = PipelineState()
        self.latest: MapFrame | None = None
        self.subscribers: list[_Subscriber] = []
        self.lock = threading.Lock()
        self.tick_lock = threading.Lock()  # ticks are strictly sequential
        self.stop_event = threading.Event()
        self.thread: threading.Thread | None = None
        self.tick_errors = 0

    def offer(self, msg: Message) -> bool:
        if not matches(msg, self.query):
            return False
        try:
            self.window.push(msg)
            return True
        except DuplicateMessageError:
            return False

    def run_tick(self, ts: int | None = None) -> MapFrame | None:
        """One pipeline pass; on error the previous frame stays published."""
        with self.tick_lock:
            snapshot = self.window.snapshot()
            ts = int(time.time() * 1000) if ts is None else ts
            try:
                frame, new_state, _report = tick(snapshot, self.state, self.config, ts)
            except Exception:
                self.tick_errors += 1
                log.exception("tick failed for query %r; keeping previous frame",
                              self.query.normalized())
                return None
            with self.lock:
                self.state = new_state
                self.latest = frame
                subscribers = list(self.subscribers)
        for sub in subscribers:
            sub.publish(frame)
        return frame

    def subscribe(self) -> tuple[_Subscriber, MapFrame | None]:
        sub = _Subscriber()
        with self.lock:
            self.subscribers.append(sub)
            latest = self.latest
        return sub, latest

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    def start(self) -> None:
        if self.thread is not None:
            return
        self.thread = threading.Thread(
            target=self._loop, name=f"ticker:{self.query.normalized()}", daemon=True
        )
        self.thread.start()

    def _loop(self) -> None:
        period = self.config.tick_ms / 1000.0
        while not self.stop_event.wait(period):
            self.run_tick()

    def stop(self) -> None:
        self.stop_event.set()
        if self.thread is not None:
            self.thread.join(timeout=2.0)


class PipelineHub:
    """All live pipeline instances, keyed by normalized query."""

    def __init__(self, config: PipelineConfig, autostart: bool = True):
        self.config = config
        self.autostart = autostart
        self.stopwords = load_stopwords(config.stopwords_path)
        self.instances: dict[str, PipelineInstance] = {}
        self.lock = threading.Lock()
        self.accepted = 0
        self.malformed = 0

    def instance(self, query: Query) -> PipelineInstance:
        key = query.normalized()
        with self.lock:
            inst = self.instances.get(key)
            if inst is None:
                inst = PipelineInstance(query, self.config)
                self.instances[key] = inst
                if self.autostart:
                    inst.start()
        if inst.latest is None:
            inst.run_tick()
        return inst

    def ingest(self, msg: Message) -> None:
        msg = prepare_message(msg, self.stopwords)
        with self.lock:
            instances = list(self.instances.values())
        self.accepted += 1
        for inst in instances:
            inst.offer(msg)

    def ingest_ndjson(self, payload: str) -> tuple[int, int]:
        accepted = malformed = 0
        for line in payload.splitlines():
            if not line.strip():
                continue
            msg = parse_line(line)
            if msg is None:
                malformed += 1
                continue
            self.ingest(msg)
            accepted += 1
        self.malformed += malformed
        return accepted, malformed

    def stop(self) -> None:
        with self.lock:
            instances = list(self.instances.values())
        for inst in instances:
            inst.stop()


def create_app(config: PipelineConfig | None = None, autostart: bool = True) -> FastAPI:
    """Build the HTTP/WebSocket app around a fresh hub (hub at app.state.hub)."""
    config = config or PipelineConfig()
    hub = PipelineHub(config, autostart=autostart)
    hub.instance(Query())  # the match-all pipeline always runs
    app = FastAPI(title="streammap")
    app.state.hub = hub

    @app.get("/healthz")
    def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.get("/frames/latest")
    def latest_frame(q: str = "") -> JSONResponse:
        try:
            query = parse_query(q)
        except BadQueryError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        inst = hub.instance(query)
        with inst.lock:
            frame = inst.latest
        if frame is None:  # tick failed before any frame existed
            return JSONResponse({"error": "no frame available yet"}, status_code=503)
        return JSONResponse(frame_to_dict(frame))

    @app.post("/ingest")
    async def ingest(request: Request) -> JSONResponse:
        payload = (await request.body()).decode("utf-8", errors="replace")
        accepted, malformed = hub.ingest_ndjson(payload)
        return JSONResponse({"accepted": accepted, "malformed": malformed})

    @app.websocket("/stream")
    async def stream(ws: WebSocket) -> None:
        raw = ws.query_params.get("q", "")
        try:
            query = parse_query(raw)
        except BadQueryError:
            await ws.close(code=4400, reason="bad query")
            return
        await ws.accept()
        inst = hub.instance(query)
        sub, latest = inst.subscribe()
        try:
            if latest is not None:
                await ws.send_text(frame_to_json(latest))
            while True:
                frame = await _poll_in_thread(sub)
                if frame is not None:
                    await ws.send_text(frame_to_json(frame))
        except WebSocketDisconnect:
            pass
        finally:
            inst.unsubscribe(sub)

    @app.on_event("shutdown")
    def shutdown() -> None:
        hub.stop()

    return app
