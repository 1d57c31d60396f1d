"""Local HTTP service exposing slice and simulate for the browser viewer.

The service is a desk tool: it binds loopback by default, keeps one loaded
substrate mesh plus baseline parameters and machine config as read-only
state, and treats every request independently. Responses are the same
line-oriented text formats the CLI writes, so the two fronts stay
byte-identical by construction.

Routing lives in `handle`, a pure function from (method, path, body, state)
to (status, body text); the socket layer below it only moves bytes. That
keeps the whole API testable without opening a port.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .gcode import GcodeError, parse
from .machine import MachineConfig, render_machine
from .mesh import SurfaceMesh, render_mesh_text
from .pipeline import plan_program, render_summary
from .simcheck import DEFAULT_MARGIN, export_trace, replay
from .toolpath import (
    PARAMS_HEADER,
    ParamsError,
    SliceParams,
    ToolpathError,
    parse_params,
    render_params,
    slice_mesh,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 8723


@dataclass
class AppState:
    """Read-only per-server state: the substrate and baseline settings."""

    mesh: SurfaceMesh
    params: SliceParams
    config: MachineConfig
    label: str = "substrate"
    margin: float = DEFAULT_MARGIN


def _slice_program(body: str, state: AppState):
    """Shared slice path: params text (empty means server baseline) to a
    planned program. Raises ParamsError or ToolpathError."""
    text = body if body.strip() else render_params(state.params)
    params = parse_params(text)
    problems = params.validate()
    if problems:
        raise ParamsError("; ".join(f"{field}: {msg}" for field, msg in problems))
    toolpath = slice_mesh(state.mesh, params)
    return plan_program(toolpath, params, state.config)


def handle(method: str, path: str, body: str, state: AppState) -> tuple[int, str]:
    """Route one request. Returns (status code, response text)."""
    path = path.split("?", 1)[0]
    if method == "OPTIONS":
        return 204, ""
    if method == "GET":
        if path == "/health":
            return 200, f"ok {state.label}\n"
        if path == "/mesh":
            return 200, render_mesh_text(state.mesh)
        if path == "/params":
            return 200, render_params(state.params)
        if path == "/machine":
            return 200, render_machine(state.config)
        return 404, f"no such resource: {path}\n"
    if method == "POST":
        if path == "/slice":
            try:
                program = _slice_program(body, state)
            except ParamsError as err:
                return 400, f"params error: {err}\n"
            except ToolpathError as err:
                return 422, f"slicing error: {err}\n"
            return 200, render_summary(program) + program.gcode()
        if path == "/simulate":
            first = next((ln.strip() for ln in body.splitlines() if ln.strip()), "")
            try:
                if first == PARAMS_HEADER:
                    tagged = _slice_program(body, state).tagged_poses
                else:
                    tagged = parse(body).tagged()
            except ParamsError as err:
                return 400, f"params error: {err}\n"
            except GcodeError as err:
                return 400, f"gcode error: {err}\n"
            except ToolpathError as err:
                return 422, f"slicing error: {err}\n"
            trace = replay(tagged, state.config, mesh=state.mesh, margin=state.margin)
            return 200, export_trace(trace)
        return 404, f"no such resource: {path}\n"
    return 405, f"method {method} not supported\n"


class _Handler(BaseHTTPRequestHandler):
    state: AppState  # set on the subclass by make_server

    def _run(self, method: str) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length).decode("utf-8", errors="replace")
        try:
            status, text = handle(method, self.path, body, self.state)
        except Exception:
            log.exception("unhandled error for %s %s", method, self.path)
            status, text = 500, "internal error\n"
        payload = text.encode()
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        if payload:
            self.wfile.write(payload)

    def do_GET(self):  # noqa: N802 (http.server naming)
        self._run("GET")

    def do_POST(self):  # noqa: N802
        self._run("POST")

    def do_OPTIONS(self):  # noqa: N802
        self._run("OPTIONS")

    # Route unsupported methods through handle() so clients get the same
    # plain-text 405 with CORS headers instead of the stdlib's HTML 501.
    def do_PUT(self):  # noqa: N802
        self._run("PUT")

    def do_DELETE(self):  # noqa: N802
        self._run("DELETE")

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)


def make_server(state: AppState, host: str = "127.0.0.1",
                port: int = DEFAULT_PORT) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)
