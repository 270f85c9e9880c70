"""The orchestration-plan resource API bound to a local socket (stdlib http.server)."""

from __future__ import annotations

import json
import re
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import GatewayError, InvalidPlanRequest, PlanAlreadyRunning, PlanNotFound
from ..orchestrator import PLAN_ROOT, Orchestrator, PlanRequest

_ITEM = re.compile(rf"^{PLAN_ROOT}/(\d+)$")

_STATUS = {
    PlanNotFound: HTTPStatus.NOT_FOUND,
    InvalidPlanRequest: HTTPStatus.BAD_REQUEST,
    PlanAlreadyRunning: HTTPStatus.CONFLICT,
}


class PlanApi:
    """Transport-free request dispatch; every call is linearized by one lock."""

    def __init__(self, orchestrator: Orchestrator, controller=None):
        self.orch = orchestrator
        self.controller = controller
        self.lock = threading.Lock()

    def _drive(self) -> None:
        if self.orch.sim is not None:
            self.orch.sim.run()

    def handle(self, method: str, path: str, body: bytes = b"") -> tuple[int, dict | list]:
        path = path.split("?", 1)[0].rstrip("/") or "/"
        with self.lock:
            try:
                return self._dispatch(method, path, body)
            except GatewayError as exc:
                code = next((c for t, c in _STATUS.items() if isinstance(exc, t)),
                            HTTPStatus.UNPROCESSABLE_ENTITY)
                return int(code), {"error": type(exc).__name__, "detail": str(exc)}

    def _request(self, body: bytes) -> PlanRequest:
        try:
            return PlanRequest.from_dict(json.loads(body or b"{}"))
        except (json.JSONDecodeError, AttributeError) as exc:
            raise InvalidPlanRequest(f"body is not a plan request: {exc}") from None

    def _dispatch(self, method: str, path: str, body: bytes):
        if path == PLAN_ROOT and method == "POST":
            uri = self.orch.plan_create(self._request(body))
            self._drive()  # execution proceeds after the URI is handed out
            return int(HTTPStatus.CREATED), {"uri": uri}
        if path == f"{PLAN_ROOT}/all" and method == "GET":
            return int(HTTPStatus.OK), [p.to_dict() for p in self.orch.plan_get_all()]
        m = _ITEM.match(path)
        if m:
            pid = int(m.group(1))
            if method == "GET":
                return int(HTTPStatus.OK), self.orch.plan_get(pid).to_dict()
            if method == "PUT":
                return int(HTTPStatus.OK), self.orch.plan_update(pid, self._request(body)).to_dict()
            if method == "DELETE":
                self.orch.plan_delete(pid)
                return int(HTTPStatus.OK), {"deleted": f"{PLAN_ROOT}/{pid}"}
        if path == "/Chain" and method == "GET" and self.controller is not None:
            return int(HTTPStatus.OK), self.controller.list_chains()
        return int(HTTPStatus.NOT_FOUND), {"error": "NoSuchResource", "detail": f"{method} {path}"}


def make_server(api: PlanApi, port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def _serve(self, method: str) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            code, payload = api.handle(method, self.path, body)
            data = json.dumps(payload, sort_keys=True).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._serve("GET")

        def do_POST(self):
            self._serve("POST")

        def do_PUT(self):
            self._serve("PUT")

        def do_DELETE(self):
            self._serve("DELETE")

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)
