"""A local stand-in for a remote completion / fine-tuning service."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

TOKEN = "test-secret"


class FakeService:
    def __init__(self, completion: str = " 0.00100: (a)\n0.00300: (b)\nEND", piece: int = 5):
        self.completion = completion
        self.piece = piece
        self.requests: list[tuple[str, str, object]] = []
        self.job_polls: dict[str, int] = {}
        self.files = 0
        self.jobs = 0
        self.fail_jobs = False
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _auth(self) -> bool:
                if self.headers.get("Authorization") != f"Bearer {TOKEN}":
                    self._json(401, {"error": "bad key"})
                    return False
                return True

            def _json(self, code, obj):
                body = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                if not self._auth():
                    return
                if self.path.endswith("/completions"):
                    req = json.loads(raw)
                    service.requests.append(("POST", self.path, req))
                    return service._complete(self, req)
                if self.path.endswith("/files"):
                    service.files += 1
                    service.requests.append(("POST", self.path, raw))
                    return self._json(200, {"id": f"file-{service.files}"})
                if self.path.endswith("/fine-tunes"):
                    req = json.loads(raw)
                    service.jobs += 1
                    service.requests.append(("POST", self.path, req))
                    return self._json(200, {"id": f"ft-{service.jobs}", "status": "pending"})
                self._json(404, {"error": "no route"})

            def do_GET(self):
                if not self._auth():
                    return
                job = self.path.rsplit("/", 1)[-1]
                polls = service.job_polls.get(job, 0) + 1
                service.job_polls[job] = polls
                if service.fail_jobs:
                    return self._json(200, {"id": job, "status": "failed"})
                if polls < 2:
                    return self._json(200, {"id": job, "status": "running"})
                self._json(200, {"id": job, "status": "succeeded", "fine_tuned_model": f"snapshot-of-{job}"})

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def _complete(self, h: BaseHTTPRequestHandler, req: dict) -> None:
        text = self.completion
        finish = "stop"
        limit = req["max_tokens"] * 4
        if len(text) > limit:
            text, finish = text[:limit], "length"
        if not req.get("stream"):
            return h._json(200, {"choices": [{"text": text, "finish_reason": finish}]})
        h.send_response(200)
        h.send_header("Content-Type", "text/event-stream")
        h.end_headers()
        pieces = [text[i:i + self.piece] for i in range(0, len(text), self.piece)]
        for k, p in enumerate(pieces):
            reason = finish if k == len(pieces) - 1 else None
            event = {"choices": [{"text": p, "finish_reason": reason}]}
            h.wfile.write(f"data: {json.dumps(event)}\n\n".encode())
            h.wfile.flush()
        h.wfile.write(b"data: [DONE]\n\n")
        h.wfile.flush()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
