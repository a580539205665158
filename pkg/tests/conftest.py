import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from hopeimb import LabeledDocument, Label, Split


def doc(text, label=Label.HOPE, i=0, split=Split.TRAIN):
    return LabeledDocument.from_text(f"d{i}", text, label, split)


class StubTranslationServer:
    """Scripted translation endpoint.

    ``script`` is a list of HTTP status codes returned in order before the
    server starts answering 200; ``delay`` holds each request open so the
    concurrency high-water mark can be observed.
    """

    def __init__(self, script=(), delay=0.0, body=None):
        self.script = list(script)
        self.delay = delay
        self.body = body
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with stub._lock:
                    stub.requests.append(payload)
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    status = stub.script.pop(0) if stub.script else 200
                try:
                    if stub.delay:
                        threading.Event().wait(stub.delay)
                    if status == 200:
                        data = stub.body if stub.body is not None else json.dumps(
                            {"translatedText": f"<{payload['target']}>{payload['q']}"}).encode()
                    else:
                        data = b'{"error": "scripted failure"}'
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # the client gave up (timeout tests)
                finally:
                    with stub._lock:
                        stub.in_flight -= 1

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/translate"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        if self.thread.is_alive():
            self.server.shutdown()
            self.server.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def make(**kw):
        s = StubTranslationServer(**kw)
        servers.append(s)
        return s

    yield make
    for s in servers:
        s.close()


_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if hasattr(item, "callspec"):
        doc += f" [{item.callspec.id}]"
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _criteria.append(f"{status}  {doc}")


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)
