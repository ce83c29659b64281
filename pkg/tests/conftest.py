import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from xaichain.data import FeatureCatalog, build_raw_tensor, generate_cohort, normalize_tensor
from xaichain.predictor import ModelSpec, TrainConfig, train

FIXTURES = Path(__file__).parent / "fixtures"

PLANTED_W8 = np.array([2.0, -1.75, 1.5, -1.25, 1.0, -0.75, 0.5, -0.25])


def planted_model(weights, bias=0.0, weeks=1, names=None):
    w = np.asarray(weights, dtype=float)
    nf = w.size // weeks
    return ModelSpec(weeks, nf, w, bias=bias, feature_names=list(names or [f"f{j}" for j in range(nf)]))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def small_cohort():
    """80 synthetic students over six weeks, normalized, with labels."""
    records = generate_cohort(80, 6, 5)
    catalog = FeatureCatalog.implemented()
    raw = build_raw_tensor(records, 6, catalog)
    tensor = normalize_tensor(raw, feature_names=catalog.names, student_ids=[r.student_id for r in records])
    labels = np.array([r.label for r in records])
    return records, tensor, labels


@pytest.fixture(scope="session")
def model6(small_cohort):
    _, tensor, labels = small_cohort
    return train(tensor, labels, TrainConfig(learning_rate=0.5, epochs=300))


@pytest.fixture(scope="session")
def pipeline_inputs(tmp_path_factory, small_cohort):
    """Five-week tensor and model written to disk for pipeline runs."""
    from dataclasses import replace

    _, tensor, labels = small_cohort
    t5 = replace(tensor, values=tensor.values[:, :5])
    model = train(t5, labels, TrainConfig(learning_rate=0.5, epochs=200))
    d = tmp_path_factory.mktemp("inputs")
    t5.save(d / "tensor.json")
    model.save(d / "model.json")
    return d


class StubServer:
    """Chat-completions stand-in; ``script`` is a list of (status, body) replies, last one repeats."""

    def __init__(self, script=None, delay=0.0):
        self.script = list(script or [(200, {"choices": [{"message": {"content": "stub reply"}}]})])
        self.delay = delay
        self.requests = []
        self.active = 0
        self.peak = 0
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.active += 1
                    outer.peak = max(outer.peak, outer.active)
                    idx = len(outer.requests)
                    outer.requests.append({"payload": payload, "headers": dict(self.headers)})
                    status, body = outer.script[min(idx, len(outer.script) - 1)]
                try:
                    if outer.delay:
                        threading.Event().wait(outer.delay)
                    data = body if isinstance(body, bytes) else json.dumps(body).encode()
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                finally:
                    with outer._lock:
                        outer.active -= 1

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def make(script=None, delay=0.0):
        s = StubServer(script, delay).__enter__()
        servers.append(s)
        return s

    yield make
    for s in servers:
        s.__exit__()
