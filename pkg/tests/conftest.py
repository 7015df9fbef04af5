import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from carbonledger import CarbonFootprint, EmissionFactor
from config import InferenceConfig
from corpus import Corpus, Example, save_csv
from energymeter import EnergyReading, Provider
from evalmetrics import CLASS_ORDER, ClassMetrics, Label, MetricsReport
from runner import BenchmarkRun

FIXTURES = Path(__file__).parent / "fixtures"

VOCABULARY = {
    Label.POSITIVE: ["gain", "surge", "profit", "growth", "beat", "upgrade", "rally", "record", "strong", "boost"],
    Label.NEGATIVE: ["loss", "plunge", "deficit", "slump", "miss", "downgrade", "selloff", "weak", "cut", "layoff"],
    Label.NEUTRAL: ["meeting", "scheduled", "filed", "agenda", "notice", "statement", "calendar", "minutes", "listing", "registry"],
}
FILLER = ["the", "company", "shares", "today", "market", "said"]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_separable_corpus(n: int = 300, seed: int = 11) -> Corpus:
    """Three classes with disjoint keyword vocabularies plus shared filler words."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        label = CLASS_ORDER[i % 3]
        words = list(rng.choice(VOCABULARY[label], size=4, replace=False)) + list(rng.choice(FILLER, size=2))
        rng.shuffle(words)
        examples.append(Example(text=" ".join(str(w) for w in words), label=label))
    return Corpus(examples=tuple(examples), source_path="<separable>")


@pytest.fixture(scope="session")
def separable_corpus() -> Corpus:
    return make_separable_corpus()


@pytest.fixture
def separable_csv(tmp_path, separable_corpus) -> Path:
    path = tmp_path / "separable.csv"
    save_csv(separable_corpus, path)
    return path


@pytest.fixture
def factor_file(tmp_path) -> Path:
    path = tmp_path / "factors.csv"
    path.write_text(
        "# Test factors\n"
        "region,gco2_per_kwh,scope\n"
        "test-grid,400,scope2\n",
        encoding="utf-8",
    )
    return path


def make_run(
    model_name: str = "Phi 3.2",
    per_inference_kg: float = 0.012,
    scores=(0.97, 0.82, 0.88, 0.82),
    corpus_id: str = "fixture-corpus",
    subset_size: int = 100,
    subset_seed=7,
) -> BenchmarkRun:
    """A run with chosen headline numbers, consistent with the carbon formula at 400 g/kWh."""
    precision, recall, f1, accuracy = scores
    factor = EmissionFactor("test-grid", 400)
    kg = per_inference_kg * subset_size
    energy = EnergyReading.from_joules(kg * 1000 / 400 * 3.6e6, Provider.CONSTANT_POWER, 60_000)
    return BenchmarkRun(
        runner="mock",
        config=InferenceConfig(model_name=model_name),
        corpus_id=corpus_id,
        corpus_size=5842,
        subset_size=subset_size,
        subset_seed=subset_seed,
        n_inferences=subset_size,
        confusion=((subset_size, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)),
        metrics=MetricsReport(
            per_class={label.value: ClassMetrics(precision, recall, f1) for label in CLASS_ORDER},
            macro_precision=precision,
            macro_recall=recall,
            macro_f1=f1,
            accuracy=accuracy,
        ),
        energy=energy,
        energy_provider="constant-power:28.0W",
        carbon=CarbonFootprint(kg_co2e=kg, energy_kwh=energy.kwh, factor=factor, per_inference_kg=per_inference_kg),
        latency_ms_per_inference=600.0,
        wall_clock_start="2023-11-14T22:13:20.000+00:00",
        wall_clock_end="2023-11-14T22:14:20.000+00:00",
        unknown_count=0,
        generation_failures=0,
        beam_size_honored=False,
    )


@pytest.fixture
def run_factory():
    return make_run


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        server = self.server
        with server.lock:
            server.requests.append({"path": self.path, "headers": dict(self.headers), "body": json.loads(raw)})
            if len(server.responses) > 1:
                status, body = server.responses.pop(0)
            else:
                status, body = server.responses[0]
        payload = body if isinstance(body, bytes) else json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, format, *args):
        pass


class StubServer:
    """Local generate endpoint. Responses are served in order; the last one repeats."""

    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self.httpd.lock = threading.Lock()
        self.httpd.requests = []
        self.httpd.responses = [(200, {"response": "Neutral: factual.", "eval_count": 5, "eval_duration": 1000000})]
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def requests(self):
        return self.httpd.requests

    def respond_with(self, *responses):
        with self.httpd.lock:
            self.httpd.responses = list(responses)


@pytest.fixture
def stub_server():
    server = StubServer()
    server.thread.start()
    yield server
    server.httpd.shutdown()
    server.httpd.server_close()


@pytest.fixture
def unreachable_url() -> str:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    return f"http://127.0.0.1:{port}"


@pytest.fixture(scope="session")
def numbered_corpus() -> Corpus:
    """5842 rows whose text carries the row index."""
    examples = tuple(Example(text=f"row {i}", label=CLASS_ORDER[i % 3]) for i in range(5842))
    return Corpus(examples=examples, source_path="<numbered>")
