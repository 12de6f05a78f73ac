"""Shared fixtures for the test suite."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from src.action_space import enumerate_action_space, individual_action_space, make_agents
from src.agents import SimulatedBackend, default_profiles, uniform_profiles
from src.harness import synthetic_dataset

SCHEMA = ("A", "B", "C")


@pytest.fixture
def agents():
    return make_agents(["NoR", "OneR", "IRCoT"])


@pytest.fixture
def individual_space(agents):
    return individual_action_space(agents)


@pytest.fixture
def collaborative_space(agents):
    return enumerate_action_space(agents)


@pytest.fixture
def table_backend(agents):
    return SimulatedBackend(default_profiles(agents))


@pytest.fixture
def perfect_backend(agents):
    return SimulatedBackend(uniform_profiles(agents, SCHEMA, f1_mean=1.0))


@pytest.fixture
def small_dataset():
    return synthetic_dataset(12, SCHEMA, seed=0, prefix="train")


class _AnswerHandler(BaseHTTPRequestHandler):
    """Echoes the question back; `sleep`/`broken` paths alter the behaviour."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        if self.path == "/sleep":
            time.sleep(0.05)
        if self.path == "/broken":
            payload = b'{"text": "no answer field"}'
        elif self.path == "/upstream":
            payload = json.dumps({"answer": " | ".join(u["text"] for u in body["upstream"])}).encode()
        else:
            payload = json.dumps({"answer": body["question"]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, format, *args):
        pass


@pytest.fixture
def answer_server():
    """Base URL of an in-process JSON answering stub."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _AnswerHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
