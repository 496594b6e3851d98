import json
import sys
import threading
import time
from importlib import resources
from pathlib import Path

import pytest
import uvicorn

from feedstack.catalog import default_catalog
from feedstack.config import ServiceConfig
from feedstack.service import create_app

sys.path.insert(0, str(Path(__file__).parent))  # for the oracle module


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return Path(str(resources.files("feedstack.data").joinpath("fixture_transcript.json")))


@pytest.fixture(scope="session")
def fixture_turns(fixture_path) -> list[tuple[str, str]]:
    data = json.loads(fixture_path.read_text(encoding="utf-8"))
    return [(m["role"], m["text"]) for m in data["messages"]]


class ServerHandle:
    def __init__(self, url: str, storage_dir: Path):
        self.url = url
        self.storage_dir = storage_dir


@pytest.fixture(scope="session")
def live_server(tmp_path_factory) -> ServerHandle:
    """A real stub-gateway service on an ephemeral port, shared per test run."""
    storage = tmp_path_factory.mktemp("served")
    app = create_app(ServiceConfig(storage_dir=str(storage)))
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("test server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    handle = ServerHandle(url=f"http://127.0.0.1:{port}", storage_dir=storage)
    yield handle
    server.should_exit = True
    thread.join(timeout=10)


def wait_settled(client, base_url: str, session_id: str, want_messages: int, timeout=30.0):
    """Poll until the session has the messages and no pending background work."""
    deadline = time.monotonic() + timeout
    while True:
        snapshot = client.get(f"{base_url}/v1/sessions/{session_id}").json()
        if len(snapshot["messages"]) >= want_messages and snapshot["pending_jobs"] == 0:
            return snapshot
        if time.monotonic() > deadline:
            raise TimeoutError(
                f"session stuck at {len(snapshot['messages'])} messages, "
                f"{snapshot['pending_jobs']} jobs pending"
            )
        time.sleep(0.02)
