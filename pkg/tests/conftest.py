import sys

import pytest

from uqlb import protocol
from uqlb.models.server import ExampleModel

SERVER_CMD = (sys.executable, "-m", "uqlb.models.server")


@pytest.fixture
def example_server():
    srv = protocol.serve_model(ExampleModel(dim=2), port=0)
    yield srv
    srv.stop()


@pytest.fixture
def example_url(example_server):
    return f"http://127.0.0.1:{example_server.port}"
