"""Suite-wide guards: the tests must run with zero network access."""

from __future__ import annotations

import socket
import time

import pytest

SESSION_START = time.monotonic()
_ORIGINAL_CONNECT = socket.socket.connect


def pytest_collection_modifyitems(items):
    # acceptance checks run last so their whole-suite timing check is real
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


@pytest.fixture(autouse=True, scope="session")
def no_network():
    """Fail loudly if anything tries to open an outbound connection."""

    def guarded_connect(self, address):
        raise RuntimeError(f"network access attempted: {address!r}")

    original = socket.socket.connect
    socket.socket.connect = guarded_connect
    try:
        yield
    finally:
        socket.socket.connect = original


@pytest.fixture(scope="session")
def session_start() -> float:
    return SESSION_START


@pytest.fixture
def live_network():
    """Restore real sockets for the opt-in live smoke test only."""
    guarded = socket.socket.connect
    socket.socket.connect = _ORIGINAL_CONNECT
    try:
        yield
    finally:
        socket.socket.connect = guarded
