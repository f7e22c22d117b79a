from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from weavekit import HardwareProfile, StateStore, WeaveService, default_registry
from stub_backend import StubBackendServer

DATA_DIR = Path(__file__).parent / "data"

# A40-class card: the high-tier reference profile.
PROFILE_A40 = HardwareProfile(accel_mem_mb=46068, host_mem_mb=65536, disk_free_mb=200000)
PROFILE_LOW = HardwareProfile(accel_mem_mb=4096, host_mem_mb=8192, disk_free_mb=50000)
PROFILE_MID = HardwareProfile(accel_mem_mb=16384, host_mem_mb=32768, disk_free_mb=100000)
PROFILE_CPU = HardwareProfile(accel_mem_mb=0, host_mem_mb=8192, disk_free_mb=10000)


@pytest.fixture
def profile_a40():
    return PROFILE_A40


@pytest.fixture
def profile_low():
    return PROFILE_LOW


@pytest.fixture
def store(tmp_path):
    return StateStore(tmp_path / "cache")


@pytest.fixture
def mem_store():
    return StateStore()


@pytest.fixture
def registry():
    return default_registry("local")


@pytest.fixture
def corpus_texts() -> list[str]:
    text = (DATA_DIR / "corpus.abc").read_text(encoding="utf-8")
    return [chunk.strip() for chunk in text.split("\n\n") if chunk.strip()]


@pytest.fixture
def make_service(tmp_path):
    """Factory for services with an injected profile and isolated cache."""

    def factory(mode="local", profile=PROFILE_A40, cache_name="cache", **kwargs):
        return WeaveService(
            mode=mode,
            profile=profile,
            cache_dir=tmp_path / cache_name,
            **kwargs,
        )

    return factory


@pytest.fixture
def stub_server():
    server = StubBackendServer()
    server.start()
    yield server
    server.stop()
