import numpy as np
import pytest

from src.events.index import SensorGeometry
from src.models.index import FlowConfig, PipelineConfig
from src.simulation.index import simulate_scene
from src.simulation.signals import tone
from tests.helpers import SCENE_RECOVERY, SCENE_SCENARIO, SCENE_SENSOR, random_stream


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_random_stream(rng):
    def make(n: int = 2000, width: int = 16, height: int = 16, t_span: int = 4000, seed=None):
        source = rng if seed is None else np.random.default_rng(seed)
        return random_stream(source, n, SensorGeometry(width, height), t_span)

    return make


@pytest.fixture(scope="session")
def tone_scene():
    """0.2 s of a 440 Hz tone rendered on the small scene; (stream, motion, audio)."""
    audio = tone(440.0, 0.2, 16_000.0, 1.0)
    stream, motion = simulate_scene(audio, SCENE_SCENARIO, SCENE_SENSOR)
    return stream, motion, audio


@pytest.fixture
def scene_config():
    def make(mode: str = "realtime") -> PipelineConfig:
        return PipelineConfig(
            mode=mode,
            scenario=SCENE_SCENARIO,
            sensor=SCENE_SENSOR,
            flow=FlowConfig(),
            recovery=SCENE_RECOVERY,
        )

    return make
