import pytest

from exobench.config import ControllerConfig, ParticipantConfig, SessionConfig
from exobench.plant import PlantParams
from exobench.protocol import Plane, ProtocolConfig
from exobench.stats import TestResult
from exobench.synthetic import generate_session

TestResult.__test__ = False  # dataclass, not a pytest class


def tiny_session_config() -> SessionConfig:
    """Two-participant reduced protocol, small enough for unit tests."""
    return SessionConfig(
        participants=(
            ParticipantConfig(id="p01", body_mass_kg=70.0),
            ParticipantConfig(id="p02", body_mass_kg=58.0, handedness="left"),
        ),
        plant=PlantParams(),
        controller=ControllerConfig(),
        protocol=ProtocolConfig(
            versions=("v1", "v2"),
            static_planes=(Plane.ABDUCTION,),
            dynamic_planes=(Plane.ABDUCTION,),
            dynamic_reps=2,
            static_cap_s=90.0,
        ),
    )


TINY_SEED = 7


@pytest.fixture(scope="session")
def tiny_session(tmp_path_factory):
    """One generated session directory shared by the offline-analysis tests."""
    root = tmp_path_factory.mktemp("tiny-session")
    generate_session(root, tiny_session_config(), seed=TINY_SEED)
    return root
