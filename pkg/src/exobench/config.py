"""Session configuration: TOML file with plant, controller, protocol, and
participant sections.

Unknown keys are rejected rather than ignored so config typos fail loudly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .plant import PlantParams
from .protocol import InvalidConfig, Plane, ProtocolConfig


@dataclass(frozen=True, slots=True)
class ParticipantConfig:
    id: str
    body_mass_kg: float
    handedness: str = "right"

    def __post_init__(self):
        if not self.body_mass_kg > 0:
            raise InvalidConfig(f"body mass must be positive, got {self.body_mass_kg}")
        if self.handedness not in ("right", "left"):
            raise InvalidConfig(f"handedness must be right/left, got {self.handedness!r}")


@dataclass(frozen=True, slots=True)
class ControllerConfig:
    band_kpa: float = 2.0
    tick_rate_hz: float = 200.0
    p_max_kpa: float = 70.0
    fault_margin_kpa: float = 3.0

    def __post_init__(self):
        if not self.band_kpa > 0:
            raise InvalidConfig("hysteresis band must be positive")
        if not self.tick_rate_hz > 0:
            raise InvalidConfig("tick rate must be positive")


@dataclass(frozen=True)
class SessionConfig:
    participants: tuple[ParticipantConfig, ...]
    plant: PlantParams
    controller: ControllerConfig
    protocol: ProtocolConfig

    def __post_init__(self):
        if not self.participants:
            raise InvalidConfig("at least one participant required")
        ids = [p.id for p in self.participants]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("duplicate participant ids")


def _build(cls, section: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise InvalidConfig(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad [{where}] section: {exc}") from exc


def _build_protocol(section: dict) -> ProtocolConfig:
    section = dict(section)
    for key in ("static_planes", "dynamic_planes"):
        if key in section:
            try:
                section[key] = tuple(Plane(p) for p in section[key])
            except ValueError as exc:
                raise InvalidConfig(f"bad plane in {key}: {exc}") from exc
    if "versions" in section:
        section["versions"] = tuple(section["versions"])
    return _build(ProtocolConfig, section, "protocol")


def parse_config(doc: dict) -> SessionConfig:
    known_sections = {"plant", "controller", "protocol", "participants"}
    unknown = set(doc) - known_sections
    if unknown:
        raise InvalidConfig(f"unknown config sections: {sorted(unknown)}")
    raw_participants = doc.get("participants", [])
    if not isinstance(raw_participants, list):
        raise InvalidConfig("participants must be an array of tables")
    participants = tuple(
        _build(ParticipantConfig, p, "participants") for p in raw_participants
    )
    return SessionConfig(
        participants=participants,
        plant=_build(PlantParams, doc.get("plant", {}), "plant"),
        controller=_build(ControllerConfig, doc.get("controller", {}), "controller"),
        protocol=_build_protocol(doc.get("protocol", {})),
    )


def load_config(path: str | Path) -> SessionConfig:
    with open(path, "rb") as fh:
        return parse_config(tomllib.load(fh))
