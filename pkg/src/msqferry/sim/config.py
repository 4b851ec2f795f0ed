from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..queueing import Demands


class Mode(str, enum.Enum):
    QUEUE_ABSTRACTION = "QUEUE_ABSTRACTION"
    FERRY_TOKEN = "FERRY_TOKEN"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        norm = text.strip().upper()
        aliases = {"QUEUE": cls.QUEUE_ABSTRACTION, "FERRY": cls.FERRY_TOKEN}
        if norm in aliases:
            return aliases[norm]
        try:
            return cls(norm)
        except ValueError:
            raise ConfigError(f"unknown mode {text!r} (use queue or ferry)") from None


EVENT_TYPES = ("node_failure", "ferry_failure", "subdivide", "redivide")


@dataclass
class ScriptEvent:
    type: str
    target: int
    time: float

    def __post_init__(self):
        if self.type not in EVENT_TYPES:
            raise ConfigError(f"unknown event type {self.type!r}")
        self.target = int(self.target)
        self.time = float(self.time)


@dataclass
class SimConfig:
    demands: Demands
    rates: dict[int, float]
    mode: Mode = Mode.QUEUE_ABSTRACTION
    seed: int = 0
    horizon: float = 1000.0
    events: list[ScriptEvent] = field(default_factory=list)
    detect_F: int = 3
    T_mult: float = 3.0
    ferries_per_cycle: int = 1
    warmup: float = 0.0
    drain_margin: float = 0.0
    unified_rate: str = "optimize"  # or "inherit"
    idle_rate: float | None = None
    auto_redivide: bool = True
    redivide_delay: float = 1.0  # in turnarounds of the unified cycle
    weighting: str = "rate"

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode.parse(self.mode)
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.T_mult > 1:
            raise ConfigError("T_mult must exceed 1")
        if self.detect_F < 1:
            raise ConfigError("F must be at least 1")
        if self.ferries_per_cycle < 1:
            raise ConfigError("ferries_per_cycle must be at least 1")
        if self.unified_rate not in ("optimize", "inherit"):
            raise ConfigError("unified_rate must be 'optimize' or 'inherit'")
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError("warmup must lie in [0, horizon)")
        if self.drain_margin < 0:
            raise ConfigError("drain_margin must be non-negative")
        for ev in self.events:
            if not 0 <= ev.time <= self.horizon:
                raise ConfigError(f"event {ev} outside [0, horizon]")
