"""Timing and servo parameters shared by the analytic model and the simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

SERVO_KINDS = ("single_integrator", "double_integrator")


@dataclass(frozen=True)
class ClockSchedule:
    """Ramsey time and dead time of one interrogation cycle (seconds)."""

    t_ramsey: float
    t_dead: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.t_ramsey) and self.t_ramsey > 0):
            raise DomainError(f"Ramsey time must be positive, got {self.t_ramsey}")
        if not (math.isfinite(self.t_dead) and self.t_dead >= 0):
            raise DomainError(f"dead time must be >= 0, got {self.t_dead}")

    @property
    def t_cycle(self) -> float:
        return self.t_ramsey + self.t_dead

    @property
    def duty(self) -> float:
        return self.t_ramsey / self.t_cycle


@dataclass(frozen=True)
class ServoConfig:
    """Integrator gains of the frequency lock.

    ``g2`` defaults to g/10; the only firm requirement is g2 << g, enforced
    as g2 <= g/4.
    """

    g: float = 0.4
    g2: float = 0.04
    servo_kind: str = "double_integrator"

    def __post_init__(self):
        if not (0 < self.g < 2):
            raise DomainError(f"gain g must lie in (0, 2), got {self.g}")
        if not (0 <= self.g2 <= self.g / 4):
            raise DomainError(f"secondary gain must satisfy 0 <= g2 <= g/4, got {self.g2}")
        if self.servo_kind not in SERVO_KINDS:
            raise DomainError(f"servo_kind must be one of {SERVO_KINDS}, got {self.servo_kind!r}")
