"""Immutable parameter records shared by every module."""
from __future__ import annotations

from dataclasses import dataclass, field
import math


class ConfigError(ValueError):
    """Raised when a parameter record violates its invariants."""


@dataclass(frozen=True)
class ModelSpec:
    """Qubit with H0 = -(delta/2) sz coupled through A = (g (sx cos phi + sy sin phi) + xi sz)/2.

    g = ``transverse`` is 1 for the usual spin-boson coupling; g = 0, xi = 2
    gives the pure-dephasing coupling A = sz.
    """

    delta: float = 1.0
    xi: float = 0.0
    phi: float = 0.0
    transverse: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError(f"delta must be positive and finite, got {self.delta!r}")
        for name in ("xi", "phi", "transverse"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")


@dataclass(frozen=True)
class BathSpec:
    """Bosonic bath with J(w) = 2 pi lambda2 w^s wc^(1-s) exp(-w/wc) for w > 0."""

    lambda2: float
    s: float = 1.0
    omega_c: float = 1.0
    temperature: float = 0.0

    def __post_init__(self):
        if not self.lambda2 >= 0:
            raise ConfigError(f"lambda2 must be >= 0, got {self.lambda2!r}")
        if not self.s > 0:
            raise ConfigError(f"s must be > 0, got {self.s!r}")
        if not self.omega_c > 0:
            raise ConfigError(f"omega_c must be > 0, got {self.omega_c!r}")
        if not self.temperature >= 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature!r}")
        for name in ("lambda2", "s", "omega_c", "temperature"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def beta(self) -> float:
        return math.inf if self.temperature == 0 else 1.0 / self.temperature

    def scaled(self, lambda2: float) -> "BathSpec":
        return BathSpec(lambda2, self.s, self.omega_c, self.temperature)


@dataclass(frozen=True)
class PulseSpec:
    """Rotation by ``theta`` about the axis (cos chi, sin chi, 0) applied over [tau_p1, tau_p2].

    ``fourier`` holds the shape coefficients a_1..a_n of the drive
    eps(t) = omega_p + sum_n a_n (n pi / tau_p) cos(n pi (t - tau_p1) / tau_p).
    A zero-width window means an instantaneous gate.
    """

    theta: float
    tau_p1: float = 0.0
    tau_p2: float = 0.0
    axis_phase: float = 0.0
    fourier: tuple | None = field(default=None)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.theta, self.tau_p1, self.tau_p2, self.axis_phase)):
            raise ConfigError("pulse parameters must be finite")
        if self.tau_p2 < self.tau_p1:
            raise ConfigError(f"tau_p2 ({self.tau_p2}) must be >= tau_p1 ({self.tau_p1})")
        if self.fourier is not None:
            coeffs = tuple(float(a) for a in self.fourier)
            if not all(math.isfinite(a) for a in coeffs):
                raise ConfigError("fourier coefficients must be finite")
            if self.duration == 0 and any(coeffs):
                raise ConfigError("a shaped pulse needs a finite window")
            object.__setattr__(self, "fourier", coeffs)

    @property
    def duration(self) -> float:
        return self.tau_p2 - self.tau_p1

    @property
    def instantaneous(self) -> bool:
        return self.duration == 0

    @property
    def omega_p(self) -> float:
        """Gate operating frequency theta / tau_p (infinite for an instantaneous gate)."""
        if self.instantaneous:
            return math.inf if self.theta != 0 else 0.0
        return self.theta / self.duration

    @property
    def shaped(self) -> bool:
        return self.fourier is not None and any(self.fourier)
