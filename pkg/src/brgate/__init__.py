"""Bloch-Redfield dynamics of a qubit whose initial state is prepared by a gate acting on the correlated system-bath equilibrium."""
from .specs import BathSpec, ConfigError, ModelSpec, PulseSpec

__all__ = ["BathSpec", "ConfigError", "ModelSpec", "PulseSpec"]
