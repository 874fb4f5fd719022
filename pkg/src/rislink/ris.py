"""1-bit reconfigurable surface model.

Each surface element sits in one of two binary states. State 0 reflects
with zero phase by convention; state 1 adds a frequency-dependent phase
contrast that peaks at pi on resonance and rolls off as a Lorentzian
away from it. Magnitude is state-independent (ohmic/diode loss only).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RisConfig",
    "ElementResponseModel",
    "RisSurface",
    "reflection_coefficient",
    "element_reflections",
    "flip_element",
    "random_config",
]


@dataclass(frozen=True, eq=False)
class RisConfig:
    """Binary state vector of one surface; the optimizer's decision variable."""

    states: np.ndarray

    def __post_init__(self) -> None:
        states = np.ascontiguousarray(self.states, dtype=np.uint8)
        if states.ndim != 1 or states.size < 1:
            raise ValueError("states must be a non-empty 1-D vector")
        if not np.all(states <= 1):
            raise ValueError("states entries must be exactly 0 or 1")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def n_elements(self) -> int:
        return int(self.states.size)

    def bitstring(self) -> str:
        return "".join("1" if s else "0" for s in self.states)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RisConfig):
            return NotImplemented
        return np.array_equal(self.states, other.states)

    def __hash__(self) -> int:
        return hash(self.states.tobytes())


@dataclass(frozen=True)
class ElementResponseModel:
    """Frequency response of one binary element.

    The state-1 vs state-0 phase contrast is pi * L(f) with a Lorentzian
    L(f) = 1 / (1 + ((f - f0) / B)^2), so the contrast is exactly pi on
    resonance and pi/2 one half-width away.
    """

    resonance_freq_hz: float = 5.2e9
    bandwidth_hz: float = 150e6
    reflection_magnitude: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.reflection_magnitude <= 1.0:
            raise ValueError("reflection_magnitude must be in (0, 1]")
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth_hz must be positive")
        if self.resonance_freq_hz <= 0.0:
            raise ValueError("resonance_freq_hz must be positive")

    def phase_contrast(self, freq_hz: float) -> float:
        """State-1 minus state-0 reflection phase at ``freq_hz``, in radians."""
        x = (freq_hz - self.resonance_freq_hz) / self.bandwidth_hz
        return float(np.pi / (1.0 + x * x))


@dataclass(frozen=True)
class RisSurface:
    """A surface: element count plus the shared per-element response."""

    n_elements: int = 76
    response: ElementResponseModel = field(default_factory=ElementResponseModel)
    label: str = "ris"

    def __post_init__(self) -> None:
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")


def reflection_coefficient(model: ElementResponseModel, state: int, freq_hz: float) -> complex:
    """Complex reflection coefficient of one element in ``state`` at ``freq_hz``.

    State 0 returns rho * exp(j0); state 1 returns rho * exp(j * pi * L(f)).
    """
    if freq_hz <= 0.0:
        raise ValueError(f"freq_hz must be positive, got {freq_hz!r}")
    if state not in (0, 1):
        raise ValueError(f"state must be 0 or 1, got {state!r}")
    rho = model.reflection_magnitude
    if state == 0:
        return complex(rho, 0.0)
    return rho * complex(np.exp(1j * model.phase_contrast(freq_hz)))


def element_reflections(
    model: ElementResponseModel, states: np.ndarray, freq_hz: float
) -> np.ndarray:
    """Vectorized `reflection_coefficient` over a state vector."""
    if freq_hz <= 0.0:
        raise ValueError(f"freq_hz must be positive, got {freq_hz!r}")
    contrast = model.phase_contrast(freq_hz)
    return model.reflection_magnitude * np.exp(1j * contrast * np.asarray(states, dtype=float))


def flip_element(config: RisConfig, index: int) -> RisConfig:
    """New configuration with element ``index`` toggled. Involutive."""
    if not 0 <= index < config.n_elements:
        raise IndexError(f"element index {index} out of range [0, {config.n_elements})")
    states = config.states.copy()
    states[index] ^= 1
    return RisConfig(states)


def random_config(n_elements: int, seed: int) -> RisConfig:
    """Uniform random binary configuration, deterministic for a fixed seed."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    rng = np.random.default_rng(seed)
    return RisConfig(rng.integers(0, 2, size=n_elements, dtype=np.uint8))
