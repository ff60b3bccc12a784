"""Discrete-time SIS epidemic dynamics and trajectory simulation.

The scalar model steps the infected proportion x according to

    x[k+1] = x[k] + (1 - x[k]) * beta * x[k] - gamma * x[k]

and the identifiers observe y[k] = x[k+1] - x[k]. Process noise is a
truncated Gaussian added to the state before clamping to [0, 1];
observation noise, when enabled, is added to the stored states before
the observations are formed, so y inherits both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SisParams:
    """True infection rate ``beta`` and recovery rate ``gamma``, both per step."""

    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1] for simulation, got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1] for simulation, got {self.gamma}")

    def reproduction_number(self) -> float:
        if self.gamma == 0.0:
            raise ValueError("reproduction number is undefined when gamma == 0")
        return self.beta / self.gamma

    def endemic_level(self) -> float:
        """Nonzero fixed point 1 - gamma/beta (may be negative when beta < gamma)."""
        if self.beta == 0.0:
            raise ValueError("endemic level is undefined when beta == 0")
        return 1.0 - self.gamma / self.beta

    def as_vector(self) -> np.ndarray:
        return np.array([self.beta, self.gamma])


def reproduction_number(params: SisParams) -> float:
    """beta / gamma; raises when gamma == 0."""
    return params.reproduction_number()


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian process/observation noise settings for a simulated trajectory.

    Process noise samples are redrawn until |xi| <= bound_nu, so the realized
    perturbation is bounded while staying zero mean.
    """

    process_std: float = 1e-3
    observation_std: float = 0.0
    bound_nu: float = 5e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.process_std < 0 or self.observation_std < 0 or self.bound_nu < 0:
            raise ValueError("noise magnitudes must be nonnegative")
        if self.process_std > 0 and self.bound_nu <= 0:
            raise ValueError("bound_nu must be positive when process_std > 0")


@dataclass(frozen=True)
class Trajectory:
    """States x[0..K], observations y[k] = x[k+1] - x[k], and realized process noise."""

    states: np.ndarray
    observations: np.ndarray
    process_noise: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "observations", np.asarray(self.observations, dtype=float))
        object.__setattr__(self, "process_noise", np.asarray(self.process_noise, dtype=float))
        if len(self.observations) != len(self.states) - 1:
            raise ValueError("observations must have one entry fewer than states")
        if len(self.process_noise) != len(self.observations):
            raise ValueError("process_noise must have one entry per observation")
        for name in ("states", "observations", "process_noise"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def step_count(self) -> int:
        return len(self.states) - 1

    def to_csv(self, path: str | Path) -> None:
        """Write step, state, observation, noise_applied rows (last row has state only)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "state", "observation", "noise_applied"])
            for k in range(self.step_count):
                writer.writerow(
                    [k, repr(float(self.states[k])), repr(float(self.observations[k])),
                     repr(float(self.process_noise[k]))]
                )
            writer.writerow([self.step_count, repr(float(self.states[-1])), "", ""])


def sis_step(x: float, params: SisParams) -> float:
    """One noise-free step of the scalar SIS recursion."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"state must lie in [0, 1], got {x}")
    return x + (1.0 - x) * params.beta * x - params.gamma * x


def _truncated_normal(rng: np.random.Generator, std: float, bound: float) -> float:
    if std == 0.0:
        return 0.0
    while True:
        sample = rng.normal(0.0, std)
        if abs(sample) <= bound:
            return float(sample)


def simulate(
    x0: float,
    params: SisParams,
    steps: int,
    noise: NoiseSpec | None = None,
) -> Trajectory:
    """Simulate ``steps`` transitions from ``x0``; deterministic for a fixed seed."""
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"x0 must lie in [0, 1], got {x0}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    rng = np.random.default_rng(noise.seed) if noise is not None else None
    true_states = np.empty(steps + 1)
    xi = np.zeros(steps)
    true_states[0] = x0
    for k in range(steps):
        x_next = sis_step(true_states[k], params)
        if noise is not None and noise.process_std > 0:
            xi[k] = _truncated_normal(rng, noise.process_std, noise.bound_nu)
            x_next = min(1.0, max(0.0, x_next + xi[k]))
        true_states[k + 1] = x_next

    states = true_states
    if noise is not None and noise.observation_std > 0:
        states = true_states + rng.normal(0.0, noise.observation_std, size=steps + 1)

    return Trajectory(
        states=states,
        observations=np.diff(states),
        process_noise=xi,
    )
