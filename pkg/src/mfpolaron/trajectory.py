"""Sampled trajectories shared by both solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Grid

# samples are uniform when spacings agree to this relative tolerance
_UNIFORM_RTOL = 1e-9


class BlowupError(RuntimeError):
    """Raised when a run produces nonfinite values or crosses the norm ceiling."""

    def __init__(self, message: str, t: float, eps: float | None = None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.eps = eps
        self.trajectory = trajectory


@dataclass
class Trajectory:
    """Sampled states of one run.

    ``fields`` maps a field name (``"U"`` or ``"u"``, ``"v"``, ``"w"``) to an
    array of shape ``(n_samples, n, n, n)``; ``series`` maps a diagnostic
    name to an array of length ``n_samples``.
    """

    grid: Grid
    times: np.ndarray
    fields: dict
    series: dict = field(default_factory=dict)
    dt: float = 0.0
    eps: float | None = None
    s: float = 2.0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def sample_step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def is_uniform(self) -> bool:
        if len(self.times) < 2:
            return True
        d = np.diff(self.times)
        return bool(np.all(np.abs(d - d[0]) <= _UNIFORM_RTOL * abs(d[0])))

    def at(self, index: int) -> dict:
        return {name: arr[index] for name, arr in self.fields.items()}


def step_count(T: float, dt: float) -> int:
    """Number of steps of size ``dt`` covering ``T``; rejects a non-integer ratio."""
    if T <= 0:
        raise ValueError(f"final time must be positive, got {T}")
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n
