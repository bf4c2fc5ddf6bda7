"""Ground-truth dynamics: sine-sweep forcing and fixed-step RK4 integrators.

All functions are pure; simulations share nothing mutable and can run in
parallel workers.  The reported acceleration channel is re-evaluated from the
equation of motion at each output instant rather than differenced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels as K
from .errors import DimensionError, SimulationBlowup


@dataclass(frozen=True)
class SweepSpec:
    """Linear sine sweep f(t) = A sin(2 pi [f_low t + (f_up - f_low) t^2 / (2T)])."""

    amplitude: float = 5.0
    f_low: float = 1.0
    f_up: float = 10.0
    duration: float = 2.0

    def __post_init__(self):
        if not (self.f_up >= self.f_low > 0.0):
            raise ValueError(f"need f_up >= f_low > 0, got ({self.f_low}, {self.f_up})")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "f_low": self.f_low,
                "f_up": self.f_up, "duration": self.duration}


@dataclass(frozen=True)
class DuffingParams:
    """Stiffness, damping and cubic coefficients of x'' = -m1 x - m2 x' - m3 x^3 + f."""

    mu1: float
    mu2: float
    mu3: float

    def __post_init__(self):
        if self.mu1 <= 0.0:
            raise ValueError("stiffness mu1 must be positive")
        if self.mu2 < 0.0:
            raise ValueError("damping mu2 must be nonnegative")
        if not math.isfinite(self.mu3):
            raise ValueError("mu3 must be finite")


@dataclass(frozen=True)
class SimGrid:
    """Uniform output grid: r samples spaced dt, integrated with inner substeps."""

    dt: float = 0.01
    r: int = 200
    substeps: int = 10

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.r < 1:
            raise ValueError("sample count must be >= 1")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.r) * self.dt

    def to_dict(self) -> dict:
        return {"dt": self.dt, "r": self.r, "substeps": self.substeps}


def _check_grid(spec: SweepSpec, grid: SimGrid) -> None:
    if not math.isclose(grid.r * grid.dt, spec.duration, rel_tol=1e-9):
        raise ValueError(
            f"grid covers {grid.r * grid.dt} s but the sweep lasts {spec.duration} s"
        )


def sweep_force(spec: SweepSpec, t: float) -> float:
    """Sweep force at a single instant; t must lie within [0, duration]."""
    if not (0.0 <= t <= spec.duration):
        raise ValueError(f"t={t} outside the excitation window [0, {spec.duration}]")
    phase = 2.0 * math.pi * (
        spec.f_low * t + (spec.f_up - spec.f_low) * t * t / (2.0 * spec.duration)
    )
    return spec.amplitude * math.sin(phase)


def sweep_series(spec: SweepSpec, grid: SimGrid) -> np.ndarray:
    _check_grid(spec, grid)
    return K.sweep_values(grid.times, spec.amplitude, spec.f_low, spec.f_up,
                          spec.duration)


@dataclass(frozen=True)
class SdofResponse:
    """Displacement, velocity and acceleration series on the output grid."""

    x: np.ndarray
    v: np.ndarray
    a: np.ndarray


def simulate_duffing(params: DuffingParams, spec: SweepSpec, grid: SimGrid) -> SdofResponse:
    """Integrate the forced cubic oscillator from rest (x(0) = x'(0) = 0)."""
    _check_grid(spec, grid)
    x, v, a, status, t_fail = K.duffing_rk4(
        params.mu1, params.mu2, params.mu3,
        spec.amplitude, spec.f_low, spec.f_up, spec.duration,
        grid.dt, grid.r, grid.substeps,
    )
    if status != 0:
        raise SimulationBlowup(
            f"state became non-finite at t={t_fail:.6g} s for mu="
            f"({params.mu1}, {params.mu2}, {params.mu3})",
            time=t_fail,
        )
    return SdofResponse(x=x, v=v, a=a)


@dataclass(frozen=True)
class MdofResponse:
    """Per-channel displacement, velocity and acceleration, shaped (2, r)."""

    x: np.ndarray
    v: np.ndarray
    a: np.ndarray


DEFAULT_2DOF_MASS = np.diag([1.0, 1.0])
DEFAULT_2DOF_STIFFNESS = np.array([[200.0, -100.0], [-100.0, 100.0]])
DEFAULT_2DOF_DAMPING = 0.05 * DEFAULT_2DOF_STIFFNESS


def simulate_linear_2dof(
    mass: np.ndarray,
    stiffness: np.ndarray,
    damping: np.ndarray,
    spec: SweepSpec,
    grid: SimGrid,
    load: np.ndarray | None = None,
) -> MdofResponse:
    """Integrate M x'' + C x' + K x = load f(t) from rest; two acceleration channels."""
    _check_grid(spec, grid)
    mass = np.asarray(mass, dtype=np.float64)
    stiffness = np.ascontiguousarray(stiffness, dtype=np.float64)
    damping = np.ascontiguousarray(damping, dtype=np.float64)
    if mass.shape != (2, 2) or stiffness.shape != (2, 2) or damping.shape != (2, 2):
        raise DimensionError("mass, stiffness and damping must all be 2x2")
    if abs(np.linalg.det(mass)) < 1e-12:
        raise ValueError("mass matrix is singular")
    minv = np.ascontiguousarray(np.linalg.inv(mass))
    if load is None:
        load = np.array([1.0, 0.0])
    load = np.ascontiguousarray(load, dtype=np.float64)
    if load.shape != (2,):
        raise DimensionError("load pattern must be a 2-vector")
    a, x, v, status, t_fail = K.lin2dof_rk4(
        minv, stiffness, damping, load,
        spec.amplitude, spec.f_low, spec.f_up, spec.duration,
        grid.dt, grid.r, grid.substeps,
    )
    if status != 0:
        raise SimulationBlowup(
            f"2-DOF state became non-finite at t={t_fail:.6g} s", time=t_fail
        )
    return MdofResponse(x=x, v=v, a=a)
