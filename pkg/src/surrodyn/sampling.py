"""Parameter domains and Latin hypercube sampling.

A domain is a product of per-dimension interval unions plus global bounds;
LHS stratifies each dimension's union by measure (strata proportional to
interval length) and places exactly one jittered sample per stratum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

Interval = tuple[float, float]


@dataclass(frozen=True)
class ParameterDomain:
    """Admissible intervals per dimension plus global (min, max) bounds."""

    intervals: tuple[tuple[Interval, ...], ...]
    global_bounds: tuple[Interval, ...] = field(default=())

    def __post_init__(self):
        if not self.intervals:
            raise ConfigError("domain needs at least one dimension")
        cleaned = []
        for dim, ivs in enumerate(self.intervals):
            if not ivs:
                raise ConfigError(f"dimension {dim} has no admissible interval")
            ivs = tuple(sorted((float(a), float(b)) for a, b in ivs))
            for a, b in ivs:
                if not (b > a):
                    raise ConfigError(f"empty interval [{a}, {b}] in dimension {dim}")
            for (a0, b0), (a1, b1) in zip(ivs[:-1], ivs[1:]):
                if a1 < b0:
                    raise ConfigError(
                        f"overlapping intervals in dimension {dim}: "
                        f"[{a0}, {b0}] and [{a1}, {b1}]"
                    )
            cleaned.append(ivs)
        object.__setattr__(self, "intervals", tuple(cleaned))
        if not self.global_bounds:
            object.__setattr__(
                self, "global_bounds",
                tuple((ivs[0][0], ivs[-1][1]) for ivs in self.intervals),
            )
        else:
            bounds = tuple((float(a), float(b)) for a, b in self.global_bounds)
            object.__setattr__(self, "global_bounds", bounds)
            for dim, (ivs, (lo, hi)) in enumerate(zip(self.intervals, bounds)):
                if ivs[0][0] < lo or ivs[-1][1] > hi:
                    raise ConfigError(
                        f"dimension {dim}: intervals exceed global bounds ({lo}, {hi})"
                    )

    @property
    def dim(self) -> int:
        return len(self.intervals)

    def measure(self, d: int) -> float:
        return sum(b - a for a, b in self.intervals[d])

    def contains(self, mu: np.ndarray) -> bool:
        mu = np.atleast_1d(mu)
        for d in range(self.dim):
            if not any(a - 1e-12 <= mu[d] <= b + 1e-12 for a, b in self.intervals[d]):
                return False
        return True

    def bounds_lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.global_bounds])

    def bounds_hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.global_bounds])


def _measure_to_value(u: float, intervals: tuple[Interval, ...]) -> float:
    """Map a coordinate in cumulative-measure space onto the interval union."""
    for a, b in intervals:
        width = b - a
        if u <= width:
            return a + u
        u -= width
    return intervals[-1][1]


def lhs_sample(n: int, domain: ParameterDomain, seed: int) -> np.ndarray:
    """n stratified samples, shape (n, dim); one sample per measure stratum."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    out = np.empty((n, domain.dim), dtype=np.float64)
    for d in range(domain.dim):
        total = domain.measure(d)
        width = total / n
        perm = rng.permutation(n)
        jitter = rng.uniform(0.0, 1.0, size=n)
        for i in range(n):
            u = (perm[i] + jitter[i]) * width
            out[i, d] = _measure_to_value(u, domain.intervals[d])
    return out


MU1_FULL: Interval = (10.0, 100.0)
MU2_FULL: Interval = (1.0, 10.0)

_TRAIN_INTERVALS = {
    "1a": (((10.0, 100.0),), ((1.0, 10.0),)),
    "1b": (((10.0, 40.0), (70.0, 100.0)), ((1.0, 4.0), (7.0, 10.0))),
    # central block complementary to 1b's corner blocks; the source figure is
    # not machine-readable so this stand-in is fixed here once and for all
    "1c": (((40.0, 70.0),), ((4.0, 7.0),)),
    "1d": (((25.0, 85.0),), ((2.5, 8.5),)),
}

CASE_IDS = tuple(sorted(_TRAIN_INTERVALS))


def case_domain(case_id: str, role: str) -> ParameterDomain:
    """Train/test (mu1, mu2) domains of the four oscillator cases."""
    if case_id not in _TRAIN_INTERVALS:
        raise ConfigError(f"unknown case {case_id!r}, expected one of {CASE_IDS}")
    if role not in ("train", "test"):
        raise ConfigError(f"role must be 'train' or 'test', got {role!r}")
    bounds = (MU1_FULL, MU2_FULL)
    if role == "test":
        return ParameterDomain(((MU1_FULL,), (MU2_FULL,)), bounds)
    return ParameterDomain(_TRAIN_INTERVALS[case_id], bounds)
