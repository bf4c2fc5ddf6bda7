"""Exception taxonomy.

``ValueError``-derived faults are caller mistakes (CLI exit code 1);
``NumericalFault``-derived ones are runtime numerical failures (exit code 2).
"""

from __future__ import annotations


class DimensionError(ValueError):
    """Array shape incompatible with a declared contract."""


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


class DataFormatError(ValueError):
    """On-disk artifact is malformed, truncated or fails its checksum."""


class NumericalFault(RuntimeError):
    """A computation produced non-finite or otherwise unusable numbers."""


class SimulationBlowup(NumericalFault):
    """Integration left the finite range; carries the failing time."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class TrainingDiverged(NumericalFault):
    """Training loss became non-finite; carries epoch/batch indices."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class NonFiniteGradient(NumericalFault):
    """An optimizer step was rejected because a gradient was non-finite."""


class EstimationFailed(NumericalFault):
    """All restarts of an inverse estimation produced non-finite losses."""
