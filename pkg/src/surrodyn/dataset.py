"""Dataset assembly and bit-exact persistence.

A dataset directory holds manifest.json plus data.bin (little-endian float64).
Per-sample binary layout: r force values, dim(mu) parameter values, then c*r
response values row-major by channel.  The manifest carries a CRC-64 of the
binary so truncation and corruption are rejected at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import DuffingParams, SimGrid, SweepSpec, simulate_duffing, sweep_series
from .errors import DataFormatError, DimensionError
from .sampling import ParameterDomain, case_domain, lhs_sample

FORMAT_TAG = "surrodyn-dataset-v1"

# CRC-64/XZ (reflected, poly 0x42F0E1EBA9EA3693)
_CRC64_POLY_REFLECTED = 0xC96C5795D7870F42
_CRC64_TABLE: list[int] = []
for _byte in range(256):
    _crc = _byte
    for _ in range(8):
        _crc = (_crc >> 1) ^ (_CRC64_POLY_REFLECTED if _crc & 1 else 0)
    _CRC64_TABLE.append(_crc)


def crc64(data: bytes) -> int:
    crc = 0xFFFFFFFFFFFFFFFF
    for b in data:
        crc = (crc >> 8) ^ _CRC64_TABLE[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ExcitationSignal:
    values: np.ndarray  # (r,)
    dt: float


@dataclass(frozen=True)
class ResponseSignal:
    values: np.ndarray  # (c, r)
    dt: float


@dataclass(frozen=True)
class SampleTriple:
    force: ExcitationSignal
    mu: np.ndarray
    response: ResponseSignal


@dataclass(frozen=True)
class Normalization:
    """Affine map of mu to [0,1] per dimension plus per-channel response scale."""

    mu_lo: np.ndarray
    mu_hi: np.ndarray
    response_scale: np.ndarray

    def normalize_mu(self, mu: np.ndarray) -> np.ndarray:
        return (mu - self.mu_lo) / (self.mu_hi - self.mu_lo)

    def denormalize_mu(self, z: np.ndarray) -> np.ndarray:
        return z * (self.mu_hi - self.mu_lo) + self.mu_lo

    def normalize_response(self, y: np.ndarray) -> np.ndarray:
        return y / self.response_scale[:, None]

    def denormalize_response(self, y: np.ndarray) -> np.ndarray:
        return y * self.response_scale[:, None]

    def to_dict(self) -> dict:
        return {
            "mu_lo": self.mu_lo.tolist(),
            "mu_hi": self.mu_hi.tolist(),
            "response_scale": self.response_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(
            mu_lo=np.array(d["mu_lo"], dtype=np.float64),
            mu_hi=np.array(d["mu_hi"], dtype=np.float64),
            response_scale=np.array(d["response_scale"], dtype=np.float64),
        )


class Dataset:
    """Columnar (f, mu, y) triples plus case metadata and normalization."""

    def __init__(self, case_id, role, seed, sweep: SweepSpec, grid: SimGrid, mu3,
                 forces, mus, responses, normalization: Normalization):
        forces = np.asarray(forces, dtype=np.float64)
        mus = np.asarray(mus, dtype=np.float64)
        responses = np.asarray(responses, dtype=np.float64)
        if forces.ndim != 2 or mus.ndim != 2 or responses.ndim != 3:
            raise DimensionError("forces (n,r), mus (n,d), responses (n,c,r) expected")
        if not (forces.shape[0] == mus.shape[0] == responses.shape[0]):
            raise DimensionError("sample counts disagree across columns")
        if forces.shape[1] != responses.shape[2] or forces.shape[1] != grid.r:
            raise DimensionError("force and response must share the grid length")
        if not (np.isfinite(forces).all() and np.isfinite(mus).all()
                and np.isfinite(responses).all()):
            raise ValueError("dataset contains non-finite values")
        self.case_id = case_id
        self.role = role
        self.seed = seed
        self.sweep = sweep
        self.grid = grid
        self.mu3 = mu3
        self.forces = forces
        self.mus = mus
        self.responses = responses
        self.normalization = normalization

    @property
    def n(self) -> int:
        return self.forces.shape[0]

    @property
    def r(self) -> int:
        return self.forces.shape[1]

    @property
    def channels(self) -> int:
        return self.responses.shape[1]

    @property
    def dim_mu(self) -> int:
        return self.mus.shape[1]

    @property
    def t_grid(self) -> np.ndarray:
        return self.grid.times

    @property
    def mu_normalized(self) -> np.ndarray:
        return self.normalization.normalize_mu(self.mus)

    @property
    def responses_flat(self) -> np.ndarray:
        """(n, c*r) view used by the training loss."""
        return self.responses.reshape(self.n, -1)

    def triples(self):
        for i in range(self.n):
            yield SampleTriple(
                force=ExcitationSignal(self.forces[i], self.grid.dt),
                mu=self.mus[i],
                response=ResponseSignal(self.responses[i], self.grid.dt),
            )

    def manifest(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "case_id": self.case_id,
            "role": self.role,
            "n": self.n,
            "r": self.r,
            "c": self.channels,
            "dim_mu": self.dim_mu,
            "seed": self.seed,
            "sweep": self.sweep.to_dict(),
            "grid": self.grid.to_dict(),
            "mu3": self.mu3,
            "normalization": self.normalization.to_dict(),
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        per_sample = np.concatenate(
            [self.forces, self.mus, self.responses_flat], axis=1
        )
        payload = per_sample.astype("<f8").tobytes()
        manifest = self.manifest()
        manifest["crc64"] = f"{crc64(payload):016x}"
        (path / "data.bin").write_bytes(payload)
        (path / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        try:
            manifest = json.loads((path / "manifest.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"cannot read dataset manifest: {exc}") from exc
        if manifest.get("format") != FORMAT_TAG:
            raise DataFormatError(f"unexpected dataset format {manifest.get('format')!r}")
        payload = (path / "data.bin").read_bytes()
        checksum = f"{crc64(payload):016x}"
        if checksum != manifest["crc64"]:
            raise DataFormatError(
                f"checksum mismatch: manifest {manifest['crc64']}, data {checksum}"
            )
        n, r, c, d = manifest["n"], manifest["r"], manifest["c"], manifest["dim_mu"]
        row = r + d + c * r
        expected = n * row * 8
        if len(payload) != expected:
            raise DataFormatError(
                f"data.bin holds {len(payload)} bytes, manifest implies {expected}"
            )
        table = np.frombuffer(payload, dtype="<f8").reshape(n, row)
        return cls(
            case_id=manifest["case_id"],
            role=manifest["role"],
            seed=manifest["seed"],
            sweep=SweepSpec(**manifest["sweep"]),
            grid=SimGrid(**manifest["grid"]),
            mu3=manifest["mu3"],
            forces=table[:, :r].copy(),
            mus=table[:, r:r + d].copy(),
            responses=table[:, r + d:].reshape(n, c, r).copy(),
            normalization=Normalization.from_dict(manifest["normalization"]),
        )


def default_normalization(domain: ParameterDomain, channels: int = 1) -> Normalization:
    """Mu mapped affinely to [0,1] from global bounds; responses left unscaled."""
    return Normalization(
        mu_lo=domain.bounds_lo(),
        mu_hi=domain.bounds_hi(),
        response_scale=np.ones(channels),
    )


def generate_dataset(
    case_id: str,
    role: str,
    n: int,
    sweep: SweepSpec | None = None,
    grid: SimGrid | None = None,
    mu3: float = 1e4,
    seed: int = 0,
) -> Dataset:
    """Sample the case domain by LHS and simulate each oscillator response."""
    if n < 1:
        raise ValueError("need at least one sample")
    sweep = sweep or SweepSpec()
    grid = grid or SimGrid()
    domain = case_domain(case_id, role)
    mus = lhs_sample(n, domain, seed)
    force = sweep_series(sweep, grid)
    forces = np.tile(force, (n, 1))
    responses = np.empty((n, 1, grid.r), dtype=np.float64)
    for i in range(n):
        params = DuffingParams(mu1=mus[i, 0], mu2=mus[i, 1], mu3=mu3)
        responses[i, 0] = simulate_duffing(params, sweep, grid).a
    return Dataset(
        case_id=case_id,
        role=role,
        seed=seed,
        sweep=sweep,
        grid=grid,
        mu3=mu3,
        forces=forces,
        mus=mus,
        responses=responses,
        normalization=default_normalization(domain),
    )


def save_dataset(ds: Dataset, path: str | Path) -> None:
    ds.save(path)


def load_dataset(path: str | Path) -> Dataset:
    return Dataset.load(path)
