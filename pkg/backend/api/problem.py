"""Synthetic sparse-recovery instances: y = A x + e with a real-DFT sensing matrix."""

from __future__ import annotations

import hashlib
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import numerics
from rng import child_stream

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"UNRLDSET"
DATASET_VERSION = 1
# n_x, n_y, rho, noise_std, master_seed, m, role code
_CONFIG_BLOCK = struct.Struct("<IIddQIB")
_ROLES = ("train", "test")


@dataclass(frozen=True)
class ProblemConfig:
    n_x: int = 64
    n_y: int = 32
    rho: float = 0.15
    noise_std: float = 0.1
    master_seed: int = 0

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("n_x and n_y must be positive")
        if self.n_y >= self.n_x:
            raise ValueError(f"n_y must be smaller than n_x (got n_y={self.n_y}, n_x={self.n_x})")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.sparsity < 1:
            raise ValueError("floor(rho * n_x) must be at least 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def sparsity(self) -> int:
        return int(math.floor(self.rho * self.n_x))

    @property
    def noise_half_width(self) -> float:
        # uniform on [-a, a] has standard deviation a / sqrt(3)
        return self.noise_std * math.sqrt(3.0)

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        return cls(**data)


@dataclass(frozen=True)
class SensingMatrix:
    A: np.ndarray
    row_indices: tuple[int, ...]
    scale: float

    @property
    def gram(self) -> np.ndarray:
        return self.A.T @ self.A

    def fingerprint(self, config: ProblemConfig) -> str:
        digest = hashlib.sha256()
        digest.update(repr((config.n_x, config.n_y, config.rho, config.noise_std, config.master_seed)).encode())
        digest.update(np.ascontiguousarray(self.A, dtype="<f8").tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class Dataset:
    xs: np.ndarray  # (m, n_x)
    ys: np.ndarray  # (m, n_y)
    config_fingerprint: str
    role: str = "train"

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"role must be one of {_ROLES}, got {self.role!r}")
        if self.xs.shape[0] != self.ys.shape[0]:
            raise ValueError("xs and ys must hold the same number of samples")

    def __len__(self) -> int:
        return int(self.xs.shape[0])


@dataclass(frozen=True)
class B0Bound:
    empirical: float
    analytic: float
    details: dict = field(default_factory=dict)


def dft_real_rows(n_x: int, rows) -> np.ndarray:
    """Re(F_k) for F_{k,j} = exp(-2 pi i k j / n_x)."""
    k = np.asarray(rows, dtype=np.float64)[:, None]
    j = np.arange(n_x, dtype=np.float64)[None, :]
    return np.cos(2.0 * np.pi * k * j / n_x)


def build_sensing_matrix(config: ProblemConfig) -> SensingMatrix:
    if config.n_y > config.n_x:
        raise ValueError("cannot choose more DFT rows than n_x")
    rng = child_stream(config.master_seed, "sensing")
    rows = rng.choice(config.n_x, size=config.n_y, replace=False)
    raw = dft_real_rows(config.n_x, rows)
    spectral = numerics.spectral_norm(raw)
    scale = 1.0 / spectral
    logger.debug("sensing matrix rows %s, raw spectral norm %.6f", rows.tolist(), spectral)
    return SensingMatrix(A=raw * scale, row_indices=tuple(int(r) for r in rows), scale=scale)


def sample_target(config: ProblemConfig, rng: np.random.Generator) -> np.ndarray:
    x = np.zeros(config.n_x)
    support = rng.choice(config.n_x, size=config.sparsity, replace=False)
    x[support] = rng.uniform(-1.0, 1.0, size=config.sparsity)
    return x


def generate_dataset(
    config: ProblemConfig,
    sensing: SensingMatrix,
    m: int,
    role: str = "train",
    stream: tuple = (),
) -> Dataset:
    """Draw m samples; ``stream`` labels select an independent child stream."""
    if m < 1:
        raise ValueError("m must be a positive sample count")
    if sensing.A.shape != (config.n_y, config.n_x):
        raise ValueError(f"sensing matrix shape {sensing.A.shape} does not match config")

    rng = child_stream(config.master_seed, "dataset", role, *stream)
    xs = np.stack([sample_target(config, rng) for _ in range(m)])
    a = config.noise_half_width
    noise = rng.uniform(-a, a, size=(m, config.n_y)) if a > 0 else np.zeros((m, config.n_y))
    ys = xs @ sensing.A.T + noise
    return Dataset(xs=xs, ys=ys, config_fingerprint=sensing.fingerprint(config), role=role)


def bound_B0(sensing: SensingMatrix, dataset: Dataset, rho: float | None = None) -> B0Bound:
    """Initialization bound B0 = max ||A^T y||_1, measured and from the sparsity argument.

    Without ``rho`` the sparsity rate is read off the data (largest support).
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    A = sensing.A
    n_x = A.shape[1]
    empirical = float(np.max(np.sum(np.abs(dataset.ys @ A), axis=1)))

    noise = dataset.ys - dataset.xs @ A.T
    noise_term = float(np.max(np.sum(np.abs(noise @ A), axis=1)))
    if rho is None:
        rho = float(np.max(np.count_nonzero(dataset.xs, axis=1))) / n_x
    gram_norm = numerics.induced1_norm(sensing.gram)
    analytic = gram_norm * rho * n_x + noise_term
    return B0Bound(
        empirical=empirical,
        analytic=analytic,
        details={"gram_induced1": gram_norm, "rho": rho, "noise_term": noise_term},
    )


def save_dataset(dataset: Dataset, config: ProblemConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = DATASET_MAGIC + struct.pack("<II", DATASET_VERSION, 0)
    block = _CONFIG_BLOCK.pack(
        config.n_x, config.n_y, config.rho, config.noise_std, config.master_seed,
        len(dataset), _ROLES.index(dataset.role),
    )
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(block)
        fh.write(bytes.fromhex(dataset.config_fingerprint))
        fh.write(np.ascontiguousarray(dataset.xs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.ys, dtype="<f8").tobytes())
    return path


def load_dataset(path) -> tuple[Dataset, ProblemConfig]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")
    payload = path.read_bytes()
    if payload[:8] != DATASET_MAGIC:
        raise ValueError(f"{path} is not a dataset file")
    (version, _) = struct.unpack_from("<II", payload, 8)
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")

    offset = 16
    n_x, n_y, rho, noise_std, seed, m, role_code = _CONFIG_BLOCK.unpack_from(payload, offset)
    offset += _CONFIG_BLOCK.size
    fingerprint = payload[offset:offset + 32].hex()
    offset += 32
    xs = np.frombuffer(payload, dtype="<f8", count=m * n_x, offset=offset).reshape(m, n_x)
    offset += m * n_x * 8
    ys = np.frombuffer(payload, dtype="<f8", count=m * n_y, offset=offset).reshape(m, n_y)

    config = ProblemConfig(n_x=n_x, n_y=n_y, rho=rho, noise_std=noise_std, master_seed=seed)
    dataset = Dataset(xs=xs.astype(np.float64), ys=ys.astype(np.float64),
                      config_fingerprint=fingerprint, role=_ROLES[role_code])
    return dataset, config


def export_dataset_csv(dataset: Dataset, path) -> Path:
    """Long-format export with columns sample_index,kind,coord,value (kind is x or y)."""
    frames = []
    for kind, values in (("x", dataset.xs), ("y", dataset.ys)):
        m, n = values.shape
        frames.append(pd.DataFrame({
            "sample_index": np.repeat(np.arange(m), n),
            "kind": kind,
            "coord": np.tile(np.arange(n), m),
            "value": values.reshape(-1),
        }))
    table = pd.concat(frames, ignore_index=True).sort_values(
        ["sample_index", "kind", "coord"], kind="mergesort"
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    return path
