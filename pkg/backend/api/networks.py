"""Unrolled ISTA, unrolled ADMM and ReLU networks, and the iterations they unroll.

Every forward pass accepts a single observation ``y`` of shape ``(n_y,)`` or a
batch of shape ``(m, n_y)``; activations keep the leading shape of ``y``.
Matrices act on row vectors as ``h @ W.T`` so both shapes share one code path.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

import numerics
from problem import SensingMatrix

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"UNRLCKPT"
CHECKPOINT_VERSION = 1
# arch, bias mode, clip flag, L, n_x, n_y, lambda, gamma
_CHECKPOINT_BLOCK = struct.Struct("<BBBIIIdd")
_PROJECTION_SLACK = 1e-13


class DimensionError(ValueError):
    pass


class Arch(str, Enum):
    ISTA = "ISTA"
    ADMM = "ADMM"
    RELU = "RELU"


class BiasMode(str, Enum):
    CONSTANT = "constant"
    LEARNED = "learned"


@dataclass(frozen=True)
class NetworkParams:
    arch: Arch
    L: int
    lam: float
    W1: tuple[np.ndarray, ...]
    gamma: float = 1.0
    bias_mode: BiasMode = BiasMode.CONSTANT
    W2: Optional[tuple[np.ndarray, ...]] = None
    clip_output: bool = False

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        object.__setattr__(self, "bias_mode", BiasMode(self.bias_mode))
        object.__setattr__(self, "W1", tuple(np.asarray(W, dtype=np.float64) for W in self.W1))
        if self.W2 is not None:
            object.__setattr__(self, "W2", tuple(np.asarray(W, dtype=np.float64) for W in self.W2))

        if self.L < 1:
            raise ValueError("depth L must be positive")
        if len(self.W1) != self.L:
            raise ValueError(f"expected {self.L} first-set weight matrices, got {len(self.W1)}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.arch is Arch.ADMM and self.gamma <= 0:
            raise ValueError("gamma must be positive for ADMM networks")
        n_x = self.W1[0].shape[0]
        for W in self.W1:
            if W.shape != (n_x, n_x):
                raise DimensionError(f"W1 matrices must be {n_x}x{n_x}, got {W.shape}")
        if self.bias_mode is BiasMode.LEARNED:
            if self.W2 is None or len(self.W2) != self.L:
                raise ValueError("learned bias mode needs one W2 matrix per layer")
            n_y = self.W2[0].shape[1]
            for W in self.W2:
                if W.shape != (n_x, n_y):
                    raise DimensionError(f"W2 matrices must be {n_x}x{n_y}, got {W.shape}")

    @property
    def n_x(self) -> int:
        return int(self.W1[0].shape[0])


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer values of one forward pass.

    ``h`` holds h^0..h^L. ``pre`` holds the argument of each layer's
    nonlinearity (for ADMM that is h^l - u^{l-1}). ``z``/``u`` hold
    z^0..z^L and u^0..u^L for ADMM and are empty otherwise. For ADMM, h^0 is
    the zero vector.
    """

    h: tuple[np.ndarray, ...]
    pre: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...] = ()
    u: tuple[np.ndarray, ...] = ()
    prediction: np.ndarray = None
    bias: np.ndarray = None

    @property
    def depth(self) -> int:
        return len(self.pre)


def _activation(arch: Arch, lam: float):
    if arch is Arch.RELU:
        return numerics.relu
    return lambda v: numerics.soft_threshold(v, lam)


def forward(params: NetworkParams, sensing: SensingMatrix, y) -> ForwardTrace:
    A = sensing.A
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != A.shape[0]:
        raise DimensionError(f"observation length {y.shape[-1]} does not match n_y={A.shape[0]}")
    if A.shape[1] != params.n_x:
        raise DimensionError(f"sensing matrix has n_x={A.shape[1]}, network has n_x={params.n_x}")
    if params.bias_mode is BiasMode.LEARNED and params.W2[0].shape[1] != A.shape[0]:
        raise DimensionError("W2 matrices do not match the observation length")

    act = _activation(params.arch, params.lam)
    b = y @ A  # A^T y for each row
    learned = params.bias_mode is BiasMode.LEARNED

    def bias(layer: int) -> np.ndarray:
        return y @ params.W2[layer].T if learned else b

    if params.arch is Arch.ADMM:
        zero = np.zeros_like(b)
        hs, pres, zs, us = [zero], [], [zero], [zero]
        z, u = zero, zero
        for layer, W in enumerate(params.W1):
            h = (z + u) @ W.T + bias(layer)
            pre = h - u
            z = numerics.soft_threshold(pre, params.lam)
            u = u - params.gamma * (h - z)
            hs.append(h)
            pres.append(pre)
            zs.append(z)
            us.append(u)
        trace = dict(h=tuple(hs), pre=tuple(pres), z=tuple(zs), u=tuple(us))
    else:
        h = act(b)
        hs, pres = [h], []
        for layer, W in enumerate(params.W1):
            pre = h @ W.T + bias(layer)
            h = act(pre)
            hs.append(h)
            pres.append(pre)
        trace = dict(h=tuple(hs), pre=tuple(pres))

    out = trace["h"][-1]
    prediction = numerics.clip(out, -1.0, 1.0) if params.clip_output else out
    return ForwardTrace(prediction=prediction, bias=b, **trace)


def predict(params: NetworkParams, sensing: SensingMatrix, y) -> np.ndarray:
    return forward(params, sensing, y).prediction


def classical_ista(sensing: SensingMatrix, y, lam: float, iters: int) -> np.ndarray:
    """x^{k+1} = S_lam(x^k - A^T A x^k + A^T y) from x^0 = S_lam(A^T y)."""
    A = sensing.A
    b = np.asarray(y, dtype=np.float64) @ A
    gram = A.T @ A
    x = numerics.soft_threshold(b, lam)
    for _ in range(iters):
        x = numerics.soft_threshold(x - x @ gram.T + b, lam)
    return x


def classical_admm(sensing: SensingMatrix, y, lam: float, gamma: float, W, iters: int) -> np.ndarray:
    """Iterate the ADMM layer recurrence with one shared matrix W; returns h^iters."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64) @ sensing.A
    z = np.zeros_like(b)
    u = np.zeros_like(b)
    h = np.zeros_like(b)
    for _ in range(iters):
        h = (z + u) @ W.T + b
        z = numerics.soft_threshold(h - u, lam)
        u = u - gamma * (h - z)
    return h


def init_weights(
    arch,
    sensing: SensingMatrix,
    perturb_scale: float,
    rng: np.random.Generator,
    L: int = 10,
    lam: float = 0.1,
    gamma: float = 1.0,
    bias_mode=BiasMode.CONSTANT,
    clip_output: bool = False,
) -> NetworkParams:
    """Start every layer at the classical iteration matrix I - A^T A, plus uniform noise."""
    if perturb_scale < 0:
        raise ValueError("perturb_scale must be nonnegative")
    A = sensing.A
    n_x = A.shape[1]
    base = np.eye(n_x) - A.T @ A
    W1 = []
    for _ in range(L):
        noise = rng.uniform(-perturb_scale, perturb_scale, size=(n_x, n_x)) if perturb_scale > 0 else 0.0
        W1.append(base + noise)
    W2 = tuple(A.T.copy() for _ in range(L)) if BiasMode(bias_mode) is BiasMode.LEARNED else None
    return NetworkParams(
        arch=Arch(arch), L=L, lam=lam, W1=tuple(W1), gamma=gamma,
        bias_mode=BiasMode(bias_mode), W2=W2, clip_output=clip_output,
    )


def tied_params(arch, W, L: int, lam: float, gamma: float = 1.0) -> NetworkParams:
    W = np.asarray(W, dtype=np.float64)
    return NetworkParams(arch=Arch(arch), L=L, lam=lam, W1=tuple(W.copy() for _ in range(L)), gamma=gamma)


@dataclass(frozen=True)
class WeightNorms:
    linf: tuple[float, ...]
    spectral_first: float


def weight_norms(params: NetworkParams) -> WeightNorms:
    return WeightNorms(
        linf=tuple(numerics.linf_norm(W) for W in params.W1),
        spectral_first=numerics.spectral_norm(params.W1[0]),
    )


def _cap_rows(W: np.ndarray, B: float) -> np.ndarray:
    row_norms = np.sum(np.abs(W), axis=1)
    over = row_norms > B + _PROJECTION_SLACK
    if not np.any(over):
        return W
    scaled = W.copy()
    scaled[over] *= (B / row_norms[over])[:, None]
    return scaled


def project_weights(params: NetworkParams, B: float, B1: float) -> NetworkParams:
    """Scale rows down to L1 norm B, then cap the first layer's spectral norm at B1."""
    if B <= 0 or B1 <= 0:
        raise ValueError("norm caps must be positive")
    W1 = [_cap_rows(W, B) for W in params.W1]
    spectral = numerics.spectral_norm(W1[0])
    if spectral > B1 * (1.0 + 1e-12):
        W1[0] = W1[0] * (B1 / spectral)
    return replace(params, W1=tuple(W1))


def save_params(params: NetworkParams, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    learned = params.bias_mode is BiasMode.LEARNED
    n_y = params.W2[0].shape[1] if learned else 0
    block = _CHECKPOINT_BLOCK.pack(
        list(Arch).index(params.arch), list(BiasMode).index(params.bias_mode), int(params.clip_output),
        params.L, params.n_x, n_y, params.lam, params.gamma,
    )
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, 0))
        fh.write(block)
        for W in params.W1:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
        if learned:
            for W in params.W2:
                fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
    return path


def load_params(path) -> NetworkParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    payload = path.read_bytes()
    if payload[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a network checkpoint")
    (version, _) = struct.unpack_from("<II", payload, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")

    arch_code, bias_code, clip_flag, L, n_x, n_y, lam, gamma = _CHECKPOINT_BLOCK.unpack_from(payload, 16)
    offset = 16 + _CHECKPOINT_BLOCK.size

    def read(rows: int, cols: int) -> np.ndarray:
        nonlocal offset
        M = np.frombuffer(payload, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * 8
        return M.astype(np.float64)

    W1 = tuple(read(n_x, n_x) for _ in range(L))
    bias_mode = list(BiasMode)[bias_code]
    W2 = tuple(read(n_x, n_y) for _ in range(L)) if bias_mode is BiasMode.LEARNED else None
    return NetworkParams(
        arch=list(Arch)[arch_code], L=L, lam=lam, W1=W1, gamma=gamma,
        bias_mode=bias_mode, W2=W2, clip_output=bool(clip_flag),
    )


def export_norms_csv(params: NetworkParams, path) -> Path:
    norms = weight_norms(params)
    table = pd.DataFrame({
        "layer": np.arange(1, params.L + 1),
        "linf": norms.linf,
        "spectral": [norms.spectral_first] + [np.nan] * (params.L - 1),
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    return path
