"""Monte-Carlo empirical Rademacher complexity of linear, ISTA and ReLU classes.

For each sign vector the supremum over the class is approximated by
multi-start projected gradient ascent on the weights. The ascent can only
find attained values, so every reported mean is a lower bound on the true
complexity. Paired comparisons (a class against its soft-thresholded
composition) share sign vectors, starting points and search budget.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

import networks
import numerics
import training
from networks import Arch, NetworkParams
from problem import SensingMatrix
from rng import child_stream

logger = logging.getLogger(__name__)

LOWER_BOUND_NOTE = "inner supremum found by projected gradient ascent; the mean is a lower bound"
HEURISTIC_NOTE = "heuristic: crossing frequencies of approximate maximizers"


class ClassArch(str, Enum):
    LINEAR = "LINEAR"
    ISTA = "ISTA"
    RELU = "RELU"


@dataclass(frozen=True)
class ClassSpec:
    """A scalar hypothesis class.

    LINEAR is {y -> w.y : ||w||_2 <= B1}. ISTA and RELU are coordinate ``j``
    of a depth-L network with ||W^l||_inf <= B and ||W^1||_2 <= B1, acting on
    b = A^T y. ``output_lambda`` is the outer soft-threshold used when
    ``apply_soft_threshold_on_output`` is set.
    """

    arch: ClassArch = ClassArch.LINEAR
    L: int = 1
    B: float = 1.0
    B1: float = 1.0
    lam: float = 0.0
    j: int = 0
    apply_soft_threshold_on_output: bool = False
    output_lambda: float = 0.0
    sensing: Optional[SensingMatrix] = None

    def __post_init__(self):
        object.__setattr__(self, "arch", ClassArch(self.arch))
        if self.B <= 0 or self.B1 <= 0:
            raise ValueError("norm caps must be positive")
        if self.arch is not ClassArch.LINEAR:
            if self.sensing is None:
                raise ValueError(f"{self.arch.value} classes need a sensing matrix")
            if not 0 <= self.j < self.sensing.A.shape[1]:
                raise ValueError(f"output coordinate {self.j} out of range")


@dataclass(frozen=True)
class RcConfig:
    n_sign_draws: int = 64
    inner_restarts: int = 8
    inner_steps: int = 200
    step_size: float = 0.05
    seed: int = 0
    exhaustive_max_m: int = 12
    workers: int = 1

    def __post_init__(self):
        if min(self.n_sign_draws, self.inner_restarts, self.workers) < 1 or self.inner_steps < 0:
            raise ValueError("search budgets must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "RcConfig":
        return cls(**data)


@dataclass
class RcEstimate:
    mean: float
    std_error: float
    n_sign_draws: int
    inner_restarts: int
    inner_steps: int
    exhaustive: bool = False
    per_draw: np.ndarray = field(default=None, repr=False)
    note: str = LOWER_BOUND_NOTE


@dataclass
class Lemma1Result:
    rc_base: RcEstimate
    rc_thresholded: RcEstimate
    gap: float
    gap_std_error: float
    implied_lambda_T_over_m: float
    implied_T: float


@dataclass
class TEstimate:
    value: float
    per_index: np.ndarray
    n_sign_draws: int
    note: str = HEURISTIC_NOTE


def sign_patterns(m: int, cfg: RcConfig) -> tuple[np.ndarray, bool]:
    """All 2^m sign vectors when m is small enough, otherwise n_sign_draws random ones."""
    if m <= cfg.exhaustive_max_m:
        codes = np.arange(2 ** m)[:, None]
        return ((codes >> np.arange(m)[None, :]) & 1) * 2.0 - 1.0, True
    rng = child_stream(cfg.seed, "rc-signs", m)
    return rng.choice(np.array([-1.0, 1.0]), size=(cfg.n_sign_draws, m)), False


def linear_closed_form_sup(inputs, signs, B1: float) -> np.ndarray:
    """B1 ||(1/m) sum_i eps_i y_i||_2 per sign vector."""
    Y = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    signs = np.atleast_2d(signs)
    return B1 * np.linalg.norm(signs @ Y / Y.shape[0], axis=1)


def _project_ball(W: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(W, axis=-1, keepdims=True)
    factor = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    return W * factor


def _outer(h: np.ndarray, out_lam: Optional[float]) -> np.ndarray:
    return h if out_lam is None else numerics.soft_threshold(h, out_lam)


def _linear_search(Y, signs, B1, out_lam, cfg: RcConfig, label) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ascent over all sign rows and restarts at once."""
    m, n = Y.shape
    D, R = signs.shape[0], cfg.inner_restarts
    rng = child_stream(cfg.seed, "rc-init", *label)
    direction = rng.standard_normal((D, R, n))
    direction /= np.maximum(np.linalg.norm(direction, axis=-1, keepdims=True), 1e-300)
    radius = B1 * rng.uniform(0.0, 1.0, size=(D, R, 1)) ** (1.0 / n)
    W = direction * radius

    coef_base = signs[:, None, :] / m
    for _ in range(cfg.inner_steps):
        coef = coef_base
        if out_lam is not None:
            coef = coef * (np.abs(W @ Y.T) > out_lam)
        G = coef @ Y
        norms = np.linalg.norm(G, axis=-1, keepdims=True)
        step = np.where(norms > 0, cfg.step_size * B1 * G / np.where(norms > 0, norms, 1.0), 0.0)
        W = _project_ball(W + step, B1)

    values = np.sum(coef_base * _outer(W @ Y.T, out_lam), axis=-1)  # (D, R)
    best = np.argmax(values, axis=1)
    rows = np.arange(D)
    return values[rows, best], W[rows, best]


def _random_class_params(spec: ClassSpec, rng: np.random.Generator) -> NetworkParams:
    n_x = spec.sensing.A.shape[1]
    W1 = tuple(rng.uniform(-1.0, 1.0, size=(n_x, n_x)) * (spec.B / n_x) for _ in range(spec.L))
    params = NetworkParams(arch=Arch(spec.arch.value), L=spec.L, lam=spec.lam, W1=W1)
    return networks.project_weights(params, spec.B, spec.B1)


def _network_objective(spec, params, Y, sign_row, out_lam):
    trace = networks.forward(params, spec.sensing, Y)
    out = trace.h[-1][:, spec.j]
    value = float(np.sum(sign_row * _outer(out, out_lam)) / Y.shape[0])
    return value, trace, out


def _network_search(spec: ClassSpec, Y, sign_row, out_lam, cfg: RcConfig, label):
    """Ascent for one sign vector; returns (best value, maximizing params)."""
    m = Y.shape[0]
    rng = child_stream(cfg.seed, "rc-init", *label)
    best_value, best_params = -math.inf, None
    for _ in range(cfg.inner_restarts):
        params = _random_class_params(spec, rng)
        for _ in range(cfg.inner_steps):
            _, trace, out = _network_objective(spec, params, Y, sign_row, out_lam)
            coef = sign_row / m
            if out_lam is not None:
                coef = coef * (np.abs(out) > out_lam)
            grad_out = np.zeros_like(trace.h[-1])
            grad_out[:, spec.j] = coef
            grads = training.backprop(params, Y, trace, grad_out)
            W1 = []
            for W, dW in zip(params.W1, grads.W1):
                norm = np.linalg.norm(dW)
                W1.append(W + cfg.step_size * spec.B * dW / norm if norm > 0 else W)
            params = networks.project_weights(replace(params, W1=tuple(W1)), spec.B, spec.B1)
        value, _, _ = _network_objective(spec, params, Y, sign_row, out_lam)
        if value > best_value:
            best_value, best_params = value, params
    return best_value, best_params


def _network_job(args):
    spec, Y, sign_row, out_lam, cfg, label = args
    value, params = _network_search(spec, Y, sign_row, out_lam, cfg, label)
    return value, params


def _run_network_jobs(jobs, workers: int):
    if workers <= 1:
        return [_network_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_network_job, jobs))


def _search_all(spec: ClassSpec, Y, signs, out_lam, cfg: RcConfig, tag: str) -> np.ndarray:
    if spec.arch is ClassArch.LINEAR:
        values, _ = _linear_search(Y, signs, spec.B1, out_lam, cfg, (tag,))
        return values
    jobs = [(spec, Y, signs[d], out_lam, cfg, (tag, d)) for d in range(signs.shape[0])]
    return np.array([value for value, _ in _run_network_jobs(jobs, cfg.workers)])


def _summarize(values: np.ndarray, exhaustive: bool, cfg: RcConfig) -> RcEstimate:
    D = values.shape[0]
    std_error = 0.0 if exhaustive or D < 2 else float(np.std(values, ddof=1) / math.sqrt(D))
    return RcEstimate(
        mean=float(np.mean(values)), std_error=std_error, n_sign_draws=D,
        inner_restarts=cfg.inner_restarts, inner_steps=cfg.inner_steps,
        exhaustive=exhaustive, per_draw=values,
    )


def _inputs(spec: ClassSpec, inputs) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if spec.arch is not ClassArch.LINEAR and Y.shape[1] != spec.sensing.A.shape[0]:
        raise ValueError("observations do not match the sensing matrix")
    return Y


def estimate_rc(spec: ClassSpec, inputs, cfg: RcConfig = RcConfig()) -> RcEstimate:
    Y = _inputs(spec, inputs)
    signs, exhaustive = sign_patterns(Y.shape[0], cfg)
    out_lam = spec.output_lambda if spec.apply_soft_threshold_on_output and spec.output_lambda > 0 else None
    logger.info("estimating RC of %s class on %d inputs with %d sign vectors",
                spec.arch.value, Y.shape[0], signs.shape[0])
    return _summarize(_search_all(spec, Y, signs, out_lam, cfg, "rc"), exhaustive, cfg)


def lemma1_check(spec: ClassSpec, inputs, lam: float, cfg: RcConfig = RcConfig()) -> Lemma1Result:
    """Paired estimate of RC(H) and RC(S_lam o H)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    Y = _inputs(spec, inputs)
    m = Y.shape[0]
    signs, exhaustive = sign_patterns(m, cfg)
    base_values = _search_all(spec, Y, signs, None, cfg, "rc")
    # S_0 is the identity, so lam = 0 reuses the base objective verbatim
    thr_values = _search_all(spec, Y, signs, lam if lam > 0 else None, cfg, "rc")

    base = _summarize(base_values, exhaustive, cfg)
    thresholded = _summarize(thr_values, exhaustive, cfg)
    diff = base_values - thr_values
    gap_se = 0.0 if exhaustive or diff.size < 2 else float(np.std(diff, ddof=1) / math.sqrt(diff.size))
    gap = base.mean - thresholded.mean
    return Lemma1Result(
        rc_base=base, rc_thresholded=thresholded, gap=gap, gap_std_error=gap_se,
        implied_lambda_T_over_m=gap, implied_T=(m * gap / lam) if lam > 0 else 0.0,
    )


def estimate_T_indicator(spec: ClassSpec, inputs, lam: float, cfg: RcConfig = RcConfig()) -> TEstimate:
    """Sum over held-out indices j of how often the paired maximizers straddle +-lam at y_j."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    Y = _inputs(spec, inputs)
    m = Y.shape[0]
    signs, _ = sign_patterns(m, cfg)
    D = signs.shape[0]
    out_lam = lam if lam > 0 else None

    plus = np.repeat(signs[:, None, :], m, axis=1)  # (D, m, m): row j has eps_j overridden
    minus = plus.copy()
    idx = np.arange(m)
    plus[:, idx, idx] = 1.0
    minus[:, idx, idx] = -1.0
    rows = np.concatenate([plus.reshape(D * m, m), minus.reshape(D * m, m)])

    if spec.arch is ClassArch.LINEAR:
        _, W = _linear_search(Y, rows, spec.B1, out_lam, cfg, ("T",))
        values_at_j = np.sum(W.reshape(2, D, m, -1) * Y[None, None, :, :], axis=-1)
    else:
        jobs = [(spec, Y, rows[r], out_lam, cfg, ("T", r)) for r in range(rows.shape[0])]
        maximizers = [params for _, params in _run_network_jobs(jobs, cfg.workers)]
        outs = np.array([networks.forward(p, spec.sensing, Y).h[-1][:, spec.j] for p in maximizers])
        values_at_j = outs.reshape(2, D, m, m)[:, :, idx, idx]

    crossing = (values_at_j[0] > lam) & (values_at_j[1] < -lam)  # (D, m)
    per_index = crossing.mean(axis=0)
    return TEstimate(value=float(per_index.sum()), per_index=per_index, n_sign_draws=D)
