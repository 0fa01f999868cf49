"""Experiment orchestration: estimation-error sweeps, bound tables and result files.

Every stochastic input of a cell comes from a labelled child stream of the
problem's master seed, so a spec fully determines every CSV it produces.
Cells run over a bounded process pool and rows are sorted before writing.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache, partial
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

import bounds
import networks
import problem
import rademacher
import settings
import training
from bounds import BoundInputs, DegenerateDepthError
from networks import Arch, BiasMode
from problem import ProblemConfig
from rademacher import ClassArch, ClassSpec, RcConfig
from rng import child_stream, stream_key
from training import TrainConfig, TrainingDivergedError

logger = logging.getLogger(__name__)

DEFAULT_M_VALUES = (10, 25, 50, 100, 250, 500, 1000, 5000)
DEFAULT_LAMBDAS = (0.05, 0.1, 0.2, 0.4, 0.8)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_SWEEP_DEPTHS = (2, 4, 6, 8, 10)
DEFAULT_RHOS = (0.05, 0.1, 0.15, 0.25)

EE_COLUMNS = [
    "arch", "L", "lambda", "bias_mode", "regime", "m", "seed",
    "loss_hstar", "loss_hhat", "ee", "train_loss_final",
]
FAILURE_COLUMNS = ["arch", "L", "lambda", "bias_mode", "regime", "m", "seed", "error"]
BOUND_COLUMNS = ["arch", "L", "m", "lambda", "gamma", "B", "T", "value", "valid", "B0", "source"]
EE_BOUND_COLUMNS = ["arch", "L", "m", "lambda", "gamma", "B", "T", "r_star", "ee_bound", "valid", "B0", "source"]
RC_COLUMNS = ["class", "lambda", "m", "mean", "std_error", "gap", "base_mean", "gap_std_error", "implied_T"]

REGIME_UNCONSTRAINED = "unconstrained"
REGIME_PROJECTED = "projected"

_EXPERIMENT_KEYS = {
    "problem", "archs", "depths", "lambdas", "m_values", "bias_modes", "seeds", "m_star",
    "m_test", "train", "gamma", "perturb_scale", "out_dir", "workers", "cell_budget", "rhos",
}


def _nonempty(values, name: str) -> tuple:
    values = tuple(values)
    if not values:
        raise ValueError(f"{name} must not be empty")
    return values


@dataclass(frozen=True)
class ExperimentSpec:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    archs: tuple = (Arch.ISTA, Arch.RELU)
    depths: tuple = (10,)
    lambdas: tuple = DEFAULT_LAMBDAS
    m_values: tuple = DEFAULT_M_VALUES
    bias_modes: tuple = (BiasMode.CONSTANT,)
    seeds: tuple = DEFAULT_SEEDS
    m_star: int = 10_000
    m_test: int = 10_000
    train: TrainConfig = field(default_factory=TrainConfig)
    gamma: float = 1.0
    perturb_scale: float = 0.01
    out_dir: Path = settings.OUTPUT_DIR
    workers: int = settings.WORKERS
    cell_budget: Optional[int] = None
    rhos: tuple = DEFAULT_RHOS

    def __post_init__(self):
        object.__setattr__(self, "archs", tuple(Arch(a) for a in _nonempty(self.archs, "archs")))
        object.__setattr__(self, "bias_modes", tuple(BiasMode(b) for b in _nonempty(self.bias_modes, "bias_modes")))
        object.__setattr__(self, "depths", tuple(int(L) for L in _nonempty(self.depths, "depths")))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in _nonempty(self.lambdas, "lambdas")))
        object.__setattr__(self, "m_values", tuple(int(m) for m in _nonempty(self.m_values, "m_values")))
        object.__setattr__(self, "seeds", tuple(int(s) for s in _nonempty(self.seeds, "seeds")))
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        object.__setattr__(self, "out_dir", Path(self.out_dir))

        if any(L < 1 for L in self.depths):
            raise ValueError("every depth must be positive")
        if any(m < 1 for m in self.m_values) or self.m_test < 1:
            raise ValueError("sample counts must be positive")
        if max(self.m_values) > self.m_star:
            raise ValueError(f"every m must be at most m_star={self.m_star}")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.cell_budget is not None and self.cell_budget < 1:
            raise ValueError("cell_budget must be positive")

    @property
    def regime(self) -> str:
        return REGIME_UNCONSTRAINED if self.train.projection is None else REGIME_PROJECTED

    @property
    def cell_count(self) -> int:
        return (len(self.depths) * len(self.archs) * len(self.lambdas)
                * len(self.m_values) * len(self.seeds) * len(self.bias_modes))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        settings.reject_unknown_keys(data, _EXPERIMENT_KEYS, "experiment config")
        data = dict(data)
        problem_data = {"master_seed": settings.MASTER_SEED, **data.pop("problem", {})}
        train_data = {"clip_output": settings.DEFAULT_CLIP_OUTPUT, **data.pop("train", {})}
        return cls(
            problem=ProblemConfig.from_dict(problem_data),
            train=TrainConfig.from_dict(train_data),
            **data,
        )

    def with_overrides(self, seed=None, workers=None, out_dir=None) -> "ExperimentSpec":
        """Apply CLI flags on top of the config document."""
        spec = self
        if seed is not None:
            spec = replace(spec, problem=replace(spec.problem, master_seed=seed))
        if workers is not None:
            spec = replace(spec, workers=workers)
        if out_dir is not None:
            spec = replace(spec, out_dir=Path(out_dir))
        return spec

    def to_dict(self) -> dict:
        return {
            "problem": asdict(self.problem),
            "archs": [a.value for a in self.archs],
            "depths": list(self.depths),
            "lambdas": list(self.lambdas),
            "m_values": list(self.m_values),
            "bias_modes": [b.value for b in self.bias_modes],
            "seeds": list(self.seeds),
            "m_star": self.m_star,
            "m_test": self.m_test,
            "train": asdict(self.train),
            "gamma": self.gamma,
            "perturb_scale": self.perturb_scale,
            "cell_budget": self.cell_budget,
            "rhos": list(self.rhos),
        }


@dataclass(frozen=True)
class EEResult:
    arch: str
    L: int
    lam: float
    bias_mode: str
    m: int
    seed: int
    loss_hstar: float
    loss_hhat: float
    ee: float
    train_loss_final: float
    status: str = "ok"
    error: str = ""
    regime: str = REGIME_UNCONSTRAINED

    @property
    def key(self) -> tuple:
        return (self.arch, self.L, self.lam, self.bias_mode, self.regime, self.m, self.seed)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_row(self) -> dict:
        return {
            "arch": self.arch, "L": self.L, "lambda": self.lam, "bias_mode": self.bias_mode,
            "regime": self.regime, "m": self.m, "seed": self.seed, "loss_hstar": self.loss_hstar,
            "loss_hhat": self.loss_hhat, "ee": self.ee, "train_loss_final": self.train_loss_final,
            "error": self.error,
        }


@dataclass(frozen=True)
class _Group:
    """One proxy optimum and all the m-cells that are measured against it."""

    arch: Arch
    L: int
    lam: float
    bias_mode: BiasMode
    seed: int


@lru_cache(maxsize=8)
def _sensing(config: ProblemConfig) -> problem.SensingMatrix:
    return problem.build_sensing_matrix(config)


@lru_cache(maxsize=64)
def _dataset(config: ProblemConfig, m: int, role: str, stream: tuple) -> problem.Dataset:
    return problem.generate_dataset(config, _sensing(config), m, role=role, stream=stream)


def sensing_for(spec: ExperimentSpec) -> problem.SensingMatrix:
    return _sensing(spec.problem)


def heldout_set(spec: ExperimentSpec) -> problem.Dataset:
    return _dataset(spec.problem, spec.m_test, "test", ("heldout",))


def star_set(spec: ExperimentSpec, seed: int) -> problem.Dataset:
    return _dataset(spec.problem, spec.m_star, "train", ("star", seed))


def hat_set(spec: ExperimentSpec, seed: int, m: int) -> problem.Dataset:
    return _dataset(spec.problem, m, "train", ("hat", seed, m))


def fit_network(spec: ExperimentSpec, arch, L: int, lam: float, bias_mode, seed: int, train_set):
    """Initialize at I - A^T A (plus noise) and train with the experiment's SGD settings."""
    sensing = _sensing(spec.problem)
    master = spec.problem.master_seed
    rng = child_stream(master, "init", Arch(arch).value, L, lam, BiasMode(bias_mode).value, seed)
    params = networks.init_weights(
        arch, sensing, spec.perturb_scale, rng, L=L, lam=lam, gamma=spec.gamma,
        bias_mode=bias_mode, clip_output=spec.train.clip_output,
    )
    cfg = replace(spec.train, seed=stream_key(master, "train", seed) % 2**64)
    return training.train(params, sensing, train_set, cfg)


def _failed(group: _Group, lams, m_values, error: str, regime: str) -> list[EEResult]:
    nan = math.nan
    return [
        EEResult(group.arch.value, group.L, lam, group.bias_mode.value, m, group.seed,
                 nan, nan, nan, nan, status="failed", error=error, regime=regime)
        for m in m_values for lam in lams
    ]


def _run_group(spec: ExperimentSpec, group: _Group) -> list[EEResult]:
    sensing = _sensing(spec.problem)
    test_set = heldout_set(spec)
    # ReLU networks ignore lambda; one fit serves every lambda of the grid
    lams = spec.lambdas if group.arch is Arch.RELU else (group.lam,)

    try:
        hstar, star_history = fit_network(spec, group.arch, group.L, group.lam, group.bias_mode,
                                          group.seed, star_set(spec, group.seed))
    except TrainingDivergedError as exc:
        logger.error("proxy optimum diverged for %s: %s", group, exc)
        return _failed(group, lams, spec.m_values, f"proxy optimum: {exc}", spec.regime)
    loss_star = training.evaluate(hstar, sensing, test_set)

    results = []
    for m in spec.m_values:
        if m == spec.m_star:
            # same data and seed give the same network
            hhat, history = hstar, star_history
        else:
            try:
                hhat, history = fit_network(spec, group.arch, group.L, group.lam, group.bias_mode,
                                            group.seed, hat_set(spec, group.seed, m))
            except TrainingDivergedError as exc:
                logger.error("training diverged for %s at m=%d: %s", group, m, exc)
                results.extend(_failed(group, lams, (m,), str(exc), spec.regime))
                continue
        loss_hat = training.evaluate(hhat, sensing, test_set)
        for lam in lams:
            results.append(EEResult(
                arch=group.arch.value, L=group.L, lam=lam, bias_mode=group.bias_mode.value,
                m=m, seed=group.seed, loss_hstar=loss_star, loss_hhat=loss_hat,
                ee=loss_hat - loss_star, train_loss_final=history[-1], regime=spec.regime,
            ))
    return results


def _groups(spec: ExperimentSpec) -> list[_Group]:
    groups = []
    for arch, L, bias_mode, seed in itertools.product(spec.archs, spec.depths, spec.bias_modes, spec.seeds):
        lams = spec.lambdas[:1] if arch is Arch.RELU else spec.lambdas
        groups.extend(_Group(arch, L, lam, bias_mode, seed) for lam in lams)
    return groups


def _check_budget(spec: ExperimentSpec, cells: int) -> None:
    if spec.cell_budget is not None and cells > spec.cell_budget:
        raise ValueError(f"run needs {cells} cells, over the budget of {spec.cell_budget}")


def run_ee_experiment(spec: ExperimentSpec) -> list[EEResult]:
    _check_budget(spec, spec.cell_count)
    groups = _groups(spec)
    logger.info("running %d cells in %d training groups on %d workers",
                spec.cell_count, len(groups), spec.workers)

    job = partial(_run_group, spec)
    if spec.workers <= 1:
        batches = [job(group) for group in groups]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            batches = list(pool.map(job, groups))

    results = sorted((r for batch in batches for r in batch), key=lambda r: r.key)
    failed = sum(not r.ok for r in results)
    if failed:
        logger.warning("%d of %d cells failed", failed, len(results))
    return results


def _write_csv(rows: list[dict], columns, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def write_ee_results(results, out_dir, name: str = "ee_results.csv") -> list[Path]:
    """Successful cells go to ``name``; failed ones to failures.csv."""
    out_dir = Path(out_dir)
    ok = [r.to_row() for r in results if r.ok]
    failed = [r.to_row() for r in results if not r.ok]
    paths = [_write_csv(ok, EE_COLUMNS, out_dir / name)]
    if failed:
        stem = Path(name).stem.replace("ee_results", "failures") or "failures"
        paths.append(_write_csv(failed, FAILURE_COLUMNS, out_dir / f"{stem}.csv"))
    return paths


def summarize_ee(results) -> pd.DataFrame:
    """Mean and spread of EE per cell over the seeds that succeeded."""
    frame = pd.DataFrame([r.to_row() for r in results if r.ok], columns=EE_COLUMNS)
    keys = ["arch", "L", "lambda", "bias_mode", "regime", "m"]
    summary = frame.groupby(keys, sort=True).agg(
        ee_mean=("ee", "mean"),
        ee_std=("ee", "std"),
        loss_hstar_mean=("loss_hstar", "mean"),
        loss_hhat_mean=("loss_hhat", "mean"),
        n_seeds=("seed", "count"),
    )
    return summary.reset_index()


def lambda_trend(summary: pd.DataFrame, arch: str = "ISTA", L: Optional[int] = None,
                 bias_mode: Optional[str] = None) -> dict:
    """Spearman correlation between lambda and mean EE, per m.

    Pass ``bias_mode`` when the summary holds more than one; rows of different
    modes would otherwise be ranked together.
    """
    rows = summary[summary["arch"] == arch]
    if L is not None:
        rows = rows[rows["L"] == L]
    if bias_mode is not None:
        rows = rows[rows["bias_mode"] == bias_mode]
    trend = {}
    for m, group in rows.groupby("m", sort=True):
        if group["lambda"].nunique() < 2:
            continue
        rho, _ = spearmanr(group["lambda"], group["ee_mean"])
        trend[int(m)] = float(rho)
    return trend


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir, echo: dict, paths) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "version": settings.VERSION,
        "spec": echo,
        "files": {Path(p).name: _sha256(Path(p)) for p in sorted(paths, key=lambda p: Path(p).name)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def run_ee_sweep(spec: ExperimentSpec) -> list[EEResult]:
    results = run_ee_experiment(spec)
    paths = write_ee_results(results, spec.out_dir)
    summary_path = spec.out_dir / "ee_summary.csv"
    summarize_ee(results).to_csv(summary_path, index=False)
    paths.append(summary_path)
    write_manifest(spec.out_dir, spec.to_dict(), paths)
    return results


def run_depth_sweep(spec: ExperimentSpec, depths=None) -> dict[int, list[EEResult]]:
    """One EE experiment per depth, each written to its own ee_results_L<depth>.csv."""
    depths = tuple(depths or spec.depths)
    if not depths:
        raise ValueError("depth list must not be empty")
    per_depth = replace(spec, depths=depths[:1]).cell_count
    _check_budget(spec, per_depth * len(depths))

    by_depth, paths, everything = {}, [], []
    for L in depths:
        logger.info("depth sweep: L=%d", L)
        results = run_ee_experiment(replace(spec, depths=(L,), cell_budget=None))
        by_depth[L] = results
        everything.extend(results)
        paths.extend(write_ee_results(results, spec.out_dir, name=f"ee_results_L{L}.csv"))

    summary_path = spec.out_dir / "ee_summary.csv"
    summarize_ee(everything).to_csv(summary_path, index=False)
    paths.append(summary_path)
    echo = dict(spec.to_dict(), depths=list(depths))
    write_manifest(spec.out_dir, echo, paths)
    return by_depth


_GRID_KEYS = {
    "B0", "B", "lambdas", "gammas", "m_values", "depths", "T_values",
    "c", "C", "alpha", "s", "n_x", "checkpoints",
}


@dataclass(frozen=True)
class BoundGrid:
    B0: tuple = (1.0,)
    B: tuple = (1.0,)
    lambdas: tuple = DEFAULT_LAMBDAS
    gammas: tuple = (1.0,)
    m_values: tuple = DEFAULT_M_VALUES
    depths: tuple = (10,)
    T_values: tuple = (0.0,)
    c: float = 1.0
    C: float = 1.0
    alpha: float = 1.0
    s: float = 1.0
    n_x: int = 64
    checkpoints: tuple = ()

    def __post_init__(self):
        for name in ("B0", "B", "lambdas", "gammas", "m_values", "depths", "T_values"):
            object.__setattr__(self, name, _nonempty(getattr(self, name), name))
        object.__setattr__(self, "checkpoints", tuple(Path(p) for p in self.checkpoints))

    @classmethod
    def from_dict(cls, data: dict) -> "BoundGrid":
        settings.reject_unknown_keys(data, _GRID_KEYS, "bound grid")
        return cls(**data)

    def constants(self) -> dict:
        return {"c": self.c, "C": self.C, "alpha": self.alpha, "s": self.s, "n_x": self.n_x}

    def cells(self):
        """(inputs, source) for every grid point and every checkpoint-derived point."""
        for B0, B, lam, gamma, m, L, T in itertools.product(
            self.B0, self.B, self.lambdas, self.gammas, self.m_values, self.depths, self.T_values
        ):
            yield BoundInputs(B0=B0, B=B, lam=lam, gamma=gamma, m=m, L=L, T=T, **self.constants()), "grid"
        for path in self.checkpoints:
            params = networks.load_params(path)
            caps = checkpoint_caps(params)
            for B0, m, T in itertools.product(self.B0, self.m_values, self.T_values):
                yield BoundInputs(B0=B0, B=caps, lam=params.lam, gamma=params.gamma, m=m,
                                  L=params.L, T=T, **self.constants()), path.name


def checkpoint_caps(params) -> tuple[float, ...]:
    """B_l from measured norms; the first layer takes the larger of its two norms."""
    norms = networks.weight_norms(params)
    return (max(norms.linf[0], norms.spectral_first),) + norms.linf[1:]


def _ge_rows(inp: BoundInputs, source: str) -> list[dict]:
    base = {"L": inp.L, "m": inp.m, "lambda": inp.lam, "gamma": inp.gamma,
            "B": inp.B_max, "T": inp.T_scalar, "B0": inp.B0, "source": source}
    rows = []
    for arch, report in (
        ("RELU", bounds.ge_bound_relu(inp)),
        ("ISTA", bounds.ge_bound_ista(inp)),
        ("ADMM", bounds.ge_bound_admm(inp)),
    ):
        rows.append(dict(base, arch=arch, value=report.value, valid=report.valid))
    return rows


def _ee_rows(inp: BoundInputs, source: str) -> list[dict]:
    base = {"L": inp.L, "m": inp.m, "lambda": inp.lam, "gamma": inp.gamma,
            "B": inp.B_max, "T": inp.T_scalar, "B0": inp.B0, "source": source}
    rows = []
    for arch in ("RELU", "ISTA", "ADMM"):
        try:
            report = bounds.ee_fixed_point(arch, inp)
        except DegenerateDepthError:
            logger.debug("skipping %s EE bound at L=%d", arch, inp.L)
            continue
        rows.append(dict(
            base, arch=arch, r_star=report.value,
            ee_bound=bounds.ee_bound(report.value, inp.C, inp.s, inp.m, inp.n_x),
            valid=report.valid,
        ))
    return rows


def _inputs_echo(inp: BoundInputs) -> dict:
    echo = asdict(inp)
    for key in ("B", "T"):
        if isinstance(echo[key], tuple):
            echo[key] = list(echo[key])
    return echo


def run_bound_table(grid: BoundGrid, out_dir=None):
    """GE and EE bound tables for every cell; returns (ge, ee, report)."""
    ge_rows, ee_rows, report = [], [], []
    for inp, source in grid.cells():
        ge_rows.extend(_ge_rows(inp, source))
        ee_rows.extend(_ee_rows(inp, source))
        report.append({"source": source, "inputs": _inputs_echo(inp), "reports": bounds.all_reports(inp)})

    ge = pd.DataFrame(ge_rows, columns=BOUND_COLUMNS)
    ee = pd.DataFrame(ee_rows, columns=EE_BOUND_COLUMNS)
    logger.info("bound table: %d GE rows, %d EE rows", len(ge), len(ee))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ge.to_csv(out_dir / "bounds.csv", index=False)
        ee.to_csv(out_dir / "ee_bounds.csv", index=False)
        report_path = out_dir / "bounds_report.json"
        report_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
        echo = {"grid": {k: (list(map(str, v)) if k == "checkpoints" else v) for k, v in asdict(grid).items()}}
        write_manifest(out_dir, echo, [out_dir / "bounds.csv", out_dir / "ee_bounds.csv", report_path])
    return ge, ee, report


SPARSITY_COLUMNS = [
    "rho", "sparsity", "B0_empirical", "B0_analytic", "arch", "L", "m", "lambda",
    "B", "T", "r_star", "ee_bound", "valid",
]


def run_sparsity_sweep(config: ProblemConfig, rhos, grid: BoundGrid, m_probe: int = 1000, out_dir=None) -> pd.DataFrame:
    """Measure B0 at each sparsity rate and tabulate the ISTA/ReLU EE bounds it implies."""
    rows = []
    for rho in _nonempty(rhos, "rhos"):
        cfg = replace(config, rho=float(rho))
        sensing = _sensing(cfg)
        data = _dataset(cfg, m_probe, "train", ("sparsity-probe",))
        b0 = problem.bound_B0(sensing, data, rho=cfg.rho)
        for B, lam, m, L, T in itertools.product(grid.B, grid.lambdas, grid.m_values, grid.depths, grid.T_values):
            inp = BoundInputs(B0=b0.empirical, B=B, lam=lam, m=m, L=L, T=T, **dict(grid.constants(), n_x=cfg.n_x))
            for arch in ("ISTA", "RELU"):
                report = bounds.ee_fixed_point(arch, inp)
                rows.append({
                    "rho": cfg.rho, "sparsity": cfg.sparsity, "B0_empirical": b0.empirical,
                    "B0_analytic": b0.analytic, "arch": arch, "L": L, "m": m, "lambda": lam,
                    "B": B, "T": T, "r_star": report.value,
                    "ee_bound": bounds.ee_bound(report.value, inp.C, inp.s, m, cfg.n_x),
                    "valid": report.valid,
                })
    table = pd.DataFrame(rows, columns=SPARSITY_COLUMNS)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "sparsity.csv"
        table.to_csv(path, index=False)
        echo = {"problem": asdict(config), "rhos": list(rhos), "m_probe": m_probe}
        write_manifest(out_dir, echo, [path])
    return table


_RC_KEYS = {"classes", "lambdas", "m_values", "n", "rc", "problem", "estimate_T"}


@dataclass(frozen=True)
class RcTableSpec:
    classes: tuple = ({"arch": "LINEAR"},)
    lambdas: tuple = (0.0, 0.1, 0.5, 2.0)
    m_values: tuple = (10,)
    n: int = 5
    rc: RcConfig = field(default_factory=RcConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    estimate_T: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "RcTableSpec":
        settings.reject_unknown_keys(data, _RC_KEYS, "rc config")
        data = dict(data)
        problem_data = {"master_seed": settings.MASTER_SEED, **data.pop("problem", {})}
        return cls(
            classes=tuple(data.pop("classes", cls.classes)),
            lambdas=tuple(data.pop("lambdas", cls.lambdas)),
            m_values=tuple(data.pop("m_values", cls.m_values)),
            rc=RcConfig.from_dict(data.pop("rc", {})),
            problem=ProblemConfig.from_dict(problem_data),
            **data,
        )


def _class_label(spec: ClassSpec) -> str:
    if spec.arch is ClassArch.LINEAR:
        return "LINEAR"
    return f"{spec.arch.value}-L{spec.L}-j{spec.j}"


def rc_inputs(table: RcTableSpec, spec: ClassSpec, m: int) -> np.ndarray:
    if spec.arch is ClassArch.LINEAR:
        return child_stream(table.problem.master_seed, "rc-inputs", m).standard_normal((m, table.n))
    return _dataset(table.problem, m, "train", ("rc", m)).ys


def run_rc_table(table: RcTableSpec, out_dir=None) -> pd.DataFrame:
    rows = []
    columns = RC_COLUMNS + (["T_heuristic"] if table.estimate_T else [])
    for entry in table.classes:
        entry = dict(entry)
        if ClassArch(entry.get("arch", "LINEAR")) is not ClassArch.LINEAR:
            entry["sensing"] = _sensing(table.problem)
        spec = ClassSpec(**entry)
        for m, lam in itertools.product(table.m_values, table.lambdas):
            Y = rc_inputs(table, spec, m)
            check = rademacher.lemma1_check(spec, Y, lam, table.rc)
            row = {
                "class": _class_label(spec), "lambda": lam, "m": m,
                "mean": check.rc_thresholded.mean, "std_error": check.rc_thresholded.std_error,
                "gap": check.gap, "base_mean": check.rc_base.mean,
                "gap_std_error": check.gap_std_error, "implied_T": check.implied_T,
            }
            if table.estimate_T:
                row["T_heuristic"] = rademacher.estimate_T_indicator(spec, Y, lam, table.rc).value
            rows.append(row)
    frame = pd.DataFrame(rows, columns=columns)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "rc.csv"
        frame.to_csv(path, index=False)
        echo = {
            "classes": [dict(c) for c in table.classes], "lambdas": list(table.lambdas),
            "m_values": list(table.m_values), "n": table.n, "rc": asdict(table.rc),
            "problem": asdict(table.problem), "estimate_T": table.estimate_T,
            "note": rademacher.LOWER_BOUND_NOTE,
        }
        write_manifest(out_dir, echo, [path])
    return frame
