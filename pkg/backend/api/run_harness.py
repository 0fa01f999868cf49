"""Command-line entry point for dataset generation, training, sweeps and bound tables."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import harness
import networks
import problem
import settings
import training
from harness import BoundGrid, ExperimentSpec, RcTableSpec
from problem import ProblemConfig

_SPARSITY_KEYS = {"problem", "rhos", "m_probe", "grid"}


def _document(path) -> dict:
    return settings.load_config(path) if path else {}


def _experiment(args) -> ExperimentSpec:
    spec = ExperimentSpec.from_dict(_document(args.config))
    return spec.with_overrides(seed=args.seed, workers=args.workers, out_dir=args.out)


def run_gen(args) -> Path:
    spec = _experiment(args)
    out = spec.out_dir
    written = [problem.save_dataset(harness.heldout_set(spec), spec.problem, out / "heldout.bin")]
    for seed in spec.seeds:
        written.append(problem.save_dataset(harness.star_set(spec, seed), spec.problem, out / f"star_s{seed}.bin"))
        for m in spec.m_values:
            dataset = harness.hat_set(spec, seed, m)
            written.append(problem.save_dataset(dataset, spec.problem, out / f"hat_s{seed}_m{m}.bin"))
    if args.csv:
        written.append(problem.export_dataset_csv(harness.heldout_set(spec), out / "heldout.csv"))
    harness.write_manifest(out, spec.to_dict(), written)
    return out


def run_train(args) -> Path:
    """Train one network: the first entry of every list in the config."""
    spec = _experiment(args)
    arch, L, lam = spec.archs[0], spec.depths[0], spec.lambdas[0]
    bias_mode, seed, m = spec.bias_modes[0], spec.seeds[0], spec.m_values[0]
    params, history = harness.fit_network(spec, arch, L, lam, bias_mode, seed, harness.hat_set(spec, seed, m))

    out = spec.out_dir
    written = [
        networks.save_params(params, out / "params.bin"),
        training.export_history_csv(history, out / "history.csv"),
        networks.export_norms_csv(params, out / "norms.csv"),
    ]
    harness.write_manifest(out, spec.to_dict(), written)
    test_loss = training.evaluate(params, harness.sensing_for(spec), harness.heldout_set(spec))
    print(f"{arch.value} L={L} lambda={lam} m={m}: train loss {history[-1]:.6g}, test loss {test_loss:.6g}")
    return out


def run_ee_sweep(args) -> Path:
    spec = _experiment(args)
    results = harness.run_ee_sweep(spec)
    print(f"{sum(r.ok for r in results)} of {len(results)} cells finished")
    return spec.out_dir


def run_depth_sweep(args) -> Path:
    document = _document(args.config)
    spec = ExperimentSpec.from_dict(document).with_overrides(seed=args.seed, workers=args.workers, out_dir=args.out)
    depths = spec.depths if "depths" in document else harness.DEFAULT_SWEEP_DEPTHS
    harness.run_depth_sweep(spec, depths)
    return spec.out_dir


def run_bounds(args) -> Path:
    grid = BoundGrid.from_dict(_document(args.config))
    out = Path(args.out) if args.out else settings.OUTPUT_DIR
    ge, _, _ = harness.run_bound_table(grid, out)
    print(f"{len(ge)} bound rows, {int((~ge['valid'].astype(bool)).sum())} flagged")
    return out


def run_rc(args) -> Path:
    table = RcTableSpec.from_dict(_document(args.config))
    if args.seed is not None:
        table = replace(table, rc=replace(table.rc, seed=args.seed),
                        problem=replace(table.problem, master_seed=args.seed))
    if args.workers is not None:
        table = replace(table, rc=replace(table.rc, workers=args.workers))
    out = Path(args.out) if args.out else settings.OUTPUT_DIR
    harness.run_rc_table(table, out)
    return out


def run_sparsity(args) -> Path:
    document = _document(args.config)
    settings.reject_unknown_keys(document, _SPARSITY_KEYS, "sparsity config")
    problem_data = {"master_seed": settings.MASTER_SEED, **document.get("problem", {})}
    if args.seed is not None:
        problem_data["master_seed"] = args.seed
    out = Path(args.out) if args.out else settings.OUTPUT_DIR
    harness.run_sparsity_sweep(
        ProblemConfig.from_dict(problem_data),
        document.get("rhos", harness.DEFAULT_RHOS),
        BoundGrid.from_dict(document.get("grid", {})),
        m_probe=document.get("m_probe", 1000),
        out_dir=out,
    )
    return out


_RUN_FLAGS = ("seed", "workers")

# name: (handler, help, run flags the handler honours)
COMMANDS = {
    "gen": (run_gen, "Generate and save the held-out, proxy-optimum and training datasets.", _RUN_FLAGS),
    "train": (run_train, "Train a single network and write its checkpoint, history and norms.", _RUN_FLAGS),
    "ee-sweep": (run_ee_sweep, "Run the estimation-error experiment over the configured grid.", _RUN_FLAGS),
    "depth-sweep": (run_depth_sweep, "Repeat the estimation-error experiment for each depth.", _RUN_FLAGS),
    "bounds": (run_bounds, "Tabulate the closed-form GE and EE bounds over a grid.", ()),
    "rc": (run_rc, "Estimate Rademacher complexities with and without output soft-thresholding.", _RUN_FLAGS),
    "sparsity": (run_sparsity, "Measure B0 across sparsity rates and tabulate the EE bounds.", ("seed",)),
}


def _parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Unrolled sparse-recovery networks: experiments and bounds.")
    parser.add_argument("--log-level", help="Overrides UNROLL_LOG_LEVEL.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, flags) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="JSON run configuration.")
        sub.add_argument("--out", help="Output directory (defaults to UNROLL_OUTPUT_DIR).")
        if "seed" in flags:
            sub.add_argument("--seed", type=int, help="Master seed, overriding the config.")
        if "workers" in flags:
            sub.add_argument("--workers", type=int, help="Worker processes, overriding the config.")
        if name == "gen":
            sub.add_argument("--csv", action="store_true", help="Also export the held-out set as CSV.")
    return parser.parse_args(argv)


def main(argv=None) -> Path:
    args = _parse_args(argv)
    settings.configure_logging(args.log_level)
    handler, _, _ = COMMANDS[args.command]
    out = handler(args)
    print(f"Results written to: {out}")
    return out


if __name__ == "__main__":
    main()
