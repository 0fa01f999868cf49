import math

import numpy as np
import pandas as pd
import pytest

import numerics
import problem
from problem import Dataset, ProblemConfig
from rng import child_stream


def test_dft_rows():
    rows = problem.dft_real_rows(4, [0, 1])
    np.testing.assert_allclose(rows[0], [1.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(rows[1], [1.0, 0.0, -1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("n_x,n_y,seed", [(64, 32, 0), (16, 8, 3), (10, 3, 11), (33, 20, 5)])
def test_sensing_matrix_has_unit_spectral_norm(n_x, n_y, seed):
    config = ProblemConfig(n_x=n_x, n_y=n_y, master_seed=seed)
    sensing = problem.build_sensing_matrix(config)
    assert sensing.A.shape == (n_y, n_x)
    assert len(set(sensing.row_indices)) == n_y
    assert np.linalg.norm(sensing.A, 2) == pytest.approx(1.0, abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        ProblemConfig(n_x=8, n_y=8)
    with pytest.raises(ValueError):
        ProblemConfig(n_x=8, n_y=4, rho=0.1)
    with pytest.raises(ValueError):
        ProblemConfig(noise_std=-1.0)
    with pytest.raises(ValueError):
        ProblemConfig(rho=0.0)


def test_sample_target_sparsity():
    config = ProblemConfig()
    assert config.sparsity == 9
    rng = child_stream(0, "test-targets")
    for _ in range(200):
        x = problem.sample_target(config, rng)
        assert np.count_nonzero(x) == 9
        assert np.all(np.abs(x) <= 1.0)

    dense = ProblemConfig(n_x=8, n_y=4, rho=1.0)
    assert np.count_nonzero(problem.sample_target(dense, rng)) == 8


def test_sample_target_mean_is_zero():
    config = ProblemConfig(n_x=8, n_y=4, rho=0.5)
    rng = child_stream(1, "moments")
    draws = np.stack([problem.sample_target(config, rng) for _ in range(20000)])
    # each entry is nonzero with probability 1/2 and then uniform on [-1, 1]
    sigma = math.sqrt(0.5 / 3.0) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0)) < 4 * sigma)


def test_generate_dataset_noiseless(small_sensing):
    config = ProblemConfig(n_x=16, n_y=8, rho=0.25, noise_std=0.0, master_seed=3)
    data = problem.generate_dataset(config, small_sensing, 25)
    np.testing.assert_array_equal(data.ys, data.xs @ small_sensing.A.T)


def test_noise_half_width_and_std(small_config, small_sensing):
    assert small_config.noise_half_width == pytest.approx(0.17320508075688773)
    data = problem.generate_dataset(small_config, small_sensing, 12500)
    noise = data.ys - data.xs @ small_sensing.A.T
    assert np.all(np.abs(noise) <= small_config.noise_half_width + 1e-12)
    assert noise.std() == pytest.approx(0.1, rel=0.01)


def test_generate_dataset_is_deterministic(small_config, small_sensing):
    a = problem.generate_dataset(small_config, small_sensing, 10, stream=("x", 1))
    b = problem.generate_dataset(small_config, small_sensing, 10, stream=("x", 1))
    c = problem.generate_dataset(small_config, small_sensing, 10, stream=("x", 2))
    np.testing.assert_array_equal(a.xs, b.xs)
    np.testing.assert_array_equal(a.ys, b.ys)
    assert not np.array_equal(a.xs, c.xs)
    assert a.config_fingerprint == b.config_fingerprint


def test_generate_dataset_rejects_bad_input(small_config, small_sensing):
    with pytest.raises(ValueError):
        problem.generate_dataset(small_config, small_sensing, 0)
    with pytest.raises(ValueError):
        problem.generate_dataset(ProblemConfig(), small_sensing, 5)


def test_bound_B0_examples(small_sensing):
    A = small_sensing.A
    zero = Dataset(np.zeros((1, 16)), np.zeros((1, 8)), "f" * 64)
    assert problem.bound_B0(small_sensing, zero).empirical == 0.0

    x = np.zeros((1, 16))
    x[0, 0] = 1.0
    spike = Dataset(x, x @ A.T, "f" * 64)
    gram = A.T @ A
    assert problem.bound_B0(small_sensing, spike).empirical == pytest.approx(np.abs(gram[:, 0]).sum(), rel=1e-12)


def test_bound_B0_analytic_dominates():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_x = int(rng.integers(6, 40))
        n_y = int(rng.integers(2, n_x))
        config = ProblemConfig(n_x=n_x, n_y=n_y, rho=float(rng.uniform(0.2, 1.0)),
                               noise_std=float(rng.uniform(0, 0.3)), master_seed=seed)
        sensing = problem.build_sensing_matrix(config)
        data = problem.generate_dataset(config, sensing, 20)
        b0 = problem.bound_B0(sensing, data, rho=config.rho)
        assert b0.analytic >= b0.empirical - 1e-12


def test_dataset_file_round_trip(tmp_path, small_config, small_sensing):
    data = problem.generate_dataset(small_config, small_sensing, 7, role="test")
    path = problem.save_dataset(data, small_config, tmp_path / "data.bin")
    assert path.read_bytes()[:8] == problem.DATASET_MAGIC

    loaded, config = problem.load_dataset(path)
    assert config == small_config
    assert loaded.role == "test"
    assert loaded.config_fingerprint == data.config_fingerprint
    np.testing.assert_array_equal(loaded.xs, data.xs)
    np.testing.assert_array_equal(loaded.ys, data.ys)


def test_load_dataset_rejects_other_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a dataset at all")
    with pytest.raises(ValueError):
        problem.load_dataset(path)
    with pytest.raises(FileNotFoundError):
        problem.load_dataset(tmp_path / "missing.bin")


def test_export_dataset_csv(tmp_path, small_config, small_sensing):
    data = problem.generate_dataset(small_config, small_sensing, 3)
    path = problem.export_dataset_csv(data, tmp_path / "data.csv")
    table = pd.read_csv(path)
    assert list(table.columns) == ["sample_index", "kind", "coord", "value"]
    assert len(table) == 3 * (16 + 8)
    row = table[(table.sample_index == 2) & (table.kind == "y") & (table.coord == 5)]
    assert row.value.iloc[0] == pytest.approx(data.ys[2, 5], rel=1e-15)


def test_spectral_norm_helper_agrees(small_sensing):
    assert numerics.spectral_norm(small_sensing.A) == pytest.approx(1.0, abs=1e-9)
