import numpy as np
import pandas as pd
import pytest

import networks
import numerics
import problem
from networks import Arch, BiasMode, DimensionError, NetworkParams
from problem import ProblemConfig
from rng import child_stream


def _params(arch, Ws, lam=0.1, gamma=1.0, **kwargs):
    return NetworkParams(arch=arch, L=len(Ws), lam=lam, W1=tuple(Ws), gamma=gamma, **kwargs)


def test_ista_dead_zone(small_sensing):
    n_x = 16
    y = np.zeros(8)
    y[0] = 0.05
    b = y @ small_sensing.A
    assert np.max(np.abs(b)) <= 0.2
    params = _params(Arch.ISTA, [np.zeros((n_x, n_x))], lam=0.2)
    trace = networks.forward(params, small_sensing, y)
    np.testing.assert_array_equal(trace.prediction, np.zeros(n_x))


def test_ista_lambda_zero_is_affine(small_sensing, rng):
    Ws = [rng.normal(scale=0.3, size=(16, 16)) for _ in range(3)]
    params = _params(Arch.ISTA, Ws, lam=0.0)
    y = rng.normal(size=8)
    b = y @ small_sensing.A
    h = b
    for W in Ws:
        h = W @ h + b
    np.testing.assert_allclose(networks.forward(params, small_sensing, y).h[-1], h, atol=1e-12)


def test_admm_single_layer_by_hand(small_sensing, rng):
    gamma, lam = 0.7, 0.15
    params = _params(Arch.ADMM, [np.zeros((16, 16))], lam=lam, gamma=gamma)
    y = rng.normal(size=8)
    b = y @ small_sensing.A
    trace = networks.forward(params, small_sensing, y)
    s = numerics.soft_threshold(b, lam)
    np.testing.assert_allclose(trace.h[1], b, atol=1e-15)
    np.testing.assert_allclose(trace.z[1], s, atol=1e-15)
    np.testing.assert_allclose(trace.u[1], -gamma * (b - s), atol=1e-15)
    np.testing.assert_array_equal(trace.z[0], np.zeros(16))
    np.testing.assert_array_equal(trace.u[0], np.zeros(16))


def test_admm_zero_weights_follow_scalar_recurrence(small_sensing, rng):
    gamma, lam = 1.3, 0.05
    y = rng.normal(size=8)
    b = y @ small_sensing.A
    out = networks.classical_admm(small_sensing, y, lam, gamma, np.zeros((16, 16)), 6)

    # with W = 0 every h^l equals b
    u = np.zeros(16)
    for _ in range(6):
        z = numerics.soft_threshold(b - u, lam)
        u = u - gamma * (b - z)
    np.testing.assert_allclose(out, b, atol=1e-15)
    params = networks.tied_params(Arch.ADMM, np.zeros((16, 16)), 6, lam, gamma)
    np.testing.assert_allclose(networks.forward(params, small_sensing, y).u[-1], u, atol=1e-14)


def test_oracle_equivalence(sensing64):
    """Tied classical weights reproduce ISTA and ADMM exactly, L = 1..10."""
    A = sensing64.A
    W = np.eye(64) - A.T @ A
    config = ProblemConfig()
    data = problem.generate_dataset(config, sensing64, 20, stream=("oracle",))
    for L in range(1, 11):
        ista = networks.tied_params(Arch.ISTA, W, L, 0.1)
        admm = networks.tied_params(Arch.ADMM, W, L, 0.1, gamma=0.8)
        for y in data.ys:
            np.testing.assert_allclose(
                networks.forward(ista, sensing64, y).h[-1], networks.classical_ista(sensing64, y, 0.1, L),
                rtol=0, atol=1e-12,
            )
            np.testing.assert_allclose(
                networks.forward(admm, sensing64, y).h[-1],
                networks.classical_admm(sensing64, y, 0.1, 0.8, W, L),
                rtol=0, atol=1e-12,
            )


def test_batch_forward_matches_single(small_sensing, rng):
    params = networks.init_weights(Arch.ISTA, small_sensing, 0.05, rng, L=3, bias_mode=BiasMode.LEARNED)
    ys = rng.normal(size=(5, 8))
    batch = networks.forward(params, small_sensing, ys).h[-1]
    for i, y in enumerate(ys):
        np.testing.assert_allclose(batch[i], networks.forward(params, small_sensing, y).h[-1], atol=1e-14)


def test_zero_observation_gives_zero(small_sensing):
    W = np.eye(16) - small_sensing.gram
    np.testing.assert_array_equal(networks.classical_ista(small_sensing, np.zeros(8), 0.1, 5), np.zeros(16))
    np.testing.assert_array_equal(networks.classical_admm(small_sensing, np.zeros(8), 0.1, 1.0, W, 5), np.zeros(16))


def test_ista_recovers_sparse_signal_without_noise():
    config = ProblemConfig(n_x=16, n_y=8, rho=0.125, noise_std=0.0, master_seed=9)
    sensing = problem.build_sensing_matrix(config)
    x = np.zeros(16)
    x[3] = 0.8
    y = sensing.A @ x
    out = networks.classical_ista(sensing, y, 1e-6, 20000)
    np.testing.assert_allclose(sensing.A @ out, y, atol=1e-4)


def test_lambda_zero_ista_equals_relu_on_nonnegative_path():
    sensing = problem.SensingMatrix(A=np.hstack([np.eye(4), np.zeros((4, 4))]), row_indices=(0, 1, 2, 3), scale=1.0)
    W = np.abs(np.random.default_rng(4).normal(scale=0.1, size=(8, 8)))
    y = np.random.default_rng(5).uniform(0.1, 1.0, size=4)
    ista = networks.tied_params(Arch.ISTA, W, 3, 0.0)
    relu = networks.tied_params(Arch.RELU, W, 3, 0.0)
    np.testing.assert_array_equal(
        networks.forward(ista, sensing, y).h[-1], networks.forward(relu, sensing, y).h[-1]
    )


def test_dead_zone_persists(small_sensing):
    W = np.full((16, 16), 0.001)
    lam = 0.5
    y = np.full(8, 0.01)
    b = y @ small_sensing.A
    h0 = numerics.soft_threshold(b, lam)
    assert numerics.linf_norm(W) * np.max(np.abs(h0)) + np.max(np.abs(b)) <= lam
    trace = networks.forward(networks.tied_params(Arch.ISTA, W, 4, lam), small_sensing, y)
    for h in trace.h[1:]:
        np.testing.assert_array_equal(h, np.zeros(16))


def test_clip_only_changes_prediction(small_sensing, rng):
    W = 3.0 * np.eye(16)
    params = _params(Arch.ISTA, [W, W], lam=0.0, clip_output=True)
    y = 5.0 * rng.normal(size=8)
    trace = networks.forward(params, small_sensing, y)
    assert np.max(np.abs(trace.h[-1])) > 1.0
    np.testing.assert_array_equal(trace.prediction, np.clip(trace.h[-1], -1, 1))


def test_trace_shapes(small_sensing, rng):
    for arch in Arch:
        params = networks.init_weights(arch, small_sensing, 0.01, rng, L=4)
        trace = networks.forward(params, small_sensing, rng.normal(size=8))
        assert trace.depth == 4
        assert len(trace.h) == 5
        assert all(h.shape == (16,) for h in trace.h)


def test_dimension_errors(small_sensing):
    params = _params(Arch.ISTA, [np.eye(16)])
    with pytest.raises(DimensionError):
        networks.forward(params, small_sensing, np.zeros(9))
    with pytest.raises(DimensionError):
        _params(Arch.ISTA, [np.eye(16), np.eye(15)])
    with pytest.raises(ValueError):
        _params(Arch.ADMM, [np.eye(16)], gamma=0.0)
    with pytest.raises(ValueError):
        NetworkParams(arch=Arch.ISTA, L=1, lam=0.1, W1=(np.eye(16),), bias_mode=BiasMode.LEARNED)


def test_init_weights(small_sensing):
    classical = np.eye(16) - small_sensing.gram
    exact = networks.init_weights(Arch.ISTA, small_sensing, 0.0, child_stream(0, "init"), L=5)
    for W in exact.W1:
        np.testing.assert_array_equal(W, classical)
    y = np.random.default_rng(0).normal(size=8)
    np.testing.assert_allclose(
        networks.forward(exact, small_sensing, y).h[-1], networks.classical_ista(small_sensing, y, 0.1, 5), atol=1e-12
    )

    learned = networks.init_weights(Arch.RELU, small_sensing, 0.1, child_stream(0, "init"), L=2,
                                    bias_mode="learned")
    np.testing.assert_array_equal(learned.W2[0], small_sensing.A.T)
    assert np.all(np.abs(learned.W1[1] - classical) <= 0.1 + 1e-12)

    again = networks.init_weights(Arch.RELU, small_sensing, 0.1, child_stream(0, "init"), L=2,
                                  bias_mode="learned")
    np.testing.assert_array_equal(again.W1[1], learned.W1[1])

    for seed in range(100):
        params = networks.init_weights(Arch.ISTA, small_sensing, 0.5, child_stream(seed, "init"), L=2)
        norms = networks.weight_norms(params)
        assert all(np.isfinite(norms.linf)) and np.isfinite(norms.spectral_first)


def test_weight_norms():
    params = networks.tied_params(Arch.ISTA, np.eye(4), 3, 0.1)
    norms = networks.weight_norms(params)
    assert norms.linf == (1.0, 1.0, 1.0)
    assert norms.spectral_first == pytest.approx(1.0, abs=1e-12)

    M = np.random.default_rng(5).normal(size=(4, 4))
    params = _params(Arch.ISTA, [M, 2 * M])
    norms = networks.weight_norms(params)
    assert norms.linf[1] == pytest.approx(2 * norms.linf[0], rel=1e-15)
    oracle = numerics.matrix_norms(M)
    assert norms.linf[0] == oracle.linf
    assert norms.spectral_first == oracle.spectral


def test_project_weights_examples():
    feasible = networks.tied_params(Arch.ISTA, 0.1 * np.eye(2), 2, 0.1)
    projected = networks.project_weights(feasible, 1.0, 1.0)
    for before, after in zip(feasible.W1, projected.W1):
        np.testing.assert_array_equal(before, after)

    row = _params(Arch.ISTA, [np.eye(2), np.array([[2.0, 2.0], [0.5, 0.0]])])
    projected = networks.project_weights(row, 2.0, 10.0)
    np.testing.assert_allclose(projected.W1[1][0], [1.0, 1.0])
    np.testing.assert_array_equal(projected.W1[1][1], [0.5, 0.0])


def test_project_weights_caps_and_idempotence(rng):
    for _ in range(50):
        params = _params(Arch.RELU, [rng.normal(size=(6, 6)) for _ in range(3)])
        B, B1 = float(rng.uniform(0.5, 3)), float(rng.uniform(0.2, 2))
        projected = networks.project_weights(params, B, B1)
        norms = networks.weight_norms(projected)
        assert max(norms.linf) <= B + 1e-12
        assert norms.spectral_first <= B1 * (1 + 1e-10)
        twice = networks.project_weights(projected, B, B1)
        for a, b in zip(projected.W1, twice.W1):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=0)


def test_checkpoint_round_trip(tmp_path, small_sensing, rng):
    params = networks.init_weights(Arch.ADMM, small_sensing, 0.05, rng, L=3, lam=0.2, gamma=0.5,
                                   bias_mode=BiasMode.LEARNED, clip_output=True)
    path = networks.save_params(params, tmp_path / "params.bin")
    loaded = networks.load_params(path)
    assert (loaded.arch, loaded.L, loaded.lam, loaded.gamma) == (Arch.ADMM, 3, 0.2, 0.5)
    assert loaded.bias_mode is BiasMode.LEARNED and loaded.clip_output
    for a, b in zip(params.W1 + params.W2, loaded.W1 + loaded.W2):
        np.testing.assert_array_equal(a, b)


def test_export_norms_csv(tmp_path):
    params = networks.tied_params(Arch.ISTA, 2 * np.eye(3), 2, 0.1)
    table = pd.read_csv(networks.export_norms_csv(params, tmp_path / "norms.csv"))
    assert list(table.columns) == ["layer", "linf", "spectral"]
    assert table.linf.tolist() == [2.0, 2.0]
    assert table.spectral.iloc[0] == pytest.approx(2.0)
    assert np.isnan(table.spectral.iloc[1])
