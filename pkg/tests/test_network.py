import math

import numpy as np
import pytest

from meshsurrogate import (
    Graph,
    adam_step,
    backward,
    compute_metrics,
    evaluate,
    gcn_layer,
    global_pool,
    gnn_layer,
    load_checkpoint,
    model_forward,
    mse_loss,
    save_checkpoint,
    train,
)
from meshsurrogate.graphs import DatasetSplit
from meshsurrogate.labels import LabelScaling, scale_labels
from meshsurrogate.network import (
    AdamState,
    EarlyStopping,
    ModelConfig,
    ModelParams,
    TrainConfig,
    _forward,
    adjacency_matrix,
    init_params,
    zeros_like_params,
)


def tiny_graph(seed=0, n=6):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.05, 0.95, (n, 3))
    edges = np.array([[i, (i + 1) % n] for i in range(n)] + [[0, n // 2]])
    return Graph(coords, edges)


TINY = ModelConfig(latent_dim=5, dense_dims=(4, 3))


def test_gnn_layer_identity():
    h = np.abs(np.random.default_rng(0).normal(size=(4, 4)))
    out = gnn_layer(h, np.eye(4), np.eye(4))
    assert np.allclose(out, h)


def test_gnn_layer_zero_adjacency():
    out = gnn_layer(np.ones((3, 2)), np.zeros((3, 3)), np.ones((2, 2)))
    assert np.all(out == 0.0)


def test_gnn_layer_two_node_arithmetic():
    a = np.array([[0, 5], [5, 0]], float)
    h = np.eye(2)
    out = gnn_layer(h, a, np.eye(2), apply_activation=False)
    assert np.allclose(out, [[0, 5], [5, 0]])


def test_gnn_layer_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        gnn_layer(np.ones((3, 2)), np.ones((2, 2)), np.ones((2, 2)))


def test_gcn_layer_isolated_node():
    h = np.array([[-2.0, 3.0]])
    out = gcn_layer(h, np.array([[1.0]]), np.eye(2))
    assert np.allclose(out, [[0.0, 3.0]])


def test_gcn_layer_two_connected():
    a = np.full((2, 2), 0.5)
    out = gcn_layer(np.array([[2.0], [4.0]]), a, np.eye(1), apply_activation=False)
    assert np.allclose(out, [[3.0], [3.0]])


def test_gcn_layer_path_matches_direct():
    g = Graph(np.zeros((3, 3)), [[0, 1], [1, 2]])
    a = adjacency_matrix(g, "gcn-normalized")
    h = np.arange(6, dtype=float).reshape(3, 2)
    w = np.array([[1.0, 0.5], [-0.25, 2.0]])
    direct = np.maximum(a @ h @ w, 0.0)
    assert np.allclose(gcn_layer(h, a, w), direct, atol=1e-12)


def test_global_pool():
    assert np.allclose(global_pool(np.array([[1.0, 3.0], [3.0, 5.0]])), [2.0, 4.0])
    assert np.allclose(global_pool(np.array([[7.0, 1.0]])), [7.0, 1.0])
    with pytest.raises(ValueError):
        global_pool(np.empty((0, 3)))


def test_global_pool_permutation_invariant():
    h = np.random.default_rng(0).normal(size=(8, 4))
    perm = np.random.default_rng(1).permutation(8)
    assert np.allclose(global_pool(h), global_pool(h[perm]))


def test_model_forward_zero_weights():
    g = tiny_graph()
    params = init_params(TINY, np.random.default_rng(0))
    zero = zeros_like_params(params)
    assert model_forward(g, zero, "weighted-l2") == 0.0


def test_model_forward_permutation_invariant():
    g = tiny_graph(3)
    params = init_params(TINY, np.random.default_rng(4))
    pred = model_forward(g, params, "gcn-normalized")
    perm = np.random.default_rng(5).permutation(g.n_nodes)
    inv = np.argsort(perm)
    g2 = Graph(g.coords[perm], np.sort(inv[g.edges], axis=1))
    pred2 = model_forward(g2, params, "gcn-normalized")
    assert pred == pytest.approx(pred2, abs=1e-12)


def test_model_forward_matches_layer_composition():
    g = tiny_graph(7, n=4)
    params = init_params(TINY, np.random.default_rng(8))
    for policy in ("weighted-l2", "gcn-normalized"):
        a = adjacency_matrix(g, policy)
        h = g.coords
        for w in params.graph_weights:
            h = gnn_layer(h, a, w)
        v = global_pool(h)
        for i, (w, b) in enumerate(zip(params.dense_weights, params.dense_biases)):
            z = v @ w + b
            v = np.maximum(z, 0.0) if i < len(params.dense_weights) - 1 else z
        assert model_forward(g, params, policy) == pytest.approx(float(v[0]), abs=1e-12)


def test_mse_loss_examples():
    assert mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse_loss([0.0], [2.0]) == 4.0
    rng = np.random.default_rng(0)
    y, yh = rng.normal(size=50), rng.normal(size=50)
    direct = sum((a - b) ** 2 for a, b in zip(y, yh)) / 50
    assert mse_loss(y, yh) == pytest.approx(direct, abs=1e-12)


def test_backward_zero_error_sample():
    g = tiny_graph(1)
    params = init_params(TINY, np.random.default_rng(2))
    a = adjacency_matrix(g, "weighted-l2")
    pred = _forward(a, g.coords, params)
    grads, _ = backward(a, g.coords, params, pred)
    assert all(np.all(arr == 0.0) for arr in grads.arrays())


def test_backward_single_dense_layer_analytic():
    # model with no graph mixing: identity adjacency, identity graph weights
    cfg = ModelConfig(in_features=3, latent_dim=3, n_graph_layers=1, dense_dims=())
    params = init_params(cfg, np.random.default_rng(0))
    params.graph_weights[0] = np.eye(3)
    x = np.array([[0.2, 0.5, 0.9]])
    a = np.eye(1)
    w = params.dense_weights[0]
    y = 0.1
    grads, pred = backward(a, x, params, y)
    assert pred == pytest.approx(float((x[0] @ w + params.dense_biases[0])[0]))
    expected = 2.0 * (pred - y) * x[0]
    assert np.allclose(grads.dense_weights[0][:, 0], expected, atol=1e-12)
    assert grads.dense_biases[0][0] == pytest.approx(2.0 * (pred - y), abs=1e-12)


def _finite_difference_check(policy, seed, h=1e-5):
    g = tiny_graph(seed)
    params = init_params(TINY, np.random.default_rng(seed + 100))
    a = adjacency_matrix(g, policy)
    y = 0.37
    grads, pred = backward(a, g.coords, params, y)
    max_rel = 0.0
    for arr, garr in zip(params.arrays(), grads.arrays()):
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            fp = (_forward(a, g.coords, params) - y) ** 2
            arr[idx] = orig - h
            fm = (_forward(a, g.coords, params) - y) ** 2
            arr[idx] = orig
            fd = (fp - fm) / (2 * h)
            an = garr[idx]
            denom = max(abs(fd), abs(an), 1e-8)
            max_rel = max(max_rel, abs(fd - an) / denom)
    return max_rel, pred


@pytest.mark.parametrize("policy", ["weighted-l2", "gcn-normalized"])
def test_backward_matches_finite_differences(policy):
    preds = []
    for seed in range(5):
        max_rel, pred = _finite_difference_check(policy, seed)
        assert max_rel <= 1e-4
        preds.append(pred)
    assert any(p != 0.0 for p in preds)  # a dead model would pass vacuously


def test_adam_zero_gradient_keeps_params():
    params = init_params(TINY, np.random.default_rng(0))
    before = [w.copy() for w in params.arrays()]
    state = AdamState.for_params(params)
    adam_step(params, zeros_like_params(params), state, lr=0.1)
    assert all(np.array_equal(a, b) for a, b in zip(before, params.arrays()))


def test_adam_first_step_magnitude():
    params = ModelParams([np.array([[1.0]])], [], [])
    grads = ModelParams([np.array([[0.003]])], [], [])
    state = AdamState.for_params(params)
    adam_step(params, grads, state, lr=0.01)
    # first bias-corrected step is ~lr * sign(g)
    assert params.graph_weights[0][0, 0] == pytest.approx(1.0 - 0.01, rel=1e-4)


def test_adam_three_step_scalar_recurrence():
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    gs = [0.4, -0.2, 0.7]
    p = 1.0
    m = v = 0.0
    for t, g in enumerate(gs, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    params = ModelParams([np.array([[1.0]])], [], [])
    state = AdamState.for_params(params)
    for g in gs:
        adam_step(params, ModelParams([np.array([[g]])], [], []), state, lr=lr)
    assert params.graph_weights[0][0, 0] == pytest.approx(p, abs=1e-12)


def _overfit_fixture():
    rng = np.random.default_rng(11)
    graphs, labels = [], []
    for _ in range(6):
        n = int(rng.integers(5, 9))
        coords = rng.uniform(0, 1, (n, 3))
        edges = np.array([[j, (j + 1) % n] for j in range(n)])
        graphs.append(Graph(coords, edges))
        labels.append(float(coords.mean()))
    split = DatasetSplit(np.arange(5), np.array([5]), np.array([5]), seed=0)
    return graphs, np.array(labels), split


def test_train_overfits_small_fixture():
    graphs, labels, split = _overfit_fixture()
    cfg = ModelConfig(latent_dim=16, dense_dims=(8, 4))
    tc = TrainConfig(learning_rate=0.002, max_epochs=2000, patience=2000, seed=3)
    model = train(graphs, labels, split, cfg, tc)
    assert min(tr for _, tr, _ in model.history) < 1e-4


def test_train_deterministic():
    graphs, labels, split = _overfit_fixture()
    cfg = ModelConfig(latent_dim=8, dense_dims=(4,))
    tc = TrainConfig(learning_rate=0.01, max_epochs=30, patience=30, seed=3)
    a = train(graphs, labels, split, cfg, tc)
    b = train(graphs, labels, split, cfg, tc)
    assert a.history == b.history


def test_train_early_stopping_contract():
    graphs, labels, split = _overfit_fixture()
    cfg = ModelConfig(latent_dim=8, dense_dims=(4,))
    tc = TrainConfig(learning_rate=0.01, max_epochs=500, patience=8, seed=3)
    model = train(graphs, labels, split, cfg, tc)
    assert model.stopped_epoch - model.best_epoch <= tc.patience
    # returned params reproduce the recorded best validation MSE
    from meshsurrogate.network import _forward as fwd

    mats = adjacency_matrix(graphs[5], tc.adjacency)
    val = (fwd(mats, graphs[5].coords, model.params) - labels[5]) ** 2
    assert val == pytest.approx(model.best_val_mse, rel=1e-12)


def test_early_stopper_monotone_worsening_trace():
    stopper = EarlyStopping(patience=5)
    stopped_at = None
    for epoch, value in enumerate([1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7], start=1):
        if stopper.update(epoch, value):
            stopped_at = epoch
            break
    assert stopped_at == 6  # best at epoch 1, stops patience epochs later
    assert stopper.best_epoch == 1
    assert stopped_at - stopper.best_epoch == 5


def test_early_stopper_patience_one_stops_at_first_non_improvement():
    stopper = EarlyStopping(patience=1)
    assert not stopper.update(1, 0.5)
    assert stopper.update(2, 0.6)


def test_train_config_validation():
    with pytest.raises(ValueError, match="patience"):
        TrainConfig(max_epochs=10, patience=20)
    with pytest.raises(ValueError, match="batch"):
        TrainConfig(batch_size=4)
    with pytest.raises(ValueError, match="adjacency"):
        TrainConfig(adjacency="dense")


def test_metrics_perfect_predictions():
    m = compute_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert m.r2 == 1.0 and m.rmse == 0.0 and m.mape == 0.0


def test_metrics_mean_predictor_r2_zero():
    y = np.array([1.0, 2.0, 3.0, 6.0])
    m = compute_metrics(y, np.full(4, y.mean()))
    assert m.r2 == pytest.approx(0.0, abs=1e-12)


def test_metrics_hand_case():
    m = compute_metrics([1.0, 2.0], [1.1, 1.8])
    assert m.mape == pytest.approx(10.0, abs=1e-9)
    assert m.rmse == pytest.approx(math.sqrt(0.025), abs=1e-12)


def test_metrics_rmse_squared_is_mse():
    rng = np.random.default_rng(0)
    y, yh = rng.normal(size=40) + 5, rng.normal(size=40)
    m = compute_metrics(y, yh)
    assert m.rmse**2 == pytest.approx(m.mse, abs=1e-12)
    assert np.all(m.abs_errors >= 0)


def test_metrics_zero_label_rejected():
    with pytest.raises(ValueError, match="sample 1"):
        compute_metrics([1.0, 0.0], [1.0, 1.0])


def test_evaluate_inverse_scales_to_physical_units():
    graphs, labels, split = _overfit_fixture()
    physical = labels * 120.0 + 15.0
    scaled, record = scale_labels(physical, split.train)
    cfg = ModelConfig(latent_dim=16, dense_dims=(8, 4))
    tc = TrainConfig(learning_rate=0.002, max_epochs=400, patience=400, seed=3)
    model = train(graphs, scaled, split, cfg, tc)
    from meshsurrogate.graphs import fit_feature_scaling

    model.feature_scaling = fit_feature_scaling(graphs, split.train)
    model.label_scaling = record
    m = evaluate(model, [graphs[int(i)] for i in split.train], physical[split.train])
    # training fit is good, so physical-unit predictions sit near the labels
    assert m.mape < 20.0
    assert m.abs_errors.shape == (5,)


def test_checkpoint_round_trip(tmp_path):
    graphs, labels, split = _overfit_fixture()
    cfg = ModelConfig(latent_dim=8, dense_dims=(4,))
    tc = TrainConfig(learning_rate=0.01, max_epochs=20, patience=20, seed=3)
    model = train(graphs, labels, split, cfg, tc)
    model.label_scaling = LabelScaling(0.0, 1.0)
    from meshsurrogate.graphs import fit_feature_scaling

    model.feature_scaling = fit_feature_scaling(graphs, split.train)
    path = tmp_path / "ckpt.json"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.best_epoch == model.best_epoch
    assert loaded.history[0][0] == 1
    g = graphs[0]
    a = model_forward(g, model.params, tc.adjacency)
    b = model_forward(g, loaded.params, tc.adjacency)
    assert b == pytest.approx(a, rel=1e-6)


def test_train_rejects_empty_split():
    graphs, labels, _ = _overfit_fixture()
    bad = DatasetSplit(np.arange(5), np.array([], dtype=int), np.array([5]), seed=0)
    with pytest.raises(ValueError, match="non-empty"):
        train(graphs, labels, bad, TINY, TrainConfig(max_epochs=5, patience=5))
