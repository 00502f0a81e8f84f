"""Graph-network regressor built directly on numpy.

Forward rule per graph layer is sigma(A H W) with either the raw
distance-weighted adjacency or the normalized self-loop adjacency. Node
embeddings are mean-pooled and fed through a dense head; training is
per-sample Adam with early stopping on validation loss. Gradients are
hand-written reverse mode and checked against finite differences in the
test suite.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import build_adjacency_gcn, build_adjacency_weighted

ADJACENCY_POLICIES = ("weighted-l2", "gcn-normalized")


@dataclass
class ModelConfig:
    in_features: int = 3
    latent_dim: int = 512
    n_graph_layers: int = 3
    dense_dims: tuple = (500, 200, 25)

    def __post_init__(self):
        self.dense_dims = tuple(int(d) for d in self.dense_dims)
        if self.latent_dim < 1 or self.n_graph_layers < 1 or any(d < 1 for d in self.dense_dims):
            raise ValueError("model dimensions must be positive")


@dataclass
class TrainConfig:
    learning_rate: float = 0.0002
    batch_size: int = 1
    max_epochs: int = 10000
    patience: int = 50
    seed: int = 0
    adjacency: str = "weighted-l2"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("learning rate, max epochs, and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max epochs")
        if self.batch_size != 1:
            raise ValueError("only per-sample updates (batch size 1) are supported")
        if self.adjacency not in ADJACENCY_POLICIES:
            raise ValueError(f"adjacency policy must be one of {ADJACENCY_POLICIES}")


@dataclass
class ModelParams:
    graph_weights: list
    dense_weights: list
    dense_biases: list

    def copy(self):
        return ModelParams(
            [w.copy() for w in self.graph_weights],
            [w.copy() for w in self.dense_weights],
            [b.copy() for b in self.dense_biases],
        )

    def arrays(self):
        return self.graph_weights + self.dense_weights + self.dense_biases


def init_params(config, rng):
    """Glorot-uniform weights (plus-minus sqrt(6/(fan_in+fan_out))), zero biases."""

    def glorot(n_in, n_out):
        bound = math.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-bound, bound, size=(n_in, n_out))

    graph_dims = [config.in_features] + [config.latent_dim] * config.n_graph_layers
    graph_weights = [glorot(graph_dims[i], graph_dims[i + 1]) for i in range(config.n_graph_layers)]
    head_dims = [config.latent_dim] + list(config.dense_dims) + [1]
    dense_weights = [glorot(head_dims[i], head_dims[i + 1]) for i in range(len(head_dims) - 1)]
    dense_biases = [np.zeros(head_dims[i + 1]) for i in range(len(head_dims) - 1)]
    return ModelParams(graph_weights, dense_weights, dense_biases)


def zeros_like_params(params):
    return ModelParams(
        [np.zeros_like(w) for w in params.graph_weights],
        [np.zeros_like(w) for w in params.dense_weights],
        [np.zeros_like(b) for b in params.dense_biases],
    )


def adjacency_matrix(graph, policy):
    if policy == "weighted-l2":
        return build_adjacency_weighted(graph)
    if policy == "gcn-normalized":
        return build_adjacency_gcn(graph)
    raise ValueError(f"unknown adjacency policy {policy!r}")


def gnn_layer(h, a, w, apply_activation=True):
    """sigma(A H W) with the distance-weighted adjacency; sigma = ReLU."""
    if h.shape[0] != a.shape[0] or a.shape[0] != a.shape[1] or h.shape[1] != w.shape[0]:
        raise ValueError(
            f"shape mismatch: H {h.shape}, A {a.shape}, W {w.shape}"
        )
    z = a @ h @ w
    return np.maximum(z, 0.0) if apply_activation else z


def gcn_layer(h, a_norm, w, apply_activation=True):
    """Same propagation applied to the normalized self-loop adjacency."""
    return gnn_layer(h, a_norm, w, apply_activation)


def global_pool(h):
    """Column-wise mean over nodes; permutation invariant and size agnostic."""
    if h.shape[0] == 0:
        raise ValueError("cannot pool an empty node matrix")
    return h.mean(axis=0)


def _forward(a, x, params, cache=False):
    h = x
    ah_list = []
    z_list = []
    h_list = [x]
    for w in params.graph_weights:
        ah = a @ h
        z = ah @ w
        h = np.maximum(z, 0.0)
        if cache:
            ah_list.append(ah)
            z_list.append(z)
            h_list.append(h)
    pooled = h.mean(axis=0)
    v = pooled
    v_list = [pooled]
    dz_masks = []
    n_dense = len(params.dense_weights)
    for i, (w, b) in enumerate(zip(params.dense_weights, params.dense_biases)):
        z = v @ w + b
        if i < n_dense - 1:
            v = np.maximum(z, 0.0)
            if cache:
                dz_masks.append(z > 0)
        else:
            v = z
        if cache:
            v_list.append(v)
    pred = float(v[0])
    if not cache:
        return pred
    return pred, (ah_list, z_list, h_list, v_list, dz_masks)


def model_forward(graph, params, policy):
    """Scalar prediction (in scaled-label space) for one graph."""
    a = adjacency_matrix(graph, policy)
    return _forward(a, graph.coords, params)


def mse_loss(y, y_hat):
    """Mean squared error over paired scalar sequences."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError("mse_loss inputs must have equal length")
    return float(np.mean((y - y_hat) ** 2))


def backward(a, x, params, y):
    """Gradient of the single-sample squared error w.r.t. every parameter.

    Returns (gradients, prediction); gradients mirror the ModelParams tree.
    """
    pred, (ah_list, z_list, h_list, v_list, dz_masks) = _forward(a, x, params, cache=True)
    grads = zeros_like_params(params)
    d_pred = 2.0 * (pred - y)
    dv = np.array([d_pred])
    n_dense = len(params.dense_weights)
    for i in range(n_dense - 1, -1, -1):
        dz = dv if i == n_dense - 1 else dv * dz_masks[i]
        grads.dense_weights[i][:] = np.outer(v_list[i], dz)
        grads.dense_biases[i][:] = dz
        dv = params.dense_weights[i] @ dz
    n = x.shape[0]
    dh = np.broadcast_to(dv / n, (n, dv.shape[0])).copy()
    for i in range(len(params.graph_weights) - 1, -1, -1):
        dz = dh * (z_list[i] > 0)
        grads.graph_weights[i][:] = ah_list[i].T @ dz
        if i > 0:
            dh = a.T @ (dz @ params.graph_weights[i].T)
    return grads, pred


@dataclass
class AdamState:
    step: int = 0
    m: ModelParams = None
    v: ModelParams = None

    @classmethod
    def for_params(cls, params):
        return cls(0, zeros_like_params(params), zeros_like_params(params))


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update (bias-corrected); params and state updated in place."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params, state


class EarlyStopping:
    """Stop after `patience` consecutive epochs without a validation improvement."""

    def __init__(self, patience):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch, value):
        """Record one epoch's validation loss; return True when training should stop."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


@dataclass
class TrainedModel:
    params: ModelParams
    model_config: ModelConfig
    train_config: TrainConfig
    history: list  # rows (epoch, train_mse, val_mse)
    stopped_epoch: int
    best_epoch: int
    best_val_mse: float
    feature_scaling: object = None
    label_scaling: object = None


def train(graphs, labels_scaled, split, model_config, train_config):
    """Per-sample Adam training with validation-loss early stopping.

    ``graphs`` carry already-scaled features; ``labels_scaled`` are in the
    scaled label space. The returned parameters are those of the best
    validation epoch. Deterministic for a fixed TrainConfig seed.
    """
    labels_scaled = np.asarray(labels_scaled, dtype=np.float64)
    if len(split.train) == 0 or len(split.validation) == 0:
        raise ValueError("training needs non-empty train and validation splits")
    policy = train_config.adjacency
    mats = {int(i): adjacency_matrix(graphs[int(i)], policy) for i in np.concatenate([split.train, split.validation])}
    params = init_params(model_config, np.random.default_rng([train_config.seed, 0]))
    order_rng = np.random.default_rng([train_config.seed, 1])
    state = AdamState.for_params(params)
    stopper = EarlyStopping(train_config.patience)
    best_params = params.copy()
    history = []
    stopped_epoch = 0

    def split_mse(indices):
        errs = [
            _forward(mats[int(i)], graphs[int(i)].coords, params) - labels_scaled[int(i)]
            for i in indices
        ]
        return float(np.mean(np.square(errs)))

    for epoch in range(1, train_config.max_epochs + 1):
        order = split.train[order_rng.permutation(len(split.train))]
        for i in order:
            i = int(i)
            grads, pred = backward(mats[i], graphs[i].coords, params, labels_scaled[i])
            if not math.isfinite(pred):
                raise ValueError(
                    f"non-finite prediction at epoch {epoch}, sample {i}; "
                    "training diverged (check learning rate and scaling)"
                )
            adam_step(params, grads, state, train_config.learning_rate)
        train_mse = split_mse(split.train)
        val_mse = split_mse(split.validation)
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise ValueError(f"non-finite loss at epoch {epoch}: train={train_mse}, val={val_mse}")
        history.append((epoch, train_mse, val_mse))
        stopped_epoch = epoch
        improved = val_mse < stopper.best
        stop = stopper.update(epoch, val_mse)
        if improved:
            best_params = params.copy()
        if stop:
            break
    return TrainedModel(
        params=best_params,
        model_config=model_config,
        train_config=train_config,
        history=history,
        stopped_epoch=stopped_epoch,
        best_epoch=stopper.best_epoch,
        best_val_mse=stopper.best,
    )


@dataclass
class Metrics:
    mse: float
    rmse: float
    mape: float
    r2: float
    abs_errors: np.ndarray


def compute_metrics(y, y_hat):
    """Regression metric suite in whatever units the inputs carry."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size == 0:
        raise ValueError("metrics need equal-length non-empty 1D inputs")
    zero = np.nonzero(y == 0.0)[0]
    if zero.size:
        raise ValueError(f"MAPE undefined: ground truth is 0 at sample {int(zero[0])}")
    err = y - y_hat
    mse = float(np.mean(err**2))
    denom = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / denom if denom > 0 else math.nan
    return Metrics(
        mse=mse,
        rmse=math.sqrt(mse),
        mape=100.0 * float(np.mean(np.abs(err / y))),
        r2=r2,
        abs_errors=np.abs(err),
    )


def predict_physical(model, graph_raw):
    """Predict one unscaled graph; returns the label in physical units."""
    if model.feature_scaling is None or model.label_scaling is None:
        raise ValueError("model is missing its scaling records")
    from .graphs import Graph

    scaled = Graph(model.feature_scaling.apply(graph_raw.coords), graph_raw.edges)
    pred = model_forward(scaled, model.params, model.train_config.adjacency)
    return model.label_scaling.invert(pred)


def evaluate(model, graphs_raw, labels_physical):
    """Metrics in physical units: predictions are inverse-scaled before scoring."""
    preds = np.array([predict_physical(model, g) for g in graphs_raw])
    return compute_metrics(np.asarray(labels_physical, dtype=np.float64), preds)


def _sig9(x):
    return float(f"{float(x):.9g}")


def _round_nested(arr):
    return [[_sig9(v) for v in row] for row in np.atleast_2d(arr)]


def save_checkpoint(model, path):
    """Write the model as JSON: config, weights (9 significant digits),
    scaling records, and history."""
    import json

    payload = {
        "schema_version": 1,
        "model": {
            "in_features": model.model_config.in_features,
            "latent_dim": model.model_config.latent_dim,
            "n_graph_layers": model.model_config.n_graph_layers,
            "dense_dims": list(model.model_config.dense_dims),
        },
        "train": {
            "learning_rate": model.train_config.learning_rate,
            "batch_size": model.train_config.batch_size,
            "max_epochs": model.train_config.max_epochs,
            "patience": model.train_config.patience,
            "seed": model.train_config.seed,
            "adjacency": model.train_config.adjacency,
        },
        "graph_weights": [_round_nested(w) for w in model.params.graph_weights],
        "dense_weights": [_round_nested(w) for w in model.params.dense_weights],
        "dense_biases": [[_sig9(v) for v in b] for b in model.params.dense_biases],
        "history": [[int(e), _sig9(tr), _sig9(va)] for e, tr, va in model.history],
        "stopped_epoch": model.stopped_epoch,
        "best_epoch": model.best_epoch,
        "best_val_mse": _sig9(model.best_val_mse),
        "feature_scaling": None
        if model.feature_scaling is None
        else {
            "minimum": [_sig9(v) for v in model.feature_scaling.minimum],
            "maximum": [_sig9(v) for v in model.feature_scaling.maximum],
            "warnings": list(model.feature_scaling.warnings),
        },
        "label_scaling": None
        if model.label_scaling is None
        else {"minimum": _sig9(model.label_scaling.minimum), "maximum": _sig9(model.label_scaling.maximum)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    import json

    from .graphs import FeatureScaling
    from .labels import LabelScaling

    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint schema")
    model_config = ModelConfig(
        in_features=payload["model"]["in_features"],
        latent_dim=payload["model"]["latent_dim"],
        n_graph_layers=payload["model"]["n_graph_layers"],
        dense_dims=tuple(payload["model"]["dense_dims"]),
    )
    train_config = TrainConfig(**payload["train"])
    params = ModelParams(
        [np.array(w) for w in payload["graph_weights"]],
        [np.array(w) for w in payload["dense_weights"]],
        [np.array(b) for b in payload["dense_biases"]],
    )
    fs = payload["feature_scaling"]
    ls = payload["label_scaling"]
    return TrainedModel(
        params=params,
        model_config=model_config,
        train_config=train_config,
        history=[tuple(row) for row in payload["history"]],
        stopped_epoch=payload["stopped_epoch"],
        best_epoch=payload["best_epoch"],
        best_val_mse=payload["best_val_mse"],
        feature_scaling=None
        if fs is None
        else FeatureScaling(np.array(fs["minimum"]), np.array(fs["maximum"]), list(fs["warnings"])),
        label_scaling=None if ls is None else LabelScaling(ls["minimum"], ls["maximum"]),
    )
