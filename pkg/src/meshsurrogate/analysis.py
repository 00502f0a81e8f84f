"""Correlation study between mesh quality and surrogate accuracy over
randomly sampled re-meshing hyperparameters."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .graphs import mesh_to_graph, scale_node_features, split_dataset
from .labels import LABEL_KINDS, scale_labels
from .mesh import quality_max, quality_min
from .network import evaluate, train
from .remesh import MeshSizeParams, remesh_pipeline
from .seeding import derive_seed


def pearson(xs, ys):
    """Pearson correlation coefficient of two equal-length samples."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("pearson needs two equal-length 1D samples of size >= 2")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    denom = math.sqrt(float(np.sum(dx * dx)) * float(np.sum(dy * dy)))
    if denom == 0.0:
        raise ValueError("pearson undefined for a constant input (zero denominator)")
    return float(np.sum(dx * dy)) / denom


@dataclass
class StudySample:
    k: int
    l: int
    q_min: float
    q_max: float
    r2: dict  # kind -> test R^2


@dataclass
class StudyReport:
    samples: list
    correlations: dict  # (measure, kind) -> pearson r
    exclusions: list = field(default_factory=list)  # (k, l, reason)


def _sample_points(bounds, count, seed, include_points):
    points = [tuple(p) for p in include_points]
    for k, l in points:
        if not bounds.contains(k, l):
            raise ValueError(f"included point ({k}, {l}) is out of bounds")
    grid = [
        (k, l)
        for k in range(bounds.k_range[0], bounds.k_range[1] + 1)
        for l in range(bounds.l_range[0], bounds.l_range[1] + 1)
        if (k, l) not in set(points)
    ]
    need = count - len(points)
    if need < 0:
        raise ValueError("more included points than requested samples")
    if need > len(grid):
        raise ValueError(f"cannot draw {need} distinct points from a grid of {len(grid)}")
    rng = np.random.default_rng(seed)
    chosen = rng.permutation(len(grid))[:need]
    return points + [grid[i] for i in sorted(chosen.tolist())]


def quality_accuracy_study(
    meshes,
    labels,
    bounds,
    sample_count,
    seed,
    model_config,
    train_config,
    include_points=(),
):
    """Re-mesh, train, and correlate quality with test accuracy.

    ``labels`` maps each performance kind to its physical-unit values. The
    (k, l) samples are drawn uniformly without replacement from the integer
    bounds; ``include_points`` (e.g. a search optimum) are forced in first.
    One dataset split, derived from the root seed, is shared by every sample
    so the accuracies are comparable. Samples whose training fails are
    excluded and reported.
    """
    if sample_count < 2:
        raise ValueError("study needs at least 2 samples")
    for kind in labels:
        if kind not in LABEL_KINDS:
            raise ValueError(f"unknown performance kind {kind!r}")
    points = _sample_points(bounds, sample_count, derive_seed(seed, "study/points"), include_points)
    split = split_dataset(len(meshes), derive_seed(seed, "study/split"))
    samples = []
    exclusions = []
    # one seed schedule shared by every sample, so quality and accuracy are
    # deterministic functions of (k, l) alone
    mesh_seeds = [derive_seed(seed, f"study/mesh/{j}") for j in range(len(meshes))]
    for k, l in points:
        try:
            remeshed = [
                remesh_pipeline(m, MeshSizeParams(k, l), mesh_seeds[j])
                for j, m in enumerate(meshes)
            ]
            q_min = quality_min(remeshed)
            q_max = quality_max(remeshed)
            raw_graphs = [mesh_to_graph(m) for m in remeshed]
            scaled_graphs, feat_record = scale_node_features(raw_graphs, split.train)
            r2 = {}
            for kind, values in labels.items():
                scaled_labels, label_record = scale_labels(values, split.train)
                cfg = _with_seed(train_config, derive_seed(seed, f"study/train/{kind}"))
                model = train(scaled_graphs, scaled_labels, split, model_config, cfg)
                model.feature_scaling = feat_record
                model.label_scaling = label_record
                test_graphs = [raw_graphs[int(i)] for i in split.test]
                test_labels = np.asarray(values, dtype=np.float64)[split.test]
                r2[kind] = evaluate(model, test_graphs, test_labels).r2
            samples.append(StudySample(k, l, q_min, q_max, r2))
        except ValueError as exc:
            exclusions.append((k, l, str(exc)))
    if len(samples) < 2:
        raise ValueError(f"study needs >= 2 successful samples, got {len(samples)}")
    correlations = {}
    for measure, getter in (("q_min", lambda s: s.q_min), ("q_max", lambda s: s.q_max)):
        qs = [getter(s) for s in samples]
        for kind in labels:
            correlations[(measure, kind)] = pearson(qs, [s.r2[kind] for s in samples])
    return StudyReport(samples=samples, correlations=correlations, exclusions=exclusions)


def _with_seed(train_config, seed):
    return replace(train_config, seed=seed)
