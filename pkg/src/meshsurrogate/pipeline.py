"""End-to-end orchestration shared by the CLI subcommands: dataset
generation, preprocessing into graph caches, training bundles, and the
search objective."""

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .graphs import (
    load_graph,
    mesh_to_graph,
    save_graph,
    scale_node_features,
    split_dataset,
    FeatureScaling,
    Graph,
)
from .labels import (
    LABEL_KINDS,
    LabelScaling,
    generate_shape,
    oracle_labels,
    sample_shape_params,
    scale_labels,
)
from .meshio import load_obj, save_obj
from .network import ModelConfig, TrainConfig, TrainedModel, evaluate, train
from .remesh import MeshSizeParams, remesh_pipeline
from .seeding import derive_seed


def _sig9(x):
    return float(f"{float(x):.9g}")


def generate_dataset(cfg, out_dir):
    """Generate wheels plus oracle labels; returns the manifest path.

    The manifest is byte-identical across runs with the same seed (no
    timestamps inside).
    """
    ds = cfg["dataset"]
    root = cfg["seed"]
    mesh_dir = os.path.join(out_dir, "dataset", "meshes")
    os.makedirs(mesh_dir, exist_ok=True)
    samples = []
    for i in range(ds["count"]):
        sample_seed = derive_seed(root, f"gen-data/{i}")
        rng = np.random.default_rng(sample_seed)
        params = None
        for _ in range(64):
            try:
                params = sample_shape_params(rng, ds["ranges"], ds["density"])
                break
            except ValueError:
                continue
        if params is None:
            raise ConfigError("dataset.ranges rejected 64 consecutive draws; widen the ranges")
        mesh = generate_shape(params, resolution=ds["resolution"])
        labels = oracle_labels(mesh, params.density)
        rel = os.path.join("meshes", f"wheel_{i:04d}.obj")
        save_obj(mesh, os.path.join(out_dir, "dataset", rel))
        samples.append(
            {
                "index": i,
                "seed": sample_seed,
                "params": {
                    "outer_radius": _sig9(params.outer_radius),
                    "rim_width": _sig9(params.rim_width),
                    "hub_radius": _sig9(params.hub_radius),
                    "disk_thickness": _sig9(params.disk_thickness),
                    "spoke_count": params.spoke_count,
                    "spoke_width": _sig9(params.spoke_width),
                    "density": _sig9(params.density),
                },
                "mesh": rel,
                "labels": {kind: _sig9(labels[kind].value) for kind in LABEL_KINDS},
            }
        )
    manifest = {
        "schema_version": 1,
        "seed": root,
        "count": ds["count"],
        "resolution": ds["resolution"],
        "density": ds["density"],
        "samples": samples,
    }
    path = os.path.join(out_dir, "dataset", "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path


def load_dataset(manifest_path):
    """(meshes, labels-by-kind) from a dataset manifest."""
    if not os.path.exists(manifest_path):
        raise ConfigError(f"dataset manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(manifest_path)
    meshes = []
    labels = {kind: [] for kind in LABEL_KINDS}
    for sample in manifest["samples"]:
        meshes.append(load_obj(os.path.join(base, sample["mesh"])))
        for kind in LABEL_KINDS:
            labels[kind].append(sample["labels"][kind])
    return meshes, {kind: np.array(vals) for kind, vals in labels.items()}


@dataclass
class GraphBundle:
    """Everything one (k, l) setting produces: graphs, split, and scalings."""

    mesh_size: MeshSizeParams
    raw_graphs: list
    scaled_graphs: list
    split: object
    feature_scaling: FeatureScaling
    labels_physical: dict
    labels_scaled: dict
    label_scalings: dict


def preprocess_dataset(meshes, labels, k, l, root_seed, split_fractions=(0.8, 0.1)):
    """Steps 2-4 for every mesh, one shared split, train-set-fitted scalings."""
    params = MeshSizeParams(k, l)
    remeshed = [
        remesh_pipeline(m, params, derive_seed(root_seed, f"remesh/{i}"))
        for i, m in enumerate(meshes)
    ]
    raw_graphs = [mesh_to_graph(m) for m in remeshed]
    split = split_dataset(len(meshes), derive_seed(root_seed, "split"), *split_fractions)
    scaled_graphs, feature_scaling = scale_node_features(raw_graphs, split.train)
    labels_scaled = {}
    label_scalings = {}
    for kind, values in labels.items():
        labels_scaled[kind], label_scalings[kind] = scale_labels(values, split.train)
    return GraphBundle(
        mesh_size=params,
        raw_graphs=raw_graphs,
        scaled_graphs=scaled_graphs,
        split=split,
        feature_scaling=feature_scaling,
        labels_physical={kind: np.asarray(v, dtype=np.float64) for kind, v in labels.items()},
        labels_scaled=labels_scaled,
        label_scalings=label_scalings,
    )


def write_graph_cache(bundle, out_dir):
    """Graph cache: one text record per graph plus a JSON manifest."""
    graph_dir = os.path.join(out_dir, "graphs")
    os.makedirs(graph_dir, exist_ok=True)
    records = []
    for i, graph in enumerate(bundle.raw_graphs):
        rel = os.path.join("graphs", f"g_{i:04d}.txt")
        save_graph(graph, os.path.join(out_dir, rel))
        records.append(
            {
                "index": i,
                "path": rel,
                "labels": {kind: _sig9(v[i]) for kind, v in bundle.labels_physical.items()},
            }
        )
    manifest = {
        "schema_version": 1,
        "mesh_size": {"k": bundle.mesh_size.k, "l": bundle.mesh_size.l},
        "split": {
            "train": bundle.split.train.tolist(),
            "validation": bundle.split.validation.tolist(),
            "test": bundle.split.test.tolist(),
            "seed": bundle.split.seed,
        },
        "feature_scaling": {
            "minimum": [_sig9(v) for v in bundle.feature_scaling.minimum],
            "maximum": [_sig9(v) for v in bundle.feature_scaling.maximum],
            "warnings": list(bundle.feature_scaling.warnings),
        },
        "label_scaling": {
            kind: {"minimum": _sig9(rec.minimum), "maximum": _sig9(rec.maximum)}
            for kind, rec in bundle.label_scalings.items()
        },
        "graphs": records,
    }
    path = os.path.join(out_dir, "graph_cache.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path


def load_graph_cache(path):
    if not os.path.exists(path):
        raise ConfigError(f"graph cache not found: {path} (run preprocess first)")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(path)
    raw_graphs = [load_graph(os.path.join(base, rec["path"])) for rec in manifest["graphs"]]
    feature_scaling = FeatureScaling(
        np.array(manifest["feature_scaling"]["minimum"]),
        np.array(manifest["feature_scaling"]["maximum"]),
        list(manifest["feature_scaling"]["warnings"]),
    )
    scaled_graphs = [Graph(feature_scaling.apply(g.coords), g.edges.copy()) for g in raw_graphs]
    from .graphs import DatasetSplit

    sp = manifest["split"]
    split = DatasetSplit(
        np.array(sp["train"], dtype=np.int64),
        np.array(sp["validation"], dtype=np.int64),
        np.array(sp["test"], dtype=np.int64),
        sp["seed"],
    )
    labels_physical = {
        kind: np.array([rec["labels"][kind] for rec in manifest["graphs"]])
        for kind in manifest["graphs"][0]["labels"]
    }
    label_scalings = {
        kind: LabelScaling(rec["minimum"], rec["maximum"])
        for kind, rec in manifest["label_scaling"].items()
    }
    labels_scaled = {
        kind: (labels_physical[kind] - rec.minimum) / (rec.maximum - rec.minimum)
        for kind, rec in label_scalings.items()
    }
    return GraphBundle(
        mesh_size=MeshSizeParams(manifest["mesh_size"]["k"], manifest["mesh_size"]["l"]),
        raw_graphs=raw_graphs,
        scaled_graphs=scaled_graphs,
        split=split,
        feature_scaling=feature_scaling,
        labels_physical=labels_physical,
        labels_scaled=labels_scaled,
        label_scalings=label_scalings,
    )


def model_config_from(cfg):
    return ModelConfig(latent_dim=cfg["model"]["latent_dim"], dense_dims=tuple(cfg["model"]["dense_dims"]))


def train_config_from(cfg, seed):
    tr = cfg["train"]
    return TrainConfig(
        learning_rate=tr["learning_rate"],
        batch_size=tr["batch_size"],
        max_epochs=tr["max_epochs"],
        patience=tr["patience"],
        seed=seed,
        adjacency=tr["adjacency"],
    )


def train_on_bundle(bundle, kind, model_config, train_config):
    """Train one performance kind on a bundle; scaling records attached."""
    model = train(bundle.scaled_graphs, bundle.labels_scaled[kind], bundle.split, model_config, train_config)
    model.feature_scaling = bundle.feature_scaling
    model.label_scaling = bundle.label_scalings[kind]
    return model


def split_metrics(model, bundle, kind):
    """Physical-unit metrics for each split, as (split name, Metrics) pairs."""
    out = []
    for name, idx in (("train", bundle.split.train), ("validation", bundle.split.validation), ("test", bundle.split.test)):
        graphs = [bundle.raw_graphs[int(i)] for i in idx]
        y = bundle.labels_physical[kind][idx]
        out.append((name, evaluate(model, graphs, y)))
    return out


class PipelineObjective:
    """Search objective: preprocess at (k, l), train, return validation MSE.

    Pure in (k, l) for a fixed root seed: the split, re-meshing seeds, and
    training seed all derive from the root, not from the iteration. Keeps
    the best artifacts seen so far for post-search evaluation.
    """

    def __init__(self, meshes, labels, kind, model_config, train_config_base, root_seed, split_fractions=(0.8, 0.1)):
        self.meshes = meshes
        self.labels = {kind: labels[kind]}
        self.kind = kind
        self.model_config = model_config
        self.train_config = train_config_base
        self.root_seed = root_seed
        self.split_fractions = split_fractions
        self.best_mse = None
        self.best_artifacts = None  # (k, l, bundle, model)

    def __call__(self, k, l):
        bundle = preprocess_dataset(self.meshes, self.labels, k, l, self.root_seed, self.split_fractions)
        model = train_on_bundle(bundle, self.kind, self.model_config, self.train_config)
        mse = model.best_val_mse
        if self.best_mse is None or mse < self.best_mse:
            self.best_mse = mse
            self.best_artifacts = (k, l, bundle, model)
        return mse


def toy_objective_from(cfg):
    toy = cfg["search"]["toy"]

    def objective(k, l):
        return (k - toy["k_center"]) ** 2 + ((l - toy["l_center"]) / toy["l_scale"]) ** 2

    return objective


def write_metrics_csv(path, rows):
    """rows: (performance, split, Metrics)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("performance,split,rmse,mape,r2\n")
        for kind, split_name, m in rows:
            fh.write(f"{kind},{split_name},{m.rmse:.9g},{m.mape:.9g},{m.r2:.9g}\n")


def write_history_csv(path, entries):
    """entries: (strategy, seed, records)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("strategy,seed,t,k,l,mse,best_so_far,wall_seconds\n")
        for strategy, seed, records in entries:
            best = float("inf")
            for t, rec in enumerate(records, start=1):
                if rec.mse < best:
                    best = rec.mse
                fh.write(
                    f"{strategy},{seed},{t},{rec.k},{rec.l},{rec.mse:.9g},{best:.9g},{rec.wall_seconds:.6f}\n"
                )


def write_study_csvs(report, out_dir):
    study_path = os.path.join(out_dir, "study.csv")
    with open(study_path, "w", encoding="utf-8") as fh:
        fh.write("k,l,q_min,q_max,r2_mass,r2_rim,r2_disk\n")
        for s in report.samples:
            fh.write(
                f"{s.k},{s.l},{s.q_min:.9g},{s.q_max:.9g},"
                f"{s.r2.get('mass', float('nan')):.9g},"
                f"{s.r2.get('rim_stiffness', float('nan')):.9g},"
                f"{s.r2.get('disk_stiffness', float('nan')):.9g}\n"
            )
    pearson_path = os.path.join(out_dir, "pearson.csv")
    with open(pearson_path, "w", encoding="utf-8") as fh:
        fh.write("performance,measure,pearson_r\n")
        for (measure, kind), r in sorted(report.correlations.items()):
            fh.write(f"{kind},{measure},{r:.9g}\n")
    return study_path, pearson_path
