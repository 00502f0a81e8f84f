"""Surrogate modeling of engineering performance from triangle meshes:
controllable re-meshing, graph-network regression, and surrogate-guided
search over the two mesh-size hyperparameters."""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED, kernel_backend
from .mesh import (
    TriMesh,
    euler_characteristic,
    is_closed_manifold,
    mesh_stats,
    quality_max,
    quality_min,
    subdivide,
    triangle_angles,
)
from .meshio import load_mesh, load_obj, load_stl_ascii, save_obj
from .remesh import Clustering, MeshSizeParams, dual_remesh, optimize_clusters, remesh_pipeline, seed_clusters
from .graphs import (
    DatasetSplit,
    Graph,
    build_adjacency_gcn,
    build_adjacency_weighted,
    mesh_to_graph,
    scale_node_features,
    split_dataset,
)
from .network import (
    ModelConfig,
    TrainConfig,
    TrainedModel,
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
from .labels import (
    LabelScaling,
    PerformanceLabel,
    ShapeParams,
    disk_stiffness,
    generate_shape,
    oracle_labels,
    rim_stiffness,
    scale_labels,
)
from .optimize import (
    Acquisition,
    EvalRecord,
    McmcConfig,
    SearchBounds,
    bo_loop,
    compare_strategies,
    expected_improvement,
    gp_fit,
    gp_predict,
    mcmc_search,
    propose_next,
    ucb_acquisition,
)
from .analysis import pearson, quality_accuracy_study
from .seeding import derive_seed
