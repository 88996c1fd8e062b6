"""Feature-selection graph neural network.

Decoupled pipeline for transductive node classification: hop features are
precomputed once from the normalized adjacency (with and without
self-loops), then a shallow two-layer model learns a softmax-regularized
gate over the branches jointly with its weights.
"""

from .data import (
    DatasetBundle,
    DatasetError,
    SplitSpec,
    dataset_hash,
    ingestion_report,
    load_dataset,
    make_random_split,
    parse_edge_file,
    parse_node_file,
    parse_split_file,
)
from .graph import (
    Graph,
    GraphError,
    SparseMatrix,
    build_graph,
    homophily_ratio,
    spmm,
    sym_normalize,
)
from .harness import (
    TrainConfig,
    TrainDiverged,
    TrainResult,
    ablation_run,
    evaluate,
    export_alpha_report,
    feature_setting_study,
    full_search_space,
    grid_search,
    hop_features_for,
    hop_sweep,
    mlp_search_space,
    run_splits,
    train,
)
from .hops import (
    MODE_BOTH,
    MODE_NOLOOP_ONLY,
    MODE_SELF_ONLY,
    CacheError,
    FeatureTag,
    HopFeatureSet,
    enumerate_subset_masks,
    generate_hop_features,
    load_feature_cache,
    row_normalize,
    save_feature_cache,
    select_features,
)
from .model import (
    ModelParams,
    ModelVariant,
    forward,
    get_alphas,
    init_params,
    load_params,
    loss_and_grads,
    predict,
    save_params,
)
from .nn import AdamState, adam_step, grad_check
from .rng import RngStream, derive_seed

__version__ = "0.1.0"
