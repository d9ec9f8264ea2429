"""Feature-match-guided triplet mining over a native core.

The heavy lifting (binary feature extraction, GMS verification, the
relational matrix, training and ranking) lives in the compiled module;
this package re-exports its surface.
"""

from ._core import (  # noqa: F401
    ClusterSpec,
    DatasetManifest,
    EmbeddingModel,
    EmbeddingSet,
    FeatureConfig,
    FeatureSet,
    GmsConfig,
    GrayImage,
    LossReport,
    MiningConfig,
    RelationalMatrix,
    SynthDataset,
    SynthSpec,
    TrainConfig,
    build_relational_matrix,
    compute_metrics,
    cross_entropy,
    default_config_json,
    extract,
    generate_dataset,
    generate_embeddings,
    k_reciprocal_rerank,
    load_checkpoint,
    load_image,
    load_matrix,
    lr_at_epoch,
    match_count,
    pairwise_distances,
    pooled_grid_descriptor,
    resize_bilinear,
    save_checkpoint,
    save_matrix,
    save_pgm,
    select_positive,
    synthetic_relation_matrix,
    tau,
    train_vectors,
    triplet_loss,
    __version__,
)

__all__ = [name for name in dir() if not name.startswith("_")]
