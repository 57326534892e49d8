from .backends import (
    BackendError,
    EmbeddingBackend,
    GridPoolEmbedding,
    HistogramEmbedding,
    MetricBackends,
    PairScoreBackend,
    PointCloudBackend,
    ToyPairScore,
    ToyPointCloud,
)
from .consistency import (
    METRIC_COLUMNS,
    ConsistencyReport,
    Direction,
    Role,
    ViewSet,
    directional_pair_score,
    directional_similarity,
    evaluate,
    nn_distance,
    similarity_matrix,
)

__all__ = [
    "BackendError", "EmbeddingBackend", "GridPoolEmbedding", "HistogramEmbedding", "MetricBackends",
    "PairScoreBackend", "PointCloudBackend", "ToyPairScore", "ToyPointCloud", "METRIC_COLUMNS",
    "ConsistencyReport", "Direction", "Role", "ViewSet", "directional_pair_score", "directional_similarity",
    "evaluate", "nn_distance", "similarity_matrix",
]
