"""K-means clustering with city block, squared Euclidean, cosine and
correlation distances, plus silhouette analysis and reporting."""
from .core import (
    ClusteringResult,
    ConfigError,
    DataError,
    DataMatrix,
    DistanceKind,
    DomainError,
    InitStrategy,
    IterationRecord,
    KMeansConfig,
    KMeansError,
    Rng,
    derive_subseed,
)
from .engine import kmeans
from .evaluation import brute_force_optimum, silhouette, total_criterion
from .ingest import load_csv, load_iris, load_wine, scale
from .metrics import prepare

__all__ = [
    "ClusteringResult", "ConfigError", "DataError", "DataMatrix", "DistanceKind",
    "DomainError", "InitStrategy", "IterationRecord", "KMeansConfig", "KMeansError",
    "Rng", "derive_subseed", "kmeans", "brute_force_optimum", "silhouette",
    "total_criterion", "load_csv", "load_iris", "load_wine", "scale", "prepare",
]
__version__ = "0.1.0"
