"""Cartesian k-means family vector quantizers with lookup-table ANN search.

PQ, CKM, ECKM and OCKM trainers, beam-search code generation, asymmetric and
symmetric lookup-table distances, and the recall / ratio / distortion
evaluation used to compare them.
"""

from ._kernels import BACKEND
from .codebooks import (
    Model,
    Variant,
    brute_force_encode,
    encode_eckm,
    encode_ockm,
    encode_points,
    lloyd_kmeans,
    optimality_rate,
)
from .dataio import (
    load_codes,
    load_model,
    read_bvecs,
    read_fvecs,
    read_ivecs,
    save_codes,
    save_model,
    synth_clustered,
    write_bvecs,
    write_fvecs,
    write_ivecs,
)
from .errors import ConfigError, FormatError, NumericError, OckmError, UnsupportedVersionError
from .evaluation import mean_overall_ratio, recall_at, run_benchmark
from .search import build_point_norms, build_tables, dist_ad, dist_sd, exact_knn, knn_search
from .training import (
    TrainConfig,
    distortion,
    eckm_from_ckm,
    ockm_from_ckm,
    ockm_from_eckm,
    train_ckm,
    train_eckm,
    train_ockm,
    train_pq,
)

__all__ = [
    "BACKEND",
    "ConfigError",
    "FormatError",
    "Model",
    "NumericError",
    "OckmError",
    "TrainConfig",
    "UnsupportedVersionError",
    "Variant",
    "brute_force_encode",
    "build_point_norms",
    "build_tables",
    "dist_ad",
    "dist_sd",
    "distortion",
    "eckm_from_ckm",
    "encode_eckm",
    "encode_ockm",
    "encode_points",
    "exact_knn",
    "knn_search",
    "lloyd_kmeans",
    "load_codes",
    "load_model",
    "mean_overall_ratio",
    "ockm_from_ckm",
    "ockm_from_eckm",
    "optimality_rate",
    "read_bvecs",
    "read_fvecs",
    "read_ivecs",
    "recall_at",
    "run_benchmark",
    "save_codes",
    "save_model",
    "synth_clustered",
    "train_ckm",
    "train_eckm",
    "train_ockm",
    "train_pq",
    "write_bvecs",
    "write_fvecs",
    "write_ivecs",
]

__version__ = "0.1.0"
