"""Key pre-scoring for approximate attention.

Ranks keys by clustering or leverage scores, then runs LSH-sorted block
attention over the retained keys only.
"""
from .cluster import Clustering, Method, PreScoreConfig, Selection, cluster, kernel_kmeans_cluster, lloyd_cluster
from .errors import (ClusteringError, ConfigError, DegenerateRowError, DimensionMismatchError, EmptyDimensionError,
                     NumericError, PrescoreError, SingularGramError)
from .exact import AttentionOutput, attention_matrix, exact_attention, exact_leverage_scores
from .hyper import (AttentionResult, HyperConfig, PreScoredConfig, angular_lsh_codes, gray_rank, hyper_attention,
                    prescored_hyper_attention, uniform_sample_attention)
from .matrix import (gaussian_matrix, load_labels, load_matrix, make_rng, normalize_rows, pairwise_sq_dist,
                     save_labels, save_matrix)
from .metrics import CoverageReport, attention_error, heavy_coverage, recovery_score
from .planted import (PlantedConfig, PlantedInstance, generate_counterexample, generate_planted, partition_cost,
                      planted_cost_gap, planted_queries)
from .prescore import ScoredKeySet, prescore
from .sketch import approx_leverage_scores, srtt_sketch

__version__ = "0.1.0"

__all__ = ["Clustering", "Method", "PreScoreConfig", "Selection", "cluster", "kernel_kmeans_cluster",
           "lloyd_cluster", "ClusteringError", "ConfigError", "DegenerateRowError", "DimensionMismatchError",
           "EmptyDimensionError", "NumericError", "PrescoreError", "SingularGramError", "AttentionOutput",
           "attention_matrix", "exact_attention", "exact_leverage_scores", "AttentionResult", "HyperConfig",
           "PreScoredConfig", "angular_lsh_codes", "gray_rank", "hyper_attention", "prescored_hyper_attention",
           "uniform_sample_attention", "gaussian_matrix", "load_labels", "load_matrix", "make_rng", "normalize_rows",
           "pairwise_sq_dist", "save_labels", "save_matrix", "CoverageReport", "attention_error", "heavy_coverage",
           "recovery_score", "PlantedConfig", "PlantedInstance", "generate_counterexample", "generate_planted",
           "partition_cost", "planted_cost_gap", "planted_queries", "ScoredKeySet", "prescore",
           "approx_leverage_scores", "srtt_sketch"]
