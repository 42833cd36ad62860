"""Heterogeneous-graph embeddings aligned with optimal transport.

The heavy lifting lives in the compiled extension; this package re-exports
the solver, evaluation and pipeline entry points.
"""

from hgot._core import (
    ConfigError,
    DataError,
    NumericalError,
    __version__,
    bench,
    clustering_metrics,
    evaluate,
    exact_ot,
    fgw,
    generate_dataset,
    hierarchical_cluster,
    linear_probe,
    probe_over_seeds,
    sinkhorn,
    sweep,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "__version__",
    "bench",
    "clustering_metrics",
    "evaluate",
    "exact_ot",
    "fgw",
    "generate_dataset",
    "hierarchical_cluster",
    "linear_probe",
    "probe_over_seeds",
    "sinkhorn",
    "sweep",
    "train",
]
