"""Isometric GP latent variable models for dissimilarity data.

Thin wrapper over the C++ core. Matrices are NumPy float64 arrays; distance
matrices must be symmetric with a zero diagonal.
"""

from ._core import (
    FitReport,
    ModelConfig,
    NakagamiParams,
    NumericalError,
    ValidationError,
    classical_mds,
    euclidean_distances,
    expected_metric,
    fit,
    gen_plane,
    gen_rotated_glyph,
    gen_swiss_roll,
    gen_two_clusters,
    geodesic,
    graph_distances,
    isomap,
    lexicographic_distances,
    magnification_grid,
    nakagami_cdf,
    nakagami_estimate,
    nakagami_log_pdf,
    nakagami_log_survival,
    nakagami_sample,
    persistence,
    rotation_invariant_distances,
    stress,
    suggest_eps,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
