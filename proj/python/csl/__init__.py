"""Pseudo-label selection by confidence separation.

Thin re-export of the compiled module. Probability maps are (K, H, W)
arrays, label maps (H, W) int32, weight maps (H, W) float64.
"""

from ._core import (
    __version__,
    apply_mask,
    generate,
    make_mask,
    max_confidence,
    residual_dispersion,
    score,
    select,
    threshold_baseline,
    weighted_ce,
)

__all__ = [
    "__version__",
    "apply_mask",
    "generate",
    "make_mask",
    "max_confidence",
    "residual_dispersion",
    "score",
    "select",
    "threshold_baseline",
    "weighted_ce",
]
