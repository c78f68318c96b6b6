"""Coverage metric and map-to-cloud reconstruction."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

EPSILON_DEFAULT = 0.008   # registration distance (m)

# absolute guard so a point at exactly epsilon counts as covered despite
# sqrt rounding; far below any meaningful registration tolerance
_EPS_GUARD = 1e-12


def coverage(partial: np.ndarray, reference: np.ndarray,
             epsilon: float = EPSILON_DEFAULT) -> float:
    """Fraction of reference points with a partial point within epsilon.

    A reference point is covered once any partial point lies within the
    registration distance; C = |covered| / M_c.
    """
    reference = np.asarray(reference, dtype=float).reshape(-1, 3)
    assert len(reference) > 0
    partial = np.asarray(partial, dtype=float).reshape(-1, 3)
    if len(partial) == 0:
        return 0.0
    tree = cKDTree(partial)
    d, _ = tree.query(reference, k=1)
    return float(np.count_nonzero(d <= epsilon + _EPS_GUARD)) / len(reference)


def reconstruct_cloud(occ_map) -> np.ndarray:
    """Centers of the occupied map cells, in lexicographic index order."""
    idx = occ_map.occupied_indices()
    if len(idx) == 0:
        return np.zeros((0, 3))
    return occ_map.origin + (idx + 0.5) * occ_map.resolution
