"""Endmember identification from solver output.

Candidate pixels whose abundance-row mean clears a threshold are flagged
as endmembers; near-duplicates are pruned with a greedy pass over the
mutual coherence (cosine similarity) of their spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AbundanceEstimate, CandidateSet, SpectralScene, _as_index_array
from .errors import DimensionError, InvalidInput, InvalidParameter


@dataclass(frozen=True)
class EndmemberSet:
    """Detected endmembers: 0-based scene pixel indices, their spectra
    (one column each) and the row scores that triggered detection,
    in descending score order."""

    pixel_indices: np.ndarray
    spectra: np.ndarray
    row_scores: np.ndarray

    def __post_init__(self):
        idx = _as_index_array(self.pixel_indices) if self.pixel_indices.size else \
            np.asarray(self.pixel_indices, dtype=np.int64)
        spectra = np.asarray(self.spectra, dtype=np.float64)
        scores = np.asarray(self.row_scores, dtype=np.float64)
        if spectra.ndim != 2 or spectra.shape[1] != idx.size or scores.size != idx.size:
            raise DimensionError("indices, spectra columns and scores must align")
        object.__setattr__(self, "pixel_indices", idx)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "row_scores", scores)

    @property
    def size(self) -> int:
        return self.pixel_indices.size


def detect_endmembers(abundance: AbundanceEstimate, candidates: CandidateSet,
                      scene: SpectralScene, threshold: float = 0.01) -> EndmemberSet:
    """Candidates whose abundance-row mean exceeds ``threshold``.

    Rows are ranked by descending mean; the returned indices point into
    the original scene.
    """
    if threshold <= 0:
        raise InvalidParameter("threshold must be > 0")
    if abundance.row_count != candidates.size:
        raise DimensionError(
            f"abundance has {abundance.row_count} rows but there are "
            f"{candidates.size} candidates"
        )
    scores = abundance.x.mean(axis=1)
    order = np.argsort(-scores, kind="stable")
    kept = order[scores[order] > threshold]
    indices = candidates.indices[kept]
    return EndmemberSet(
        pixel_indices=indices,
        spectra=scene.data[:, indices] if kept.size else
        np.empty((scene.band_count, 0)),
        row_scores=scores[kept],
    )


def mutual_coherence(s_i, s_j) -> float:
    """Cosine similarity of two spectra, in [-1, 1]."""
    a = np.asarray(s_i, dtype=np.float64).ravel()
    b = np.asarray(s_j, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionError("spectra must have the same length")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise InvalidInput("mutual coherence is undefined for a zero spectrum")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def deduplicate(endmembers: EndmemberSet, max_coherence: float = 0.95) -> EndmemberSet:
    """Greedy redundancy pruning in descending score order.

    An endmember is kept only when its coherence with every previously
    kept one stays at or below ``max_coherence``, so the higher-scored
    member of any redundant group survives.
    """
    if not 0.0 < max_coherence <= 1.0:
        raise InvalidParameter("max_coherence must be in (0, 1]")
    order = np.argsort(-endmembers.row_scores, kind="stable")
    kept: list[int] = []
    for i in order:
        if all(
            mutual_coherence(endmembers.spectra[:, i], endmembers.spectra[:, j])
            <= max_coherence
            for j in kept
        ):
            kept.append(i)
    kept_idx = np.array(kept, dtype=np.int64)
    return EndmemberSet(
        pixel_indices=endmembers.pixel_indices[kept_idx],
        spectra=endmembers.spectra[:, kept_idx] if kept_idx.size else
        np.empty((endmembers.spectra.shape[0], 0)),
        row_scores=endmembers.row_scores[kept_idx],
    )
