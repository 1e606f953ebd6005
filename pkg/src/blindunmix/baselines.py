"""Reference algorithms used for comparison.

FCLS estimates per-pixel abundances on the probability simplex for a known
endmember library; N-FINDR extracts endmembers by maximizing the volume of
the simplex spanned by the selected pixels in a principal-component
projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SpectralScene
from .errors import DimensionError, InvalidInput, NumericalError
from .prox import project_simplex_columns
from .selection import EndmemberSet

_KKT_TARGET = 1e-8
_KKT_REQUIRED = 1e-6


@dataclass(frozen=True)
class FclsResult:
    """Simplex-feasible abundances (one column per pixel) and the
    per-pixel Euclidean data misfit."""

    abundances: np.ndarray
    per_pixel_residual: np.ndarray


def _kkt_residual(a, grad):
    """Per-column fixed-point residual of one projected-gradient step."""
    return np.abs(a - project_simplex_columns(a - grad)).max(axis=0)


def fcls(scene: SpectralScene, endmember_spectra,
         max_iterations: int = 50000) -> FclsResult:
    """Fully constrained least squares for every pixel.

    Each column of the scene is matched against the endmember library by
    minimizing ``0.5*||s - R a||^2`` over the probability simplex, using
    accelerated projected gradient with restart, vectorized across pixels.
    Solutions are certified by the projected-stationarity residual; if any
    pixel fails to certify within ``max_iterations``, NumericalError is
    raised rather than returning an uncertified result.
    """
    r = np.asarray(endmember_spectra, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != scene.band_count:
        raise DimensionError(
            f"endmember spectra must be {scene.band_count} x M, got {r.shape}"
        )
    if not np.all(np.isfinite(r)):
        raise InvalidInput("endmember spectra contain non-finite entries")
    if np.any(np.linalg.norm(r, axis=0) == 0.0):
        raise InvalidInput("endmember spectra must be nonzero columns")

    m = r.shape[1]
    n = scene.pixel_count
    gram = r.T @ r
    target = r.T @ scene.data
    step = 1.0 / float(np.linalg.eigvalsh(gram)[-1])

    a = np.full((m, n), 1.0 / m)
    y = a.copy()
    t = 1.0
    certified = False
    for it in range(max_iterations):
        grad_y = gram @ y - target
        a_next = project_simplex_columns(y - step * grad_y)
        # gradient-based adaptive restart of the momentum sequence
        if np.vdot(y - a_next, a_next - a) > 0.0:
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = a_next + ((t - 1.0) / t_next) * (a_next - a)
        a = a_next
        t = t_next
        if it % 10 == 9:
            if _kkt_residual(a, step * (gram @ a - target)).max() <= _KKT_TARGET:
                certified = True
                break
    if not certified:
        residuals = _kkt_residual(a, step * (gram @ a - target))
        if residuals.max() > _KKT_REQUIRED:
            raise NumericalError(
                f"FCLS failed to certify {int((residuals > _KKT_REQUIRED).sum())} "
                f"pixels (worst stationarity residual {residuals.max():.3e})"
            )
    misfit = scene.data - r @ a
    return FclsResult(
        abundances=a,
        per_pixel_residual=np.linalg.norm(misfit, axis=0),
    )


def _simplex_volume(basis: np.ndarray) -> float:
    """|det| of the ones-augmented vertex matrix."""
    return float(np.abs(np.linalg.det(basis)))


def nfindr(scene: SpectralScene, m: int, seed, max_sweeps: int = 50,
           volume_trace: list | None = None) -> EndmemberSet:
    """Endmember extraction by simplex-volume maximization.

    The scene is mean-centered and projected onto its top ``m - 1``
    principal components; starting from ``m`` random distinct pixels, the
    search sweeps every vertex, replacing it with the pixel that strictly
    increases the ones-augmented determinant, until a full sweep changes
    nothing or ``max_sweeps`` is reached. ``volume_trace`` (if given)
    collects the volume after every accepted swap.
    """
    n = scene.pixel_count
    if m < 2:
        raise InvalidInput("m must be >= 2")
    if n < m:
        raise InvalidInput(f"need at least {m} pixels, scene has {n}")
    if scene.band_count < m - 1:
        raise InvalidInput(
            f"projection to {m - 1} components needs at least {m - 1} bands"
        )

    centered = scene.data - scene.data.mean(axis=1, keepdims=True)
    u, _, _ = np.linalg.svd(centered, full_matrices=False)
    projected = u[:, : m - 1].T @ centered

    rng = np.random.default_rng(seed)
    current = rng.choice(n, size=m, replace=False)

    basis = np.ones((m, m))
    basis[1:, :] = projected[:, current]
    volume = _simplex_volume(basis)
    if volume_trace is not None:
        volume_trace.append(volume)

    # candidate blocks reused across sweeps: one ones-augmented matrix per pixel
    candidates = np.ones((n, m, m))
    for sweep in range(max_sweeps):
        changed = False
        for k in range(m):
            candidates[:] = basis[None, :, :]
            candidates[:, 1:, k] = projected.T
            volumes = np.abs(np.linalg.det(candidates))
            best = int(np.argmax(volumes))
            if volumes[best] > volume:
                current[k] = best
                basis[1:, k] = projected[:, best]
                volume = volumes[best]
                changed = True
                if volume_trace is not None:
                    volume_trace.append(volume)
        if not changed:
            break

    order = np.asarray(current, dtype=np.int64)
    return EndmemberSet(
        pixel_indices=order,
        spectra=scene.data[:, order],
        row_scores=np.ones(m),
    )
