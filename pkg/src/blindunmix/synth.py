"""Synthetic scenes and evaluation metrics.

Scenes follow the standard benchmark protocol: smooth nonnegative
endmember spectra, pure pixels embedded at known columns, mixed pixels
drawn uniformly from the probability simplex, and i.i.d. Gaussian noise
calibrated so that the total signal-to-noise energy ratio matches the
requested level in dB. Everything is a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SceneGroundTruth, SpectralScene
from .errors import DimensionError, InvalidParameter
from .selection import mutual_coherence

_SPECTRA_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    """Scene-generation parameters."""

    endmember_count: int
    pixel_count: int
    band_count: int = 420
    snr_db: float = 50.0
    seed: int = 0
    pure_pixel_placement: str = "first"
    target_max_coherence: float = 0.95

    def __post_init__(self):
        if self.endmember_count < 1:
            raise InvalidParameter("endmember_count must be >= 1")
        if self.pixel_count < self.endmember_count:
            raise InvalidParameter("pixel_count must be >= endmember_count")
        if self.band_count < self.endmember_count:
            raise InvalidParameter("band_count must be >= endmember_count")
        if self.pure_pixel_placement not in ("first", "random"):
            raise InvalidParameter("pure_pixel_placement must be 'first' or 'random'")
        if not 0.0 < self.target_max_coherence <= 1.0:
            raise InvalidParameter("target_max_coherence must be in (0, 1]")


@dataclass(frozen=True)
class QualityMetrics:
    """Abundance error and spectral-angle statistics.

    ``rmse`` uses the squared-error benchmark convention
    ``||Xhat - X||_F^2 / N^2`` (no square root, N = pixel columns);
    ``rmse_conventional`` is the usual root mean squared entry error.
    """

    rmse: float
    rmse_conventional: float
    max_spectral_angle_rad: float
    avg_spectral_angle_rad: float


class SpectraResult(NamedTuple):
    spectra: np.ndarray
    max_pairwise_coherence: float
    coherence_target_met: bool
    attempts: int


def _max_pairwise_coherence(spectra: np.ndarray) -> float:
    if spectra.shape[1] < 2:
        return 0.0
    normalized = spectra / np.linalg.norm(spectra, axis=0, keepdims=True)
    gram = normalized.T @ normalized
    off = gram[~np.eye(gram.shape[0], dtype=bool)]
    return float(off.max())


def _draw_spectra(rng: np.random.Generator, bands: int, count: int) -> np.ndarray:
    """One library draw: per spectrum, 3-8 Gaussian bumps over the band
    axis plus a gentle affine baseline, clipped nonnegative and scaled to
    a peak in (0, 1]."""
    axis = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((bands, count), order="F")
    for i in range(count):
        bumps = rng.integers(3, 9)
        centers = rng.uniform(0.0, 1.0, bumps)
        widths = rng.uniform(0.02, 0.10, bumps)
        amplitudes = rng.uniform(0.2, 1.0, bumps)
        baseline = rng.uniform(0.02, 0.12) + rng.uniform(-0.08, 0.08) * axis
        profile = baseline + np.sum(
            amplitudes[:, None]
            * np.exp(-0.5 * ((axis[None, :] - centers[:, None]) / widths[:, None]) ** 2),
            axis=0,
        )
        profile = np.clip(profile, 0.0, None)
        spectra[:, i] = profile * (rng.uniform(0.5, 1.0) / profile.max())
    return spectra


def generate_endmember_spectra(config: SynthConfig) -> SpectraResult:
    """Draw a synthetic endmember library, retrying until the maximum
    pairwise coherence meets ``config.target_max_coherence``.

    After 100 attempts the most diverse draw is returned with
    ``coherence_target_met = False`` instead of raising.
    """
    rng = np.random.default_rng(config.seed)
    best: np.ndarray | None = None
    best_coherence = np.inf
    for attempt in range(1, _SPECTRA_ATTEMPTS + 1):
        spectra = _draw_spectra(rng, config.band_count, config.endmember_count)
        coherence = _max_pairwise_coherence(spectra)
        if coherence < best_coherence:
            best, best_coherence = spectra, coherence
        if coherence <= config.target_max_coherence:
            return SpectraResult(spectra, coherence, True, attempt)
    return SpectraResult(best, best_coherence, False, _SPECTRA_ATTEMPTS)


def generate_abundances(m: int, n_mixed: int, seed) -> np.ndarray:
    """Mixed-pixel abundances: columns drawn uniformly from the probability
    simplex (flat Dirichlet), renormalized so each column sums to one."""
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    if n_mixed < 0:
        raise InvalidParameter("n_mixed must be >= 0")
    if n_mixed == 0:
        return np.zeros((m, 0))
    rng = np.random.default_rng(seed)
    a = rng.dirichlet(np.ones(m), size=n_mixed).T
    a /= a.sum(axis=0, keepdims=True)
    return a


def synthesize_scene(config: SynthConfig) -> tuple[SpectralScene, SceneGroundTruth]:
    """Build a scene and its ground truth from the protocol above.

    The abundance matrix holds an identity block at the pure-pixel columns
    (the first M columns, or M random ones) and simplex-uniform columns
    elsewhere; noise variance is ``||clean||_F^2 / (L N 10^(snr/10))``.
    """
    m, n, bands = config.endmember_count, config.pixel_count, config.band_count
    spectra = generate_endmember_spectra(config)
    seeds = np.random.SeedSequence(config.seed).spawn(3)

    mixed = generate_abundances(m, n - m, seeds[0])
    if config.pure_pixel_placement == "first":
        pure_idx = np.arange(m)
    else:
        pure_idx = np.random.default_rng(seeds[1]).choice(n, size=m, replace=False)
    abundances = np.zeros((m, n))
    abundances[:, pure_idx] = np.eye(m)
    mixed_idx = np.setdiff1d(np.arange(n), pure_idx)
    abundances[:, mixed_idx] = mixed

    clean = spectra.spectra @ abundances
    if np.isinf(config.snr_db):
        sigma = 0.0
        data = clean
    else:
        energy = float(np.vdot(clean, clean))
        sigma = float(np.sqrt(energy / (bands * n * 10.0 ** (config.snr_db / 10.0))))
        noise = sigma * np.random.default_rng(seeds[2]).standard_normal((bands, n))
        data = clean + noise

    return (
        SpectralScene(data),
        SceneGroundTruth(
            endmember_spectra=spectra.spectra,
            true_abundances=abundances,
            endmember_pixel_indices=pure_idx,
            noise_sigma=sigma,
        ),
    )


def load_spectra_csv(path) -> np.ndarray:
    """Read an external spectral library (bands as rows, one spectrum per
    column) in the package CSV format."""
    from .core import read_matrix

    return read_matrix(path)


def spectral_angle(s_i, s_j) -> float:
    """Angle between two spectra in radians: arccos of their coherence."""
    return float(np.arccos(mutual_coherence(s_i, s_j)))


def compute_metrics(x_hat, x_true) -> QualityMetrics:
    """Error statistics between an estimate and a reference matrix.

    Angle statistics run over corresponding column pairs; pairs where
    either column is all zero are skipped (0.0 is reported if no pair
    remains).
    """
    a = np.asarray(x_hat, dtype=np.float64)
    b = np.asarray(x_true, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    sq = float(np.vdot(diff, diff))
    n = a.shape[1]
    angles = [
        spectral_angle(a[:, j], b[:, j])
        for j in range(n)
        if np.linalg.norm(a[:, j]) > 0 and np.linalg.norm(b[:, j]) > 0
    ]
    return QualityMetrics(
        rmse=sq / n**2,
        rmse_conventional=float(np.sqrt(sq / a.size)),
        max_spectral_angle_rad=max(angles) if angles else 0.0,
        avg_spectral_angle_rad=float(np.mean(angles)) if angles else 0.0,
    )
