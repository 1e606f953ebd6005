"""Dense data containers and portable matrix file I/O.

All matrices are dense double precision with column-major layout: a scene
stores spectral bands as rows and pixels as columns. Containers copy their
inputs and are immutable after construction, so they are safe to share
across threads. Pixel indices are 0-based throughout the library; the
command line tool converts to and from the 1-based convention used in its
files and reports.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    DuplicateIndex,
    FormatError,
    InvalidIndex,
    InvalidInput,
)

_HSM_MAGIC = b"HSM1"
_HSM_HEADER = struct.Struct("<QQ")


def _as_matrix(data, name: str = "matrix") -> np.ndarray:
    arr = np.array(data, dtype=np.float64, order="F", copy=True)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _as_index_array(indices, n: int | None = None) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(indices))
    if idx.ndim != 1 or idx.size == 0:
        raise InvalidIndex("index list must be a non-empty 1-d sequence")
    if not np.issubdtype(idx.dtype, np.integer):
        rounded = np.asarray(idx, dtype=np.float64)
        if not np.all(rounded == np.floor(rounded)):
            raise InvalidIndex("indices must be integers")
        idx = rounded.astype(np.int64)
    idx = idx.astype(np.int64, copy=True)
    if np.any(idx < 0):
        raise InvalidIndex(f"negative pixel index: {idx.min()}")
    if n is not None and np.any(idx >= n):
        raise InvalidIndex(f"pixel index {idx.max()} out of range for {n} pixels")
    if np.unique(idx).size != idx.size:
        raise DuplicateIndex("pixel indices must be distinct")
    return idx


@dataclass(frozen=True)
class SpectralScene:
    """An L-band by N-pixel reflectance matrix (bands are rows, pixels columns)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data, "scene data")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("scene data contains non-finite entries")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CandidateSet:
    """A subset of pixel columns that may contain the endmembers.

    ``indices`` are 0-based positions into the originating scene, and
    ``columns`` holds an owned copy of the corresponding spectra, so a
    candidate set stays valid independently of the scene object.
    """

    indices: np.ndarray
    columns: np.ndarray

    def __post_init__(self):
        idx = _as_index_array(self.indices)
        cols = _as_matrix(self.columns, "candidate columns")
        if cols.shape[1] != idx.size:
            raise DimensionError(
                f"{idx.size} indices but {cols.shape[1]} candidate columns"
            )
        if not np.all(np.isfinite(cols)):
            raise InvalidInput("candidate columns contain non-finite entries")
        object.__setattr__(self, "indices", _freeze(idx))
        object.__setattr__(self, "columns", _freeze(cols))

    @property
    def size(self) -> int:
        return self.indices.size

    @property
    def band_count(self) -> int:
        return self.columns.shape[0]


def restrict_columns(scene: SpectralScene, indices) -> CandidateSet:
    """Build the candidate set holding the scene columns at ``indices``.

    The returned columns are copies; mutating them never touches the scene.
    """
    idx = _as_index_array(indices, scene.pixel_count)
    return CandidateSet(indices=idx, columns=scene.data[:, idx])


def all_pixels(scene: SpectralScene) -> CandidateSet:
    """Candidate set containing every pixel of the scene, in order."""
    return restrict_columns(scene, np.arange(scene.pixel_count))


def _feasibility_violation(x: np.ndarray) -> float:
    neg = max(0.0, float(-x.min()))
    col = float(np.abs(x.sum(axis=0) - 1.0).max())
    return max(neg, col)


@dataclass(frozen=True)
class AbundanceEstimate:
    """Fractional abundances (candidate rows by pixel columns).

    ``feasibility_tolerance`` is the tolerance at which nonnegativity and
    unit column sums were certified at construction.
    """

    x: np.ndarray
    feasibility_tolerance: float

    def __post_init__(self):
        arr = _as_matrix(self.x, "abundance matrix")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("abundance matrix contains non-finite entries")
        if self.feasibility_tolerance < 0:
            raise InvalidInput("feasibility tolerance must be nonnegative")
        if _feasibility_violation(arr) > self.feasibility_tolerance:
            raise InvalidInput(
                "abundance matrix violates nonnegativity or unit column sums "
                f"beyond tolerance {self.feasibility_tolerance:g}"
            )
        object.__setattr__(self, "x", _freeze(arr))

    @classmethod
    def certify(cls, x) -> "AbundanceEstimate":
        """Wrap ``x`` with the measured constraint violation as tolerance."""
        arr = _as_matrix(x, "abundance matrix")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("abundance matrix contains non-finite entries")
        return cls(x=arr, feasibility_tolerance=_feasibility_violation(arr))

    @property
    def row_count(self) -> int:
        return self.x.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SceneGroundTruth:
    """True endmember spectra and abundances behind a synthetic scene."""

    endmember_spectra: np.ndarray
    true_abundances: np.ndarray
    endmember_pixel_indices: np.ndarray
    noise_sigma: float

    def __post_init__(self):
        spectra = _as_matrix(self.endmember_spectra, "endmember spectra")
        abundances = _as_matrix(self.true_abundances, "true abundances")
        if spectra.shape[1] != abundances.shape[0]:
            raise DimensionError(
                f"{spectra.shape[1]} spectra but {abundances.shape[0]} abundance rows"
            )
        if abundances.min() < 0:
            raise InvalidInput("true abundances must be nonnegative")
        if np.abs(abundances.sum(axis=0) - 1.0).max() > 1e-9:
            raise InvalidInput("true abundance columns must sum to one")
        idx = _as_index_array(self.endmember_pixel_indices, abundances.shape[1])
        if idx.size != spectra.shape[1]:
            raise DimensionError("one pure-pixel index is required per endmember")
        if self.noise_sigma < 0:
            raise InvalidInput("noise sigma must be nonnegative")
        object.__setattr__(self, "endmember_spectra", _freeze(spectra))
        object.__setattr__(self, "true_abundances", _freeze(abundances))
        object.__setattr__(self, "endmember_pixel_indices", _freeze(idx))

    @property
    def endmember_count(self) -> int:
        return self.endmember_spectra.shape[1]


def write_matrix(path, matrix) -> None:
    """Write a matrix to ``path``: binary for ``.hsm``, CSV otherwise."""
    arr = _as_matrix(matrix, "matrix")
    path = Path(path)
    if path.suffix.lower() == ".hsm":
        _write_hsm(path, arr)
    else:
        _write_csv(path, arr)


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix` (format by extension)."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such file: {path}")
    if path.suffix.lower() == ".hsm":
        return _read_hsm(path)
    return _read_csv(path)


def _write_hsm(path: Path, arr: np.ndarray) -> None:
    rows, cols = arr.shape
    payload = np.asfortranarray(arr, dtype="<f8").tobytes(order="F")
    with open(path, "wb") as fh:
        fh.write(_HSM_MAGIC)
        fh.write(_HSM_HEADER.pack(rows, cols))
        fh.write(payload)


def _read_hsm(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    header_len = len(_HSM_MAGIC) + _HSM_HEADER.size
    if len(blob) < header_len:
        raise FormatError(f"{path}: truncated header")
    if blob[: len(_HSM_MAGIC)] != _HSM_MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    rows, cols = _HSM_HEADER.unpack_from(blob, len(_HSM_MAGIC))
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: invalid dimensions {rows}x{cols}")
    expected = header_len + 8 * rows * cols
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload length mismatch (expected {expected} bytes, "
            f"found {len(blob)})"
        )
    values = np.frombuffer(blob, dtype="<f8", offset=header_len)
    return np.reshape(values, (rows, cols), order="F").copy(order="F")


def _write_csv(path: Path, arr: np.ndarray) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in arr:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def _read_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in text.split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric entry") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows (expected {width} columns)")
    return np.array(rows, dtype=np.float64, order="F")
