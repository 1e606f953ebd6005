"""Blind fully constrained hyperspectral unmixing.

Solvers (GLUP and its noise-reweighted variant NGLUP), endmember
selection, synthetic-scene generation, evaluation metrics and the FCLS /
N-FINDR baselines, plus matrix file I/O shared with the command line tool.
"""

from .baselines import FclsResult, fcls, nfindr
from .core import (
    AbundanceEstimate,
    CandidateSet,
    SceneGroundTruth,
    SpectralScene,
    all_pixels,
    read_matrix,
    restrict_columns,
    write_matrix,
)
from .errors import (
    DimensionError,
    DuplicateIndex,
    FormatError,
    InvalidIndex,
    InvalidInput,
    InvalidParameter,
    NumericalError,
    UnmixError,
)
from .glup import AdmmState, GlupConfig, SolveReport, glup_objective, glup_solve
from .nglup import (
    NglupConfig,
    WeightModel,
    build_weight_model,
    compute_c_matrix,
    estimate_sigma_squared,
    nglup_solve,
    nglup_x_step,
)
from .prox import project_simplex, prox_positive_misto
from .selection import EndmemberSet, deduplicate, detect_endmembers, mutual_coherence
from .synth import (
    QualityMetrics,
    SpectraResult,
    SynthConfig,
    compute_metrics,
    generate_abundances,
    generate_endmember_spectra,
    load_spectra_csv,
    spectral_angle,
    synthesize_scene,
)

__version__ = "0.1.0"

__all__ = [
    "AbundanceEstimate",
    "AdmmState",
    "CandidateSet",
    "DimensionError",
    "DuplicateIndex",
    "EndmemberSet",
    "FclsResult",
    "FormatError",
    "GlupConfig",
    "InvalidIndex",
    "InvalidInput",
    "InvalidParameter",
    "NglupConfig",
    "NumericalError",
    "QualityMetrics",
    "SceneGroundTruth",
    "SolveReport",
    "SpectraResult",
    "SpectralScene",
    "SynthConfig",
    "UnmixError",
    "WeightModel",
    "all_pixels",
    "build_weight_model",
    "compute_c_matrix",
    "compute_metrics",
    "deduplicate",
    "detect_endmembers",
    "estimate_sigma_squared",
    "fcls",
    "generate_abundances",
    "generate_endmember_spectra",
    "glup_objective",
    "glup_solve",
    "load_spectra_csv",
    "mutual_coherence",
    "nfindr",
    "nglup_solve",
    "nglup_x_step",
    "project_simplex",
    "prox_positive_misto",
    "read_matrix",
    "restrict_columns",
    "spectral_angle",
    "synthesize_scene",
    "write_matrix",
    "__version__",
]
