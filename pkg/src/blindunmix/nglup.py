"""NGLUP: reweighted unmixing for noise inside the candidate dictionary.

When the dictionary columns are themselves noisy, the effective residual
covariance depends on the abundances: its pixel-side factor is
``C(X) = (I - I_w X)^T (I - I_w X)`` and the scalar noise level has the
closed form ``sigma^2 = trace(Resid C^{-1} Resid^T) / (N L)``. The solver
alternates between refreshing the weight matrix ``W = sigma^2 C(X)`` and a
small number of weighted ADMM iterations whose X update is a Sylvester
equation, solved here by simultaneous diagonalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import AbundanceEstimate, CandidateSet, SpectralScene, _as_index_array
from .errors import DimensionError, InvalidParameter, NumericalError
from .glup import (
    AdmmState,
    GlupConfig,
    SolveReport,
    _admm_loop,
    _validate_problem,
    glup_objective,
    glup_solve,
)


@dataclass(frozen=True)
class NglupConfig:
    """Outer-loop and inner-ADMM parameters for the reweighted solver."""

    glup: GlupConfig = field(default_factory=GlupConfig)
    warm_start: GlupConfig = field(default_factory=GlupConfig)
    j_max: int = 1
    eps_outer: float = 1e-4
    max_outer_iterations: int = 200
    # conditions the whitening: refreshing a harder-ridged weight every
    # iteration keeps the alternation from chasing its own stiff
    # directions (values below ~1e-4 destabilize the outer loop)
    weight_ridge: float = 1e-2

    def __post_init__(self):
        if self.j_max < 1:
            raise InvalidParameter("j_max must be >= 1")
        if self.eps_outer <= 0:
            raise InvalidParameter("eps_outer must be > 0")
        if self.max_outer_iterations < 1:
            raise InvalidParameter("max_outer_iterations must be >= 1")
        if self.weight_ridge < 0:
            raise InvalidParameter("weight_ridge must be >= 0")


@dataclass(frozen=True)
class WeightModel:
    """Residual-covariance model for one outer iteration.

    ``c_matrix`` already includes the ridge recorded in ``w_ridge_applied``,
    so both it and ``w_matrix = sigma_squared * c_matrix`` are symmetric
    positive definite.
    """

    c_matrix: np.ndarray
    sigma_squared: float
    w_matrix: np.ndarray
    w_ridge_applied: float


def compute_c_matrix(x, omega, n: int) -> np.ndarray:
    """Pixel-side residual factor ``(I - I_w X)^T (I - I_w X)``.

    ``I_w X`` scatters row i of ``x`` into row ``omega[i]`` of an N-by-N
    matrix; the result is symmetric positive semidefinite by construction
    (symmetrized to remove roundoff skew).
    """
    x = np.asarray(x, dtype=np.float64)
    idx = _as_index_array(omega, n)
    if x.ndim != 2 or x.shape[0] != idx.size:
        raise DimensionError(
            f"abundance matrix has {x.shape[0]} rows but omega has {idx.size} entries"
        )
    if x.shape[1] != n:
        raise DimensionError(f"abundance matrix has {x.shape[1]} columns, expected {n}")
    t = np.eye(n)
    t[idx, :] -= x
    c = t.T @ t
    return 0.5 * (c + c.T)


def estimate_sigma_squared(scene: SpectralScene, candidates: CandidateSet,
                           x: np.ndarray, c_inverse_action) -> float:
    """Residual variance ``trace(Resid C^{-1} Resid^T) / (N L)``.

    ``c_inverse_action`` must solve against the (ridged) pixel-side factor;
    an explicit inverse is never formed here.
    """
    residual = scene.data - candidates.columns @ x
    quad = float(np.sum(residual * c_inverse_action(residual.T).T))
    return max(quad, 0.0) / (scene.pixel_count * scene.band_count)


def _c_eigensystem(x, candidates, n, weight_ridge):
    """Ridged pixel-side factor with its eigendecomposition."""
    c_raw = compute_c_matrix(x, candidates.indices, n)
    ridge = weight_ridge * float(np.trace(c_raw)) / n
    c = c_raw + ridge * np.eye(n)
    try:
        eigvals, eigvecs = scipy.linalg.eigh(c)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of the weight factor failed") from exc
    if eigvals.min() <= 0.0:
        retry = 1e-10 * float(np.trace(c)) / n
        c = c + retry * np.eye(n)
        ridge += retry
        eigvals, eigvecs = scipy.linalg.eigh(c)
        if eigvals.min() <= 0.0:
            raise NumericalError("weight factor singular even after ridge")
    return c, ridge, eigvals, eigvecs


def build_weight_model(scene: SpectralScene, candidates: CandidateSet, x,
                       weight_ridge: float = 1e-8,
                       sigma_floor: float | None = None) -> WeightModel:
    """Assemble C(X), sigma^2 and W for the current abundance iterate.

    ``sigma_floor`` guards against a degenerate all-zero weight on
    noise-free data; by default it is 1e-12 times the mean squared scene
    entry.
    """
    c, ridge, eigvals, eigvecs = _c_eigensystem(
        np.asarray(x, dtype=np.float64), candidates, scene.pixel_count, weight_ridge
    )
    if sigma_floor is None:
        sigma_floor = 1e-12 * float(np.vdot(scene.data, scene.data)) / scene.data.size

    def c_solve(rhs):
        return eigvecs @ ((eigvecs.T @ rhs) / eigvals[:, None])

    sigma2 = max(estimate_sigma_squared(scene, candidates, x, c_solve), sigma_floor)
    return WeightModel(
        c_matrix=c,
        sigma_squared=sigma2,
        w_matrix=sigma2 * c,
        w_ridge_applied=ridge,
    )


class _SylvesterXStep:
    """Weighted X update: solve ``M1 X W^{-1} + rho (I + 1 1^T) X = D``.

    Right-multiplying by W gives ``M1 X + M2 X W = D W`` with
    ``M1 = S_w^T S_w`` and ``M2 = rho (I + 1 1^T)``. The (M1, M2) pencil is
    diagonalized once per solver instance and W once per weight refresh, so
    each update reduces to dense multiplies and an elementwise divide by
    ``gamma_i + lambda_j``.
    """

    def __init__(self, columns: np.ndarray, scene_data: np.ndarray, rho: float):
        n_prime = columns.shape[1]
        m1 = columns.T @ columns
        m2 = np.full((n_prime, n_prime), rho)
        m2[np.diag_indices(n_prime)] += rho
        try:
            gamma, phi = scipy.linalg.eigh(m1, m2)
        except scipy.linalg.LinAlgError:
            ridge = 1e-10 * float(np.trace(m1)) / n_prime
            try:
                gamma, phi = scipy.linalg.eigh(
                    m1 + ridge * np.eye(n_prime), m2
                )
            except scipy.linalg.LinAlgError as exc:
                raise NumericalError("pencil diagonalization failed") from exc
        # m1 is positive semidefinite; clip eigenvalue roundoff
        self.gamma = np.maximum(gamma, 0.0)
        self.phi = phi
        self.sts = columns.T @ scene_data
        self.rho = rho
        self._w = None
        self._w_eigvals = None
        self._w_eigvecs = None

    def set_weight(self, w: np.ndarray) -> None:
        try:
            eigvals, eigvecs = scipy.linalg.eigh(w)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError("weight matrix eigendecomposition failed") from exc
        if eigvals.min() <= 0.0:
            raise NumericalError("weight matrix must be positive definite")
        self._set_weight_eigensystem(w, eigvals, eigvecs)

    def _set_weight_eigensystem(self, w, eigvals, eigvecs):
        self._w = w
        self._w_eigvals = eigvals
        self._w_eigvecs = eigvecs

    def solve(self, z: np.ndarray, lam: np.ndarray) -> np.ndarray:
        if self._w is None:
            raise NumericalError("weight matrix has not been set")
        rho = self.rho
        g = lam[:-1] - rho * z + lam[-1][None, :] - rho
        rhs = self.sts - g @ self._w
        q = self._w_eigvecs
        tilde = self.phi.T @ (rhs @ q)
        tilde /= self.gamma[:, None] + self._w_eigvals[None, :]
        return (self.phi @ tilde) @ q.T


def nglup_x_step(candidates: CandidateSet, scene: SpectralScene, w: np.ndarray,
                 z: np.ndarray, lam: np.ndarray, rho: float) -> np.ndarray:
    """Standalone weighted X update for a given positive definite ``w``."""
    w = np.asarray(w, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    n = scene.pixel_count
    if w.shape != (n, n):
        raise DimensionError(f"weight matrix must be {n}x{n}, got {w.shape}")
    if z.shape != (candidates.size, n):
        raise DimensionError("Z shape inconsistent with candidates and scene")
    if lam.shape != (candidates.size + 1, n):
        raise DimensionError("multiplier matrix must have one more row than Z")
    step = _SylvesterXStep(candidates.columns, scene.data, rho)
    step.set_weight(w)
    return step.solve(z, lam)


def nglup_solve(scene: SpectralScene, candidates: CandidateSet,
                config: NglupConfig | None = None) -> SolveReport:
    """Alternate weight refreshes with blocks of weighted ADMM iterations.

    The solve starts from a plain GLUP run (warm start); Z and the
    multipliers persist across outer iterations, as do the inner residual
    norms, so an inner block is skipped outright once both residuals sit
    below their tolerances. The outer loop stops when the X iterate moves
    less than ``eps_outer`` in Frobenius norm.

    Returns
    -------
    SolveReport
        ``converged`` requires both the outer criterion and the inner
        residual tolerances; ``outer_iterations`` records the number of
        weight refreshes performed.
    """
    config = config or NglupConfig()
    _validate_problem(scene, candidates)
    n = scene.pixel_count
    inner = config.glup

    warm = glup_solve(scene, candidates, config.warm_start)
    x = np.array(warm.abundance.x)
    z = x.copy()
    lam = np.zeros((candidates.size + 1, n))

    sylvester = _SylvesterXStep(candidates.columns, scene.data, inner.rho)

    history: list[tuple[float, float]] = []
    r_norm = np.inf
    p_norm = np.inf
    total_inner = 0
    outer_done = 0
    outer_converged = False

    for _ in range(config.max_outer_iterations):
        c, _, c_eigvals, c_eigvecs = _c_eigensystem(
            x, candidates, n, config.weight_ridge
        )
        # The inner problem uses W = sigma^2 C(X) normalized to unit mean
        # eigenvalue, which cancels sigma^2 exactly: the anisotropy of
        # C(X) does the reweighting while the data term keeps the
        # unweighted scale, so one mu setting works across noise levels.
        # W = I is unchanged, and sigma^2 never needs estimating here.
        scale = n / float(np.trace(c))
        sylvester._set_weight_eigensystem(scale * c, scale * c_eigvals, c_eigvecs)

        x_old = x
        x, z, lam, r_norm, p_norm, done = _admm_loop(
            sylvester.solve, x, z, lam, inner.mu, inner.rho,
            inner.eps_primal, inner.eps_dual, config.j_max,
            r_norm=r_norm, p_norm=p_norm, history=history,
        )
        total_inner += done
        outer_done += 1
        if float(np.linalg.norm(x - x_old)) < config.eps_outer:
            outer_converged = True
            break

    if outer_converged and (r_norm >= inner.eps_primal
                            or p_norm >= inner.eps_dual):
        # the outer criterion watches X only; finish the ADMM on the
        # final weight so the returned iterates are feasible at the
        # inner tolerances
        x, z, lam, r_norm, p_norm, done = _admm_loop(
            sylvester.solve, x, z, lam, inner.mu, inner.rho,
            inner.eps_primal, inner.eps_dual, inner.max_iterations,
            r_norm=r_norm, p_norm=p_norm, history=history,
        )
        total_inner += done

    converged = (outer_converged
                 and r_norm < inner.eps_primal and p_norm < inner.eps_dual)
    return SolveReport(
        abundance=AbundanceEstimate.certify(z),
        iterations=total_inner,
        converged=converged,
        final_primal_residual=float(r_norm),
        final_dual_residual=float(p_norm),
        objective_value=glup_objective(scene, candidates, z, inner.mu),
        residual_history=np.array(history, dtype=np.float64).reshape(-1, 2),
        state=AdmmState(x=x, z=z, lam=lam, primal_residual_norm=float(r_norm),
                        dual_residual_norm=float(p_norm), iteration=total_inner),
        outer_iterations=outer_done,
    )
