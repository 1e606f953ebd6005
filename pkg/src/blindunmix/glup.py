"""GLUP: group-lasso unmixing with positivity and unit column sums, by ADMM.

The convex program

    minimize    0.5*||S - S_w X||_F^2 + mu * sum_k ||row_k(X)||_2
    subject to  X >= 0,  every column of X sums to one

is split into a quadratic X block and a prox-friendly Z block coupled by a
consensus constraint that also carries the sum-to-one row. The stacked
constraint matrices are never materialized: their Gram matrix is
``I + 1 1^T``, their adjoint action is a row broadcast, and the dual
residual reduces to ``rho * ||Z - Z_old||_F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import AbundanceEstimate, CandidateSet, SpectralScene
from .errors import DimensionError, InvalidInput, InvalidParameter, NumericalError
from .prox import prox_positive_misto_rows


@dataclass(frozen=True)
class GlupConfig:
    """ADMM parameters. Defaults follow the synthetic benchmark settings."""

    mu: float = 10.0
    rho: float = 100.0
    eps_primal: float = 1e-5
    eps_dual: float = 1e-5
    max_iterations: int = 5000

    def __post_init__(self):
        if self.mu < 0:
            raise InvalidParameter(f"mu must be >= 0, got {self.mu}")
        if self.rho <= 0:
            raise InvalidParameter(f"rho must be > 0, got {self.rho}")
        if self.eps_primal <= 0 or self.eps_dual <= 0:
            raise InvalidParameter("residual tolerances must be > 0")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be >= 1")


@dataclass
class AdmmState:
    """Solver iterate: X, Z, the multipliers, and the current residuals.

    ``lam`` has one more row than X/Z; the extra last row belongs to the
    sum-to-one constraint.
    """

    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    primal_residual_norm: float
    dual_residual_norm: float
    iteration: int


@dataclass
class SolveReport:
    """Outcome of a solve. ``abundance`` wraps the Z iterate, which is
    exactly nonnegative; X meets the sum-to-one row only in the limit."""

    abundance: AbundanceEstimate
    iterations: int
    converged: bool
    final_primal_residual: float
    final_dual_residual: float
    objective_value: float
    residual_history: np.ndarray = field(repr=False)
    state: AdmmState = field(repr=False)
    outer_iterations: int | None = None


class GramSolver:
    """Factorization of the X-step normal matrix ``S_w^T S_w + rho*(I + 1 1^T)``.

    The inverse is applied through a Cholesky factorization computed once;
    if factorization fails, a single ridge retry (1e-10 * trace/n) is made
    before giving up.
    """

    def __init__(self, columns: np.ndarray, rho: float):
        n_prime = columns.shape[1]
        gram = columns.T @ columns
        gram += rho
        gram[np.diag_indices(n_prime)] += rho
        self.matrix = gram
        factor = _cholesky_with_ridge(gram)
        self._inverse = scipy.linalg.cho_solve(factor, np.eye(n_prime))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._inverse @ rhs


def _cholesky_with_ridge(matrix: np.ndarray):
    try:
        return scipy.linalg.cho_factor(matrix)
    except scipy.linalg.LinAlgError:
        ridge = 1e-10 * float(np.trace(matrix)) / matrix.shape[0]
        bumped = matrix + ridge * np.eye(matrix.shape[0])
        try:
            return scipy.linalg.cho_factor(bumped)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(
                "normal matrix not positive definite even after ridge"
            ) from exc


def _validate_problem(scene: SpectralScene, candidates: CandidateSet) -> None:
    if candidates.band_count != scene.band_count:
        raise DimensionError(
            f"scene has {scene.band_count} bands but candidates have "
            f"{candidates.band_count}"
        )
    if candidates.indices.max() >= scene.pixel_count:
        raise DimensionError("candidate indices exceed the scene pixel count")
    if not np.array_equal(candidates.columns, scene.data[:, candidates.indices]):
        raise InvalidInput("candidate columns do not match the scene at their indices")


def glup_x_step(gram_solver: GramSolver, candidates, scene, z, lam, rho):
    """One X update: solve the normal equations of the quadratic block.

    The right-hand side folds the adjoint of the stacked constraints into
    a row broadcast of the last multiplier row plus a constant shift.
    """
    z = np.asarray(z, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (z.shape[0] + 1, z.shape[1]):
        raise DimensionError("multiplier matrix must have one more row than Z")
    base = candidates.columns.T @ scene.data
    base += rho
    return _x_update(gram_solver, base, z, lam, rho)


def _x_update(gram_solver, rhs_base, z, lam, rho):
    rhs = rhs_base - lam[:-1] + rho * z - lam[-1][None, :]
    return gram_solver.solve(rhs)


def glup_z_step(x, lam, mu: float, rho: float) -> np.ndarray:
    """One Z update: rowwise shrinkage of ``X + Lambda/rho`` at level mu/rho."""
    x = np.asarray(x, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (x.shape[0] + 1, x.shape[1]):
        raise DimensionError("multiplier matrix must have one more row than X")
    return prox_positive_misto_rows(x + lam[:-1] / rho, mu / rho)


def glup_dual_step(lam, x, z, z_old, rho: float):
    """Multiplier update with Frobenius primal and dual residual norms.

    The primal residual stacks the consensus block ``X - Z`` with the
    sum-to-one row; the dual residual uses the structured identity that
    the adjoint-times-consensus map is minus the identity, hence
    ``rho * ||Z - Z_old||_F``.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    z_old = np.asarray(z_old, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if x.shape != z.shape or z.shape != z_old.shape:
        raise DimensionError("X, Z and Z_old must share one shape")
    if lam.shape != (x.shape[0] + 1, x.shape[1]):
        raise DimensionError("multiplier matrix must have one more row than X")
    r_top = x - z
    r_bottom = x.sum(axis=0) - 1.0
    primal = float(np.sqrt(np.vdot(r_top, r_top) + np.vdot(r_bottom, r_bottom)))
    dual = float(rho * np.linalg.norm(z - z_old))
    updated = lam.copy()
    updated[:-1] += rho * r_top
    updated[-1] += rho * r_bottom
    return updated, primal, dual


def _admm_loop(x_step, x, z, lam, mu, rho, eps_primal, eps_dual, max_iterations,
               r_norm=np.inf, p_norm=np.inf, history=None):
    """Iterate X/Z/multiplier updates until both residuals drop below tolerance.

    ``x_step`` maps (z, lam) to the next X. The loop owns copies of ``lam``
    and rebinds ``z``; initial residual norms may be carried in so a caller
    can resume a previous run. Returns the final iterates, residual norms,
    and the number of iterations performed.
    """
    alpha = mu / rho
    lam = lam.copy()
    iterations = 0
    while (r_norm >= eps_primal or p_norm >= eps_dual) and iterations < max_iterations:
        x = x_step(z, lam)
        z_old = z
        z = prox_positive_misto_rows(x + lam[:-1] / rho, alpha)
        r_top = x - z
        r_bottom = x.sum(axis=0) - 1.0
        r_norm = float(np.sqrt(np.vdot(r_top, r_top) + np.vdot(r_bottom, r_bottom)))
        p_norm = float(rho * np.linalg.norm(z - z_old))
        lam[:-1] += rho * r_top
        lam[-1] += rho * r_bottom
        iterations += 1
        if history is not None:
            history.append((r_norm, p_norm))
    return x, z, lam, r_norm, p_norm, iterations


def glup_objective(scene: SpectralScene, candidates: CandidateSet,
                   x: np.ndarray, mu: float) -> float:
    """Data misfit plus the group-lasso row penalty at ``x``."""
    residual = scene.data - candidates.columns @ x
    fit = 0.5 * float(np.vdot(residual, residual))
    return fit + mu * float(np.linalg.norm(x, axis=1).sum())


def glup_solve(scene: SpectralScene, candidates: CandidateSet,
               config: GlupConfig | None = None) -> SolveReport:
    """Run the two-block ADMM from Z = 0, multipliers = 0.

    Parameters
    ----------
    scene : SpectralScene
        Observed data, one pixel per column.
    candidates : CandidateSet
        Columns allowed to act as the dictionary; must be drawn from
        ``scene``.
    config : GlupConfig, optional
        Penalty, regularization, tolerances and the iteration cap.

    Returns
    -------
    SolveReport
        The certified Z iterate with residuals, objective value and the
        per-iteration residual history.
    """
    config = config or GlupConfig()
    _validate_problem(scene, candidates)
    n = scene.pixel_count
    n_prime = candidates.size

    gram = GramSolver(candidates.columns, config.rho)
    base = candidates.columns.T @ scene.data
    base += config.rho

    z = np.zeros((n_prime, n))
    lam = np.zeros((n_prime + 1, n))
    history: list[tuple[float, float]] = []

    def x_step(z_cur, lam_cur):
        return _x_update(gram, base, z_cur, lam_cur, config.rho)

    x, z, lam, r_norm, p_norm, iterations = _admm_loop(
        x_step, z, z, lam, config.mu, config.rho,
        config.eps_primal, config.eps_dual, config.max_iterations,
        history=history,
    )
    converged = r_norm < config.eps_primal and p_norm < config.eps_dual
    return SolveReport(
        abundance=AbundanceEstimate.certify(z),
        iterations=iterations,
        converged=converged,
        final_primal_residual=r_norm,
        final_dual_residual=p_norm,
        objective_value=glup_objective(scene, candidates, z, config.mu),
        residual_history=np.array(history, dtype=np.float64).reshape(-1, 2),
        state=AdmmState(x=x, z=z, lam=lam, primal_residual_norm=r_norm,
                        dual_residual_norm=p_norm, iteration=iterations),
    )
