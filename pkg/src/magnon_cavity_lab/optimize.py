"""Damped Gauss-Newton (Levenberg-Marquardt) least squares."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    initial_damping: float = 1e-8
    damping_up: float = 10.0
    damping_down: float = 10.0
    jacobian: str = "analytic"  # or "forward"
    fd_relative_step: float = 1e-7

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.gradient_tolerance > 0 and self.step_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if not self.initial_damping > 0:
            raise ValueError("initial_damping must be positive")
        if not (self.damping_up > 1 and self.damping_down > 1):
            raise ValueError("damping factors must exceed 1")
        if self.jacobian not in ("analytic", "forward"):
            raise ValueError("jacobian must be 'analytic' or 'forward'")
        if not self.fd_relative_step > 0:
            raise ValueError("fd_relative_step must be positive")


@dataclass
class Diagnostics:
    converged: bool
    status: str
    iterations: int
    nfev: int
    njev: int
    cost: float
    gradient_norm: float
    rank_deficient: bool = False
    rank: int = 0
    cost_history: list = field(default_factory=list)


class LeastSquaresResult(NamedTuple):
    params: np.ndarray
    covariance: np.ndarray
    diagnostics: Diagnostics


def forward_difference_jacobian(fun, p, r0=None, rel_step=1e-7):
    p = np.asarray(p, dtype=float)
    if r0 is None:
        r0 = np.asarray(fun(p), dtype=float)
    J = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1.0)
        q = p.copy()
        q[j] += h
        h = q[j] - p[j]
        J[:, j] = (np.asarray(fun(q), dtype=float) - r0) / h
    return J


def central_difference_jacobian(fun, p, rel_step=1e-4):
    """Richardson-extrapolated central differences; used as a test oracle."""
    p = np.asarray(p, dtype=float)

    def cd(h_rel):
        cols = []
        for j in range(p.size):
            h = h_rel * max(abs(p[j]), 1.0)
            qp, qm = p.copy(), p.copy()
            qp[j] += h
            qm[j] -= h
            cols.append((np.asarray(fun(qp), float) - np.asarray(fun(qm), float)) / (qp[j] - qm[j]))
        return np.column_stack(cols)

    return (4.0 * cd(rel_step / 2) - cd(rel_step)) / 3.0


def _covariance(J, cost, m, n):
    JTJ = J.T @ J
    s = np.linalg.svd(J, compute_uv=False)
    tol = s.max(initial=0.0) * max(J.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    dof = m - n
    variance = 2.0 * cost / dof if dof > 0 else np.nan
    cov = np.linalg.pinv(JTJ, hermitian=True) * variance
    return cov, rank


def least_squares(residual_fn: Callable, initial_params, settings: Optional[OptimizerSettings] = None,
                  jacobian_fn: Optional[Callable] = None) -> LeastSquaresResult:
    """Minimise ``0.5 * ||r(p)||**2`` by Levenberg-Marquardt.

    The damped normal equations are ``(J^T J + mu diag(J^T J)) dp = -J^T r``.
    Steps that reduce the cost are accepted and ``mu`` shrinks by
    ``damping_down``; rejected steps grow ``mu`` by ``damping_up``. Only
    accepted steps count as iterations, so the cost is non-increasing over
    the recorded history, up to rounding: a step whose predicted gain is
    below the rounding error of the cost is accepted on the model's word.

    Convergence is declared when the largest cosine between ``r`` and a
    column of ``J`` drops below ``gradient_tolerance``, when the relative
    step size drops below ``step_tolerance``, or when the residual vanishes.

    If a trial point produces non-finite residuals the run stops and returns
    the last finite iterate with ``converged=False``. The covariance is
    ``pinv(J^T J) * 2 cost / (m - n)``; a rank-deficient Jacobian is reported
    in the diagnostics and with a warning.

    Parameters
    ----------
    residual_fn : callable
        ``residual_fn(p) -> ndarray`` of shape ``(m,)``.
    initial_params : array_like
        Starting point; residuals there must be finite.
    settings : OptimizerSettings, optional
    jacobian_fn : callable, optional
        ``jacobian_fn(p) -> ndarray (m, n)``; required when
        ``settings.jacobian == "analytic"``, otherwise finite differences are
        used.

    Returns
    -------
    LeastSquaresResult
        ``(params, covariance, diagnostics)``.
    """
    settings = settings or OptimizerSettings()
    p = np.array(initial_params, dtype=float)
    r = np.asarray(residual_fn(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial parameters")
    use_fd = settings.jacobian == "forward" or jacobian_fn is None
    m, n = r.size, p.size

    def jac(q, rq):
        if use_fd:
            return forward_difference_jacobian(residual_fn, q, rq, settings.fd_relative_step)
        return np.asarray(jacobian_fn(q), dtype=float)

    nfev, njev = 1, 1
    cost = 0.5 * float(r @ r)
    history = [cost]
    J = jac(p, r)
    if use_fd:
        nfev += n
    mu = settings.initial_damping
    status = "maximum iterations reached"
    converged = False
    it = 0
    while True:
        g = J.T @ r
        col_norms = np.linalg.norm(J, axis=0)
        rnorm = np.sqrt(2.0 * cost)
        if cost == 0.0:
            status, converged = "zero residual", True
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(col_norms > 0, np.abs(g) / (col_norms * rnorm), 0.0)
        if np.max(cosines, initial=0.0) <= settings.gradient_tolerance:
            status, converged = "gradient tolerance reached", True
            break
        if it >= settings.max_iterations:
            break
        A = J.T @ J
        scale = np.diag(A).copy()
        scale[scale <= 0] = 1.0
        accepted = False
        while True:
            try:
                step = np.linalg.solve(A + mu * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A + mu * np.diag(scale), -g, rcond=None)[0]
            p_new = p + step
            r_new = np.asarray(residual_fn(p_new), dtype=float)
            nfev += 1
            if not np.all(np.isfinite(r_new)):
                status = "non-finite residuals; returning last finite iterate"
                break
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
            # a final polishing step can change the cost by less than its rounding
            # error; accept it when the local model agrees the gain is that small
            noise = 8.0 * _EPS * cost
            predicted = -float(g @ step + 0.5 * step @ (A @ step))
            if cost_new - cost <= noise and 0.0 < predicted <= noise:
                accepted = True
                break
            if np.linalg.norm(step) <= settings.step_tolerance * (np.linalg.norm(p) + settings.step_tolerance):
                status, converged = "step tolerance reached", True
                break
            mu *= settings.damping_up
            if mu > 1e16:
                status = "damping overflow; no descent direction found"
                break
        if not accepted:
            break
        it += 1
        small_step = np.linalg.norm(step) <= settings.step_tolerance * (np.linalg.norm(p) + settings.step_tolerance)
        p, r, cost = p_new, r_new, cost_new
        history.append(cost)
        mu = max(mu / settings.damping_down, 1e-300)
        J = jac(p, r)
        njev += 1
        if use_fd:
            nfev += n
        if small_step:
            status, converged = "step tolerance reached", True
            break

    cov, rank = _covariance(J, cost, m, n)
    deficient = rank < n
    if deficient:
        warnings.warn(f"Jacobian is rank deficient (rank {rank} < {n} parameters)", RuntimeWarning, stacklevel=2)
    diag = Diagnostics(converged=converged, status=status, iterations=it, nfev=nfev, njev=njev,
                       cost=cost, gradient_norm=float(np.max(np.abs(J.T @ r), initial=0.0)),
                       rank_deficient=deficient, rank=rank, cost_history=history)
    return LeastSquaresResult(p, cov, diag)
