"""Nested ADMM for  min_x  zeta * ratio(x) + 1/2 ||Ax - b||^2.

Outer splitting x = y, with the multiplier ``lam`` kept unscaled:

    x+   = argmin_x zeta*ratio(x) + rho/2 ||x - theta||^2,   theta = y - lam/rho
    y+   = (I + A^T A / rho)^{-1} (A^T b / rho + lam / rho + x+)
    lam+ = lam + rho (x+ - y+)

The x-step is itself solved by an inner ADMM that splits the denominator of
the ratio onto a copy ``u`` of x: the x-update is coordinate-wise
half-thresholding and the u-update a one-dimensional quintic root.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .core import (
    ConjugateGradient,
    ProblemInstance,
    ResidualBalance,
    SolveResult,
    SolverConfig,
    objective_h,
    ratio_half_over_two,
)
from .prox import half_threshold_vector, solve_u_subproblem

log = logging.getLogger(__name__)

SMW_MAX_ROWS = 2048


class SolverDivergence(RuntimeError):
    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class OuterState:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    rho: float
    k: int = 0


@dataclass
class InnerState:
    x: np.ndarray
    u: np.ndarray
    vartheta: np.ndarray
    gamma: float
    theta_k: np.ndarray
    t: int = 0


# ------------------------------------------------------------------ y-update


class YUpdateFactorization:
    """Solver for ``(I + A^T A / rho) y = v`` with a per-rho cache.

    ``"smw"`` factorises the smaller of ``rho I_m + A A^T`` (Woodbury) and
    ``rho I_n + A^T A``; a :class:`ConjugateGradient` strategy runs CG on the
    n x n system instead.
    """

    def __init__(self, A: np.ndarray, strategy="auto"):
        self.A = A
        if strategy == "auto":
            strategy = "smw" if A.shape[0] <= SMW_MAX_ROWS else ConjugateGradient()
        self.strategy = strategy
        self.rho_at_factorization: Optional[float] = None
        self._chol = None
        self._gram = None

    @property
    def tag(self) -> str:
        return "smw" if self.strategy == "smw" else "cg"

    def invalidate(self):
        self.rho_at_factorization = None
        self._chol = None

    def _factor(self, rho):
        m, n = self.A.shape
        if self._gram is None:
            self._gram = self.A @ self.A.T if m <= n else self.A.T @ self.A
        k = self._gram.shape[0]
        try:
            self._chol = sla.cho_factor(self._gram + rho * np.eye(k), lower=False)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"y-update factorisation failed at rho={rho}") from exc
        self.rho_at_factorization = rho

    def solve(self, v: np.ndarray, rho: float, x0: Optional[np.ndarray] = None) -> np.ndarray:
        if self.strategy == "smw":
            if self.rho_at_factorization != rho:
                self._factor(rho)
            A = self.A
            m, n = A.shape
            if m <= n:
                # (I + A^T A/rho)^{-1} = I - A^T (rho I_m + A A^T)^{-1} A
                return v - A.T @ sla.cho_solve(self._chol, A @ v)
            return rho * sla.cho_solve(self._chol, v)
        return self._cg(v, rho, x0)

    def _cg(self, v, rho, x0):
        A = self.A
        n = A.shape[1]
        max_iter = self.strategy.max_iter or 10 * n
        op = lambda z: z + (A.T @ (A @ z)) / rho
        y = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        r = v - op(y)
        p = r.copy()
        rs = float(r @ r)
        target = (self.strategy.tol * np.linalg.norm(v)) ** 2
        for _ in range(max_iter):
            if rs <= target:
                break
            Ap = op(p)
            alpha = rs / float(p @ Ap)
            y += alpha * p
            r -= alpha * Ap
            rs_new = float(r @ r)
            p = r + (rs_new / rs) * p
            rs = rs_new
        return y


def y_update(x_next, lam, rho, instance: ProblemInstance, fact: YUpdateFactorization, atb=None):
    atb = instance.A.T @ instance.b if atb is None else atb
    v = (atb + lam) / rho + x_next
    return fact.solve(v, rho, x0=x_next)


# ------------------------------------------------------------------ penalties


def adapt_penalty(rho: float, primal_res: float, dual_res: float, policy: Optional[ResidualBalance]) -> float:
    if policy is None:
        return rho
    if primal_res > policy.mu * dual_res:
        return rho * policy.tau_incr
    if dual_res > policy.mu * primal_res:
        return rho / policy.tau_decr
    return rho


# ------------------------------------------------------------------ inner ADMM


def _delta_tilde(state: InnerState, rho: float, zeta: float) -> float:
    nu = float(np.linalg.norm(state.u))
    if nu == 0.0:
        nu = float(np.linalg.norm(state.theta_k))
        if nu == 0.0:
            return 0.0
    return 2.0 * zeta / ((state.gamma + rho) * math.sqrt(nu))


def inner_x_update(state: InnerState, rho: float, zeta: float) -> np.ndarray:
    """Half-thresholding step of the inner ADMM."""
    g = state.gamma
    p = state.u - state.vartheta / g
    m = (rho * state.theta_k + g * p) / (g + rho)
    return half_threshold_vector(m, _delta_tilde(state, rho, zeta))


def inner_admm_solve(
    theta_k,
    rho: float,
    gamma: float,
    zeta: float,
    warm=None,
    T: int = 50,
    eps_inner: float = 1e-8,
    u_weight: str = "gamma",
    adapt: Optional[ResidualBalance] = None,
    x_start=None,
):
    """Approximately solve ``min_x zeta*ratio(x) + rho/2 ||x - theta_k||^2``.

    ``warm`` is an optional ``(u, vartheta)`` pair; otherwise ``u`` starts at
    ``x_start`` (default ``theta_k``) and ``vartheta`` at zero.

    Returns ``(x, iters, state)``.
    """
    theta_k = np.asarray(theta_k, dtype=float)
    n = theta_k.size
    if warm is not None:
        u0, v0 = (np.array(w, dtype=float) for w in warm)
    else:
        u0 = np.array(theta_k if x_start is None else x_start, dtype=float)
        v0 = np.zeros(n)
    state = InnerState(x=u0.copy(), u=u0, vartheta=v0, gamma=gamma, theta_k=theta_k)
    iters = 0
    for t in range(T):
        x = inner_x_update(state, rho, zeta)
        c = float(np.sum(np.sqrt(np.abs(x))))
        g = state.gamma
        d = x + state.vartheta / g
        if u_weight == "gamma":
            w = g
        else:
            w = _delta_tilde(state, rho, zeta) or g
        u_prev = state.u
        u = solve_u_subproblem(d, c, zeta, w)
        vartheta = state.vartheta + g * (x - u)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(vartheta))):
            raise SolverDivergence("non-finite inner iterate", t)
        state.x, state.u, state.vartheta, state.t = x, u, vartheta, t + 1
        iters = t + 1
        primal = float(np.linalg.norm(x - u))
        if primal < eps_inner:
            break
        if adapt is not None:
            state.gamma = adapt_penalty(g, primal, g * float(np.linalg.norm(u - u_prev)), adapt)
    return state.x, iters, state


# ------------------------------------------------------------------ merit / Lagrangian


def augmented_lagrangian(x, y, lam, rho, zeta, instance: ProblemInstance) -> float:
    r = instance.residual(y)
    dxy = x - y
    return (
        zeta * ratio_half_over_two(x)
        + 0.5 * float(r @ r)
        + float(lam @ dxy)
        + 0.5 * rho * float(dxy @ dxy)
    )


def merit_value(x, y, rho, zeta, instance: ProblemInstance) -> float:
    """zeta*ratio(x) + g(x) + rho/2 ||x - y||^2 with g(x) = 1/2||Ax - b||^2."""
    d = np.asarray(x) - np.asarray(y)
    return objective_h(instance, zeta, x) + 0.5 * rho * float(d @ d)


def _x_subproblem_value(x, theta, rho, zeta):
    d = x - theta
    return zeta * ratio_half_over_two(x) + 0.5 * rho * float(d @ d)


# ------------------------------------------------------------------ outer ADMM


def admm_solve(
    instance: ProblemInstance,
    config: SolverConfig,
    x0=None,
    y0=None,
    lambda0=None,
) -> SolveResult:
    n = instance.n
    zero = np.zeros(n)
    x = np.array(zero if x0 is None else x0, dtype=float)
    y = np.array(x if y0 is None else y0, dtype=float)
    lam = np.array(zero if lambda0 is None else lambda0, dtype=float)
    for name, vec in (("x0", x), ("y0", y), ("lambda0", lam)):
        if vec.shape != (n,):
            raise ValueError(f"{name} has shape {vec.shape}, expected ({n},)")

    zeta = config.zeta
    rho, gamma = config.rho0, config.gamma0
    fact = YUpdateFactorization(instance.A, config.y_solver)
    atb = instance.A.T @ instance.b
    cap = config.outer_cap(n)
    inner_adapt = config.adaptive_penalty if config.adapt_gamma else None

    result = SolveResult(x=x, y=y, lam=lam, iterates=[] if config.record_iterates else None)
    warm = None
    total_inner = 0
    termination = "max_iters"
    k = 0
    for k in range(1, cap + 1):
        theta = y - lam / rho
        x_new, iters, inner = inner_admm_solve(
            theta, rho, gamma, zeta,
            warm=warm if config.warm_start_inner else None,
            T=config.max_inner, eps_inner=config.eps_inner,
            u_weight=config.u_weight, adapt=inner_adapt, x_start=x,
        )
        total_inner += iters
        if inner_adapt is not None:
            gamma = inner.gamma
        warm = (inner.u, inner.vartheta)
        rejected = config.monotone_x and (
            _x_subproblem_value(x_new, theta, rho, zeta) > _x_subproblem_value(x, theta, rho, zeta)
        )
        if rejected:
            x_new = x
        y_new = y_update(x_new, lam, rho, instance, fact, atb=atb)
        lam = lam + rho * (x_new - y_new)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new)) and np.all(np.isfinite(lam))):
            raise SolverDivergence("non-finite outer iterate", k)

        x_prev, y_prev = x, y
        x, y = x_new, y_new
        primal = float(np.linalg.norm(x - y))
        result.objective_trace.append(objective_h(instance, zeta, x))
        result.lagrangian_trace.append(augmented_lagrangian(x, y, lam, rho, zeta, instance))
        result.residual_trace.append(primal)
        result.step_trace.append(float(np.linalg.norm(x - x_prev)))
        if result.iterates is not None:
            result.iterates.append(x.copy())

        if primal < config.eps_out:
            termination = "converged"
            break
        nx = float(np.linalg.norm(x))
        if nx > 0 and result.step_trace[-1] / nx < config.rel_change_tol:
            # a rejected inner step leaves x fixed by construction; only call
            # that a stall once y has stopped moving too
            ny = float(np.linalg.norm(y))
            y_still = ny == 0 or float(np.linalg.norm(y - y_prev)) / ny < config.rel_change_tol
            if not rejected or y_still:
                termination = "stalled"
                break

        if config.adaptive_penalty is not None:
            new_rho = adapt_penalty(rho, primal, rho * float(np.linalg.norm(y - y_prev)), config.adaptive_penalty)
            if new_rho != rho:
                rho = new_rho
                fact.invalidate()

    if termination == "max_iters":
        log.debug("admm_solve hit the iteration cap (%d)", cap)
    result.x, result.y, result.lam = x, y, lam
    result.termination = termination
    result.outer_iters = len(result.objective_trace)
    result.total_inner_iters = total_inner
    result.rho, result.gamma = rho, gamma
    return result


def sufficient_descent_rho(A: np.ndarray) -> float:
    """Penalty above which the augmented Lagrangian provably does not increase."""
    ev = np.linalg.eigvalsh(A.T @ A)
    lmin = max(float(ev[0]), 0.0)
    lg = float(ev[-1])
    return (-lmin + math.sqrt(lmin * lmin + 8.0 * lg * lg)) / 2.0


def lagrangian_increases(trace, slack: float = 1e-8) -> int:
    """Count steps where the trace rises by more than ``slack * (1 + |L0|)``."""
    trace = np.asarray(trace, dtype=float)
    if trace.size < 2:
        return 0
    tol = slack * (1.0 + abs(trace[0]))
    bad = int(np.sum(np.diff(trace) > tol))
    if bad:
        warnings.warn(f"augmented Lagrangian increased in {bad} step(s)", RuntimeWarning, stacklevel=2)
    return bad
