"""Reference solvers: l1 (ADMM), l1 - l2 (DCA) and IRLS-lp.

They share the outer stopping rule of the main solver: relative change of
the iterate below ``rel_change_tol`` or ``5 n`` iterations. The l1 ADMM is
the exception with a ``max(20 n, 2000)`` cap, since one of its iterations is a single
cheap splitting step and tiny ``zeta`` needs a few thousand of them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .core import ProblemInstance, ResidualBalance, SolveResult
from .solver import SolverDivergence

BASELINE_KINDS = ("l1_admm", "l1_minus_l2_dca", "irls_lp")


@dataclass(frozen=True)
class BaselineKind:
    tag: str
    p: Optional[float] = None

    def __post_init__(self):
        if self.tag not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.tag!r}")
        if self.tag == "irls_lp" and not (self.p is not None and 0 < self.p < 1):
            raise ValueError("irls_lp needs p in (0, 1)")


@dataclass(frozen=True)
class BaselineConfig:
    """Knobs for the reference solvers.

    ``rho`` is the starting ADMM penalty of the l1 solver; residual balancing
    then adapts it, which matters when ``zeta`` is tiny.
    """

    rho: float = 1.0
    rel_change_tol: float = 1e-8
    max_iters: Optional[int] = None  # None -> 5 n
    l1_max_iters: Optional[int] = None  # None -> max(20 n, 2000)
    admm_abs_tol: float = 1e-10
    balance: Optional[ResidualBalance] = ResidualBalance()
    balance_max_updates: int = 50  # rho is frozen after this many changes
    dca_inner_tol: float = 1e-6
    dca_max_outer: int = 50
    irls_eps0: float = 1.0
    irls_eps_min: float = 1e-12
    irls_alpha: float = 0.5

    def cap(self, n: int) -> int:
        return self.max_iters if self.max_iters is not None else 5 * n

    def l1_cap(self, n: int) -> int:
        return self.l1_max_iters if self.l1_max_iters is not None else max(20 * n, 2000)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class _WoodburySolver:
    """Solves (A^T A + rho I) x = v through the smaller Gram matrix."""

    def __init__(self, A):
        self.A = A
        m, n = A.shape
        self.wide = m <= n
        self.gram = A @ A.T if self.wide else A.T @ A
        self.rho = None

    def solve(self, v, rho):
        if rho != self.rho:
            self.chol = sla.cho_factor(self.gram + rho * np.eye(self.gram.shape[0]))
            self.rho = rho
        if self.wide:
            A = self.A
            return (v - A.T @ sla.cho_solve(self.chol, A @ v)) / rho
        return sla.cho_solve(self.chol, v)


def _l1_objective(instance, zeta, x, tilt):
    r = instance.residual(x)
    return zeta * float(np.abs(x).sum()) - float(tilt @ x) + 0.5 * float(r @ r)


def _l1_admm(instance, zeta, cfg: BaselineConfig, x0, tilt, rel_tol, max_iter, solver=None):
    """ADMM for  zeta ||x||_1 - <tilt, x> + 1/2 ||Ax - b||^2  (scaled dual)."""
    A, b = instance.A, instance.b
    n = instance.n
    solver = solver or _WoodburySolver(A)
    rhs0 = A.T @ b + tilt
    z = np.array(x0, dtype=float)
    u = np.zeros(n)
    rho = cfg.rho
    trace = []
    k = 0
    updates = 0
    for k in range(1, max_iter + 1):
        x = solver.solve(rhs0 + rho * (z - u), rho)
        z_prev = z
        z = _soft(x + u, zeta / rho)
        u = u + x - z
        if not np.all(np.isfinite(z)):
            raise SolverDivergence("non-finite l1 iterate", k)
        trace.append(_l1_objective(instance, zeta, z, tilt))
        primal = float(np.linalg.norm(x - z))
        step = float(np.linalg.norm(z - z_prev))
        nz = float(np.linalg.norm(z))
        if (nz > 0 and step / nz < rel_tol and primal <= max(cfg.admm_abs_tol, rel_tol * nz)) or (
            nz == 0 and step == 0 and primal <= cfg.admm_abs_tol
        ):
            return z, trace, k, "stalled" if nz > 0 else "converged"
        # an endlessly switching penalty can cycle; freezing it restores the
        # fixed-rho convergence guarantee for the tail of the run
        if cfg.balance is not None and updates < cfg.balance_max_updates:
            dual = rho * step
            if primal > cfg.balance.mu * dual:
                rho *= cfg.balance.tau_incr
                u /= cfg.balance.tau_incr
                updates += 1
            elif dual > cfg.balance.mu * primal:
                rho /= cfg.balance.tau_decr
                u *= cfg.balance.tau_decr
                updates += 1
    return z, trace, k, "max_iters"


def _result(x, trace, iters, termination, inner=0):
    x = np.asarray(x, dtype=float)
    return SolveResult(
        x=x, y=x.copy(), lam=np.zeros_like(x), objective_trace=list(trace),
        termination=termination, outer_iters=len(trace), total_inner_iters=inner,
    )


def solve_l1(instance: ProblemInstance, zeta: float, config: Optional[BaselineConfig] = None, x0=None) -> SolveResult:
    """zeta ||x||_1 + 1/2 ||Ax - b||^2 by ADMM with soft-thresholding."""
    cfg = config or BaselineConfig()
    x0 = np.zeros(instance.n) if x0 is None else x0
    x, trace, k, term = _l1_admm(
        instance, zeta, cfg, x0, np.zeros(instance.n), cfg.rel_change_tol, cfg.l1_cap(instance.n)
    )
    return _result(x, trace, k, term)


def l1_minus_l2_objective(instance, zeta, x) -> float:
    r = instance.residual(x)
    return zeta * (float(np.abs(x).sum()) - float(np.linalg.norm(x))) + 0.5 * float(r @ r)


def solve_l1_minus_l2_dca(
    instance: ProblemInstance, zeta: float, config: Optional[BaselineConfig] = None, x0=None
) -> SolveResult:
    """DCA for zeta (||x||_1 - ||x||_2) + 1/2 ||Ax - b||^2.

    Each step linearises -||x||_2 at the current point (subgradient 0 at the
    origin) and solves the tilted l1 problem by ADMM, warm-started. A
    subproblem answer that does not lower the tilted objective below its value
    at the current point is discarded, which keeps the trace monotone.
    """
    cfg = config or BaselineConfig()
    n = instance.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    solver = _WoodburySolver(instance.A)
    trace = []
    inner_total = 0
    termination = "max_iters"
    for k in range(1, cfg.dca_max_outer + 1):
        nx = float(np.linalg.norm(x))
        tilt = zeta * x / nx if nx > 0 else np.zeros(n)
        x_new, _, it, _ = _l1_admm(
            instance, zeta, cfg, x, tilt, cfg.dca_inner_tol, cfg.l1_cap(n), solver=solver
        )
        inner_total += it
        if _l1_objective(instance, zeta, x_new, tilt) > _l1_objective(instance, zeta, x, tilt):
            x_new = x
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        trace.append(l1_minus_l2_objective(instance, zeta, x))
        nx = float(np.linalg.norm(x))
        if nx == 0 or step / nx < cfg.rel_change_tol:
            termination = "converged" if step == 0 else "stalled"
            break
    return _result(x, trace, len(trace), termination, inner_total)


def irls_objective(instance, x, p, eps, lam) -> float:
    smooth = float(np.sum((x * x + eps * eps) ** (p / 2.0)))
    if lam == 0:
        return smooth
    r = instance.residual(x)
    return lam * smooth + 0.5 * float(r @ r)


def solve_irls_lp(
    instance: ProblemInstance,
    p: float = 0.5,
    config: Optional[BaselineConfig] = None,
    sparsity: Optional[int] = None,
    lam: float = 0.0,
    x0=None,
) -> SolveResult:
    """Iteratively reweighted least squares for the lp quasi-norm.

    ``lam = 0`` solves the equality-constrained problem ``Ax = b``; ``lam > 0``
    the penalised ``lam * sum(x_i^2 + eps^2)^(p/2) + 1/2 ||Ax - b||^2``.
    Weights are ``(x_i^2 + eps^2)^(p/2 - 1)`` with
    ``eps <- min(eps, alpha |x|_(s+1))``, ``|x|_(s+1)`` being the (s+1)-th
    largest magnitude and ``s`` the sparsity estimate. When the relative step
    drops below ``sqrt(eps) / 100`` the smoothing is additionally cut tenfold,
    so a dense iterate cannot pin ``eps`` in place. The trace records the
    smoothed objective at the current ``eps``. Starts from the pseudoinverse
    solution unless ``x0`` is given.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    cfg = config or BaselineConfig()
    A, b = instance.A, instance.b
    m, n = A.shape
    s = sparsity if sparsity is not None else max(1, m // 4)
    s = min(s, n - 1)
    x = np.linalg.lstsq(A, b, rcond=None)[0] if x0 is None else np.array(x0, dtype=float)
    eps = cfg.irls_eps0
    trace = []
    termination = "max_iters"
    shift = lam * p
    for k in range(1, cfg.cap(n) + 1):
        q = (x * x + eps * eps) ** (1.0 - p / 2.0)  # inverse weights
        AQ = A * q
        G = AQ @ A.T
        if shift > 0:
            G = G + shift * np.eye(m)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                x_new = q * (A.T @ sla.solve(G, b, assume_a="pos"))
        except (np.linalg.LinAlgError, sla.LinAlgError):
            x_new = q * (A.T @ np.linalg.lstsq(G, b, rcond=None)[0])
        if not np.all(np.isfinite(x_new)):
            raise SolverDivergence("non-finite IRLS iterate", k)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        mags = np.sort(np.abs(x))[::-1]
        eps = min(eps, cfg.irls_alpha * float(mags[s]))
        nx = float(np.linalg.norm(x))
        if nx > 0 and step / nx < math.sqrt(eps) / 100.0:
            eps /= 10.0  # the iterate settled at this smoothing level
        trace.append(irls_objective(instance, x, p, eps, lam))
        if nx == 0:
            termination = "converged"
            break
        if step / nx < cfg.rel_change_tol and eps < 1e-8:
            termination = "stalled"
            break
        if eps < cfg.irls_eps_min:
            termination = "converged"
            break
    return _result(x, trace, len(trace), termination)
