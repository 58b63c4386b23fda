"""Problem containers, solver configuration and the l1/2-over-l2 objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

# Above this length the square-root sum is accumulated with math.fsum.
_FSUM_THRESHOLD = 10**6


class DimensionError(ValueError):
    pass


def _as_finite_vector(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Sensing matrix ``A`` (m x n), observation ``b`` and optional ground truth."""

    A: np.ndarray
    b: np.ndarray
    ground_truth: Optional[np.ndarray] = None
    noise_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        A = np.array(self.A, dtype=float, order="F")
        b = np.array(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionError(f"A must be a non-empty matrix, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise DimensionError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.ground_truth is not None:
            gt = np.array(self.ground_truth, dtype=float)
            if gt.shape != (A.shape[1],):
                raise DimensionError(
                    f"ground_truth has shape {gt.shape}, expected ({A.shape[1]},)"
                )
            gt.setflags(write=False)
            object.__setattr__(self, "ground_truth", gt)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b


@dataclass(frozen=True)
class ResidualBalance:
    """Residual-balancing penalty rule: grow when primal dominates, shrink when dual does."""

    mu: float = 10.0
    tau_incr: float = 2.0
    tau_decr: float = 2.0

    def __post_init__(self):
        if self.mu <= 1 or self.tau_incr <= 1 or self.tau_decr <= 1:
            raise ValueError("residual balance needs mu, tau_incr, tau_decr > 1")


@dataclass(frozen=True)
class ConjugateGradient:
    tol: float = 1e-10
    max_iter: Optional[int] = None  # None -> 10 n

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("CG tolerance must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("CG max_iter must be positive")


YSolver = Union[Literal["auto", "smw"], ConjugateGradient]


@dataclass(frozen=True)
class SolverConfig:
    """Tunables of the nested ADMM.

    ``max_total_iters`` defaults to ``5 * n`` outer iterations; the effective
    outer cap is ``min(max_outer, max_total_iters)``.

    ``u_weight`` picks the quadratic weight of the u-subproblem: ``"gamma"``
    (the inner augmented Lagrangian's own penalty) or ``"delta_tilde"``.
    ``monotone_x`` rejects an inner result that does not lower the outer
    x-subproblem objective, keeping the previous x instead.
    ``record_iterates`` keeps every outer x, for rate diagnostics.
    """

    zeta: float = 1e-5
    rho0: float = 1.0
    gamma0: float = 1.0
    eps_out: float = 1e-10
    eps_inner: float = 1e-8
    max_outer: int = 100_000
    max_inner: int = 50
    rel_change_tol: float = 1e-8
    max_total_iters: Optional[int] = None
    adaptive_penalty: Optional[ResidualBalance] = None
    adapt_gamma: bool = False
    y_solver: YSolver = "auto"
    warm_start_inner: bool = False
    u_weight: Literal["gamma", "delta_tilde"] = "gamma"
    monotone_x: bool = True
    record_iterates: bool = False

    def __post_init__(self):
        for name in ("zeta", "rho0", "gamma0", "eps_out", "eps_inner", "rel_change_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("max_outer", "max_inner"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_total_iters is not None and self.max_total_iters < 1:
            raise ValueError("max_total_iters must be strictly positive")
        if self.u_weight not in ("gamma", "delta_tilde"):
            raise ValueError(f"unknown u_weight {self.u_weight!r}")
        if not (self.y_solver in ("auto", "smw") or isinstance(self.y_solver, ConjugateGradient)):
            raise ValueError(f"unknown y_solver {self.y_solver!r}")

    def outer_cap(self, n: int) -> int:
        total = self.max_total_iters if self.max_total_iters is not None else 5 * n
        return min(self.max_outer, total)


Termination = Literal["converged", "max_iters", "stalled"]


@dataclass
class SolveResult:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    objective_trace: list = field(default_factory=list)
    lagrangian_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)  # ||x_k - x_{k-1}||
    iterates: Optional[list] = None
    termination: Termination = "max_iters"
    outer_iters: int = 0
    total_inner_iters: int = 0
    rho: float = float("nan")
    gamma: float = float("nan")

    def __post_init__(self):
        if len(self.objective_trace) != self.outer_iters:
            raise ValueError("objective_trace length must equal outer_iters")


def ratio_half_over_two(x) -> float:
    """sum(sqrt|x_i|) / ||x||_2^(1/2); equal to 1 at the zero vector."""
    x = _as_finite_vector(x)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return 1.0
    # scale invariance lets us normalise away under/overflow in x_i^2
    x = x / peak
    sq = float(np.dot(x, x))
    roots = np.sqrt(np.abs(x))
    num = math.fsum(roots) if x.size > _FSUM_THRESHOLD else float(roots.sum())
    return num / math.sqrt(math.sqrt(sq))


def objective_h(instance: ProblemInstance, zeta: float, x) -> float:
    x = _as_finite_vector(x)
    if x.shape != (instance.n,):
        raise DimensionError(f"x has length {x.size}, expected {instance.n}")
    r = instance.residual(x)
    return zeta * ratio_half_over_two(x) + 0.5 * float(r @ r)


# ---------------------------------------------------------------- text format


def format_instance(instance: ProblemInstance) -> str:
    """Render as: ``m n`` header, m rows of A, one row of b, optional ``#gt`` row."""
    fmt = lambda row: " ".join(repr(float(v)) for v in row)
    lines = [f"{instance.m} {instance.n}"]
    lines.extend(fmt(row) for row in instance.A)
    lines.append(fmt(instance.b))
    if instance.ground_truth is not None:
        lines.append("#gt " + fmt(instance.ground_truth))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> ProblemInstance:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty instance file")
    try:
        m, n = (int(tok) for tok in rows[0].split())
    except ValueError as exc:
        raise ValueError(f"bad header line {rows[0]!r}; expected 'm n'") from exc
    if len(rows) < m + 2:
        raise ValueError(f"expected {m} matrix rows plus b, got {len(rows) - 1} rows")

    def parse_row(line, width, lineno):
        vals = line.split()
        if len(vals) != width:
            raise ValueError(f"line {lineno}: expected {width} values, got {len(vals)}")
        try:
            return [float(v) for v in vals]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc

    A = np.array([parse_row(rows[1 + i], n, 2 + i) for i in range(m)])
    b = np.array(parse_row(rows[1 + m], m, 2 + m))
    gt = None
    rest = rows[2 + m :]
    if rest:
        if not rest[0].startswith("#gt"):
            raise ValueError(f"unexpected trailing line {rest[0][:40]!r}")
        gt = np.array(parse_row(rest[0][3:], n, 3 + m))
    return ProblemInstance(A, b, ground_truth=gt)


def save_instance(instance: ProblemInstance, path) -> None:
    Path(path).write_text(format_instance(instance))


def load_instance(path) -> ProblemInstance:
    return parse_instance(Path(path).read_text())


def count_nonzeros(x: Sequence[float], tol: float = 1e-6) -> int:
    return int(np.sum(np.abs(np.asarray(x)) > tol))
