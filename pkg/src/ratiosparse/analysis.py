"""Desk-scale checks of the recovery theory and convergence diagnostics.

* :func:`check_ensp` tests the extended null space property
  ``(1-c)^(1/p) ||v_T||_p <= c^(1/p) ||v_{T^c}||_p`` on tiny matrices.
* :func:`kernel_ratio_infimum` bounds ``inf ||v||_p / ||v||_2`` over the kernel.
* :func:`toy_example_scan` walks the one-parameter solution line of a 7 x 8
  system whose sparsest member sits at ``sigma = 0``.
* :func:`descent_report` summarises an ADMM run against the penalty threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .core import ProblemInstance, SolveResult, SolverConfig, count_nonzeros, ratio_half_over_two
from .gen import rng_for
from .solver import lagrangian_increases

MAX_ENSP_COLUMNS = 24
_REL_TOL = 1e-12


# ------------------------------------------------------------------ kernel helpers


def kernel_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker(A) as columns (n x k, possibly k = 0)."""
    return sla.null_space(np.asarray(A, dtype=float))


def _vertex_directions(N: np.ndarray) -> np.ndarray:
    """Kernel vectors with at least k - 1 prescribed zeros.

    These are the extreme rays of the kernel cut by the l1 ball, so for p = 1
    every quantity here that is maximised over them is maximised exactly.
    """
    n, k = N.shape
    if k == 1:
        return N.T.copy()
    out = []
    for zeros in itertools.combinations(range(n), k - 1):
        sub = N[list(zeros), :]
        z = sla.null_space(sub)
        if z.shape[1] == 1:
            v = N @ z[:, 0]
            nv = np.linalg.norm(v)
            if nv > 0:
                out.append(v / nv)
    return np.array(out) if out else np.zeros((0, n))


def _sample_directions(N: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
    k = N.shape[1]
    z = rng_for(seed, k).standard_normal((n_samples, k))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ N.T


# ------------------------------------------------------------------ eNSP


@dataclass(frozen=True)
class EnspCertificate:
    """Outcome of an eNSP check.

    ``worst`` is the largest ``||v_T||_p^p / ||v||_p^p`` found; the property
    holds iff it does not exceed ``c``. ``sampled`` is true when the kernel
    sphere was only sampled, so ``holds = True`` is evidence, not proof.
    """

    s: int
    p: float
    c: float
    holds: bool
    worst: float
    sampled: bool
    witness_v: Optional[np.ndarray] = None
    witness_T: Optional[tuple] = None
    note: str = ""

    def __post_init__(self):
        if self.holds != (self.witness_v is None):
            raise ValueError("a failing certificate needs a witness and a passing one must not carry one")


def _top_share(V: np.ndarray, s: int, p: float) -> np.ndarray:
    """max over |T| <= s of ||v_T||_p^p / ||v||_p^p, row-wise."""
    P = np.abs(V) ** p
    tot = P.sum(axis=1)
    top = -np.sort(-P, axis=1)[:, :s].sum(axis=1)
    return top / tot


def ensp_violated(v, T, p: float, c: float) -> bool:
    v = np.asarray(v, dtype=float)
    mask = np.zeros(v.size, dtype=bool)
    mask[list(T)] = True
    lhs = (1.0 - c) ** (1.0 / p) * np.sum(np.abs(v[mask]) ** p) ** (1.0 / p)
    rhs = c ** (1.0 / p) * np.sum(np.abs(v[~mask]) ** p) ** (1.0 / p)
    return bool(lhs > rhs * (1.0 + _REL_TOL) + 1e-300)


def check_ensp(A, s: int, p: float, c: float, n_kernel_samples: int = 2000, seed: int = 0) -> EnspCertificate:
    """Check the eNSP of order ``s`` for ``A``.

    For a fixed kernel vector the worst support is its ``s`` largest
    magnitudes, so supports are handled exactly. Kernel directions come from
    the l1 extreme rays (exact when ``p = 1`` or the kernel is a line), random
    samples, and a Nelder-Mead polish of the best few.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if n > MAX_ENSP_COLUMNS:
        raise ValueError(f"n = {n} exceeds the enumerable limit of {MAX_ENSP_COLUMNS}")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if not 1 <= s <= n:
        raise ValueError("s must lie in 1..n")
    N = kernel_basis(A)
    k = N.shape[1]
    if k == 0:
        return EnspCertificate(s, p, c, True, 0.0, False, note="trivial kernel: holds vacuously")
    if s >= n:
        # T = [n] leaves T^c empty, which every nonzero kernel vector violates
        v = N[:, 0]
        return EnspCertificate(s, p, c, False, 1.0, False, v, tuple(range(n)))

    exact = p == 1.0 or k == 1
    cands = [_vertex_directions(N)]
    if not exact:
        cands.append(_sample_directions(N, n_kernel_samples, seed))
    V = np.vstack(cands)
    share = _top_share(V, s, p)
    if not exact:
        def neg_share(z):
            v = N @ z
            return -_top_share(v[None, :], s, p)[0] if np.any(v) else 0.0

        for i in np.argsort(-share)[:5]:
            z0 = N.T @ V[i]
            res = minimize(neg_share, z0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
            v = N @ res.x
            if np.any(v):
                V = np.vstack([V, v / np.linalg.norm(v)])
                share = np.append(share, -res.fun)
    best = int(np.argmax(share))
    worst = float(share[best])
    v = V[best]
    T = tuple(sorted(int(i) for i in np.argsort(-np.abs(v))[:s]))
    if ensp_violated(v, T, p, c):
        return EnspCertificate(s, p, c, False, worst, not exact, v, T)
    return EnspCertificate(s, p, c, True, worst, not exact)


# ------------------------------------------------------------------ kernel ratio


def kernel_ratio_infimum(A, p: float, n_samples: int = 5000, seed: int = 0) -> float:
    """Upper bound on ``inf ||v||_p / ||v||_2`` over nonzero kernel vectors.

    The value is the smallest ratio found among l1 extreme rays, random
    directions and a Nelder-Mead refinement of the best ones. It is at least 1
    for ``p <= 2``.
    """
    if not 0 < p <= 2:
        raise ValueError("p must lie in (0, 2]")
    N = kernel_basis(A)
    if N.shape[1] == 0:
        raise ValueError("kernel is trivial; the infimum is undefined")

    def ratio_rows(V):
        return np.sum(np.abs(V) ** p, axis=1) ** (1.0 / p) / np.linalg.norm(V, axis=1)

    V = np.vstack([_vertex_directions(N), _sample_directions(N, n_samples, seed)])
    r = ratio_rows(V)

    def f(z):
        v = N @ z
        return ratio_rows(v[None, :])[0] if np.any(v) else math.inf

    best = float(r.min())
    for i in np.argsort(r)[:5]:
        res = minimize(f, N.T @ V[i], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
        best = min(best, float(res.fun))
    return max(best, 1.0)  # rounding can dip below the true bound


# ------------------------------------------------------------------ toy example

TOY_A = np.array(
    [
        [1, -1, 0, 0, 0, 0, 0, 0],
        [1, 0, -1, 0, 0, 0, 0, 0],
        [0, 1, 1, 1, 0, 0, 0, 0],
        [-2, -2, 0, 0, 1, 0, 0, 0],
        [-1, -1, 0, 0, 0, 1, 0, 0],
        [-1, 0, -1, 0, 0, 0, 1, 0],
        [-2, -2, -2, 0, 0, 0, 0, 1],
    ],
    dtype=float,
)
TOY_B = np.array([0, 0, 20, 40, 16, 25, 39], dtype=float)


TOY_X0 = np.array([0, 0, 0, 20, 40, 16, 25, 39], dtype=float)
TOY_KERNEL = np.array([1, 1, 1, -2, 4, 2, 2, 6], dtype=float)


def toy_point(sigma: float) -> np.ndarray:
    """The solution of ``TOY_A x = TOY_B`` parametrised by ``sigma``.

    The line is ``TOY_X0 + sigma * TOY_KERNEL``; ``TOY_KERNEL`` spans ker(TOY_A).
    """
    return TOY_X0 + float(sigma) * TOY_KERNEL


def parse_grid(text: str) -> np.ndarray:
    """``"a:step:b"`` -> inclusive grid, with each point rounded to 12 decimals."""
    try:
        a, step, b = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"grid must look like a:step:b, got {text!r}") from exc
    if step <= 0 or b < a:
        raise ValueError("grid needs step > 0 and b >= a")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


@dataclass
class ToyScan:
    sigma: np.ndarray
    ratio: np.ndarray
    l1: np.ndarray
    l1_minus_l2: np.ndarray
    feasibility: np.ndarray  # ||A x(sigma) - b||_2

    @property
    def best_sigma(self) -> float:
        return float(self.sigma[int(np.argmin(self.ratio))])

    def argmins(self) -> dict:
        return {
            name: float(self.sigma[int(np.argmin(getattr(self, name)))])
            for name in ("ratio", "l1", "l1_minus_l2")
        }


def toy_example_scan(sigma_grid=None) -> ToyScan:
    sigma = parse_grid("-15:0.01:25") if sigma_grid is None else np.asarray(sigma_grid, dtype=float)
    if sigma.size == 0:
        raise ValueError("empty sigma grid")
    X = TOY_X0 + np.outer(sigma, TOY_KERNEL)
    feas = np.linalg.norm(X @ TOY_A.T - TOY_B, axis=1)
    l1 = np.abs(X).sum(axis=1)
    l2 = np.linalg.norm(X, axis=1)
    ratio = np.array([ratio_half_over_two(x) for x in X])
    return ToyScan(sigma, ratio, l1, l1 - l2, feas)


def toy_nonzeros(sigma: float) -> int:
    return count_nonzeros(toy_point(sigma), tol=0.0)


# ------------------------------------------------------------------ descent diagnostics


@dataclass
class DescentReport:
    lambda_min: float
    lipschitz_g: float
    rho_threshold: float
    rho: float
    rho_ok: bool
    violations: int
    rate: Optional[float]
    rate_note: str
    iterations: int
    termination: str

    def to_text(self) -> str:
        lines = []
        for key, val in asdict(self).items():
            lines.append(f"{key}={'' if val is None else val}")
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for ln in text.splitlines():
        if ln.strip():
            key, _, val = ln.partition("=")
            out[key.strip()] = val.strip()
    return out


def _fit_rate(dist: np.ndarray):
    """Least-squares slope of log ``dist`` over its tail, as a contraction factor."""
    if dist.size == 0 or np.all(dist == 0):
        return 0.0, "converged immediately"
    tail = max(10, int(math.ceil(0.2 * dist.size)))
    d = dist[-tail:]
    k = np.arange(dist.size)[-tail:]
    keep = d > 0
    if keep.sum() < 2:
        return 0.0, "converged immediately"
    slope = np.polyfit(k[keep], np.log(d[keep]), 1)[0]
    return float(math.exp(slope)), "fitted"


def descent_report(result: SolveResult, instance: ProblemInstance, config: SolverConfig) -> DescentReport:
    """Compare a run with the penalty threshold and estimate its linear rate.

    The rate uses ``||x_k - x_K||`` when iterates were recorded, otherwise the
    step lengths ``||x_k - x_{k-1}||``, which contract at the same rate.
    """
    trace = result.lagrangian_trace or result.objective_trace
    if len(trace) < 3:
        raise ValueError("need at least 3 recorded iterations")
    ev = np.linalg.eigvalsh(instance.A.T @ instance.A)
    lmin, lg = max(float(ev[0]), 0.0), float(ev[-1])
    thr = (-lmin + math.sqrt(lmin * lmin + 8.0 * lg * lg)) / 2.0
    rho = config.rho0
    if result.iterates:
        X = np.asarray(result.iterates)
        dist = np.linalg.norm(X[:-1] - X[-1], axis=1)
    else:
        dist = np.asarray(result.step_trace, dtype=float)
    if np.ptp(np.asarray(trace, dtype=float)) == 0 and (dist.size == 0 or np.all(dist == 0)):
        rate, note = 0.0, "converged immediately"
    else:
        rate, note = _fit_rate(dist)
    return DescentReport(
        lambda_min=lmin, lipschitz_g=lg, rho_threshold=thr, rho=rho, rho_ok=rho > thr,
        violations=lagrangian_increases(trace), rate=rate, rate_note=note,
        iterations=result.outer_iters, termination=result.termination,
    )
