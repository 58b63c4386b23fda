"""Reproducible test instances.

Every random draw goes through ``numpy.random.Generator(Philox)`` keyed by a
``SeedSequence``; per-trial streams are derived from ``(master, cell, trial)``
so results do not depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import ProblemInstance


def rng_for(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def derive_seed(master: int, *path: int) -> int:
    """A 63-bit seed derived from a master seed and an index path."""
    ss = np.random.SeedSequence([int(master), *map(int, path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class GeneratorSpec:
    """Matrix family plus signal/noise parameters.

    ``kind`` is ``"gaussian"`` (parameter ``r`` in [0, 1)) or
    ``"oversampled_dct"`` (parameter ``F`` > 0), carried in ``param``.
    ``amplitudes`` is ``"normal"`` or ``"hdr"`` (log-uniform magnitudes in
    [1, 1e3] with random signs).
    """

    kind: str = "gaussian"
    param: float = 0.2
    m: int = 64
    n: int = 512
    sparsity: int = 5
    min_separation: int = 1
    noise_db: Optional[float] = None
    seed: int = 0
    amplitudes: str = "normal"

    def __post_init__(self):
        if self.kind not in ("gaussian", "oversampled_dct"):
            raise ValueError(f"unknown matrix family {self.kind!r}")
        if self.m < 1 or self.n < 1 or self.sparsity < 1 or self.min_separation < 1:
            raise ValueError("m, n, sparsity and min_separation must be positive")
        if self.sparsity * self.min_separation > self.n:
            raise ValueError(
                f"infeasible support: s*L = {self.sparsity * self.min_separation} > n = {self.n}"
            )
        if self.amplitudes not in ("normal", "hdr"):
            raise ValueError(f"unknown amplitude mode {self.amplitudes!r}")

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return replace(self, seed=seed)


def gaussian_matrix(m: int, n: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma), Sigma = (1 - r) I + r 1 1^T."""
    if not 0 <= r < 1:
        raise ValueError(f"correlation r must lie in [0, 1), got {r}")
    z = rng.standard_normal((m, n))
    w = rng.standard_normal((m, 1))
    return math.sqrt(1.0 - r) * z + math.sqrt(r) * w


def dct_matrix(m: int, n: int, F: float, rng: np.random.Generator) -> np.ndarray:
    """Columns a_i = cos(2 pi i omega / F) / sqrt(m), i = 1..n, omega ~ U[0,1]^m."""
    if not F > 0:
        raise ValueError("F must be positive")
    omega = rng.random(m)
    cols = np.arange(1, n + 1)
    return np.cos(2.0 * np.pi * np.outer(omega, cols) / F) / math.sqrt(m)


def sample_support(n: int, s: int, L: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw among s-subsets of range(n) with pairwise gaps >= L.

    Sorted feasible supports are in bijection with s-subsets of
    ``range(n - (s - 1)(L - 1))`` via ``i_j = c_j + j (L - 1)``.
    """
    if s * L > n:
        raise ValueError(f"infeasible support: s*L = {s * L} > n = {n}")
    slots = n - (s - 1) * (L - 1)
    c = np.sort(rng.choice(slots, size=s, replace=False))
    return c + np.arange(s) * (L - 1)


def gen_signal(n: int, s: int, L: int, seed, amplitudes: str = "normal") -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    idx = sample_support(n, s, L, rng)
    x = np.zeros(n)
    if amplitudes == "hdr":
        x[idx] = rng.choice([-1.0, 1.0], size=s) * 10.0 ** rng.uniform(0.0, 3.0, size=s)
    else:
        x[idx] = rng.standard_normal(s)
    return x


def add_noise(b_clean, snr_db: Optional[float], seed) -> np.ndarray:
    """b + e with ||b||^2 / ||e||^2 = 10^(snr_db / 10) exactly.

    ``snr_db`` of ``None`` or ``inf`` returns ``b`` unchanged.
    """
    b_clean = np.asarray(b_clean, dtype=float)
    if snr_db is None or snr_db == math.inf:
        return b_clean.copy()
    nb = float(np.linalg.norm(b_clean))
    if nb == 0:
        raise ValueError("cannot set an SNR relative to a zero signal")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    e = rng.standard_normal(b_clean.shape)
    e *= nb * 10.0 ** (-snr_db / 20.0) / float(np.linalg.norm(e))
    return b_clean + e


def _instance(spec: GeneratorSpec, A: np.ndarray, rng) -> ProblemInstance:
    x = gen_signal(spec.n, spec.sparsity, spec.min_separation, rng, spec.amplitudes)
    b = add_noise(A @ x, spec.noise_db, rng)
    return ProblemInstance(A, b, ground_truth=x, noise_db=spec.noise_db, seed=spec.seed)


def gen_gaussian(spec: GeneratorSpec) -> ProblemInstance:
    if spec.kind != "gaussian":
        raise ValueError("spec is not a gaussian family")
    rng = rng_for(spec.seed)
    return _instance(spec, gaussian_matrix(spec.m, spec.n, spec.param, rng), rng)


def gen_dct(spec: GeneratorSpec) -> ProblemInstance:
    if spec.kind != "oversampled_dct":
        raise ValueError("spec is not an oversampled_dct family")
    rng = rng_for(spec.seed)
    return _instance(spec, dct_matrix(spec.m, spec.n, spec.param, rng), rng)


def generate(spec: GeneratorSpec) -> ProblemInstance:
    return gen_gaussian(spec) if spec.kind == "gaussian" else gen_dct(spec)


def mutual_coherence(A: np.ndarray) -> float:
    An = A / np.linalg.norm(A, axis=0)
    G = np.abs(An.T @ An)
    np.fill_diagonal(G, 0.0)
    return float(G.max())
