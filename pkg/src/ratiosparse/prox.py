"""Scalar half-thresholding and the norm-ratio u-subproblem.

Half-thresholding solves, per coordinate,

    min_x  (x - m)^2 + delta |x|^(1/2)

(equivalently ``1/2 (x - m)^2 + delta/2 |x|^(1/2)``) with the trigonometric
closed form; the hard threshold is ``54^(1/3)/4 * delta^(2/3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_CBRT54_OVER_4 = 54.0 ** (1.0 / 3.0) / 4.0


@dataclass(frozen=True)
class HalfThresholdParams:
    delta_tilde: float
    threshold: float = field(init=False)

    def __post_init__(self):
        if not (self.delta_tilde > 0 and math.isfinite(self.delta_tilde)):
            raise ValueError("delta_tilde must be positive and finite")
        object.__setattr__(self, "threshold", half_threshold_level(self.delta_tilde))


def half_threshold_level(delta: float) -> float:
    return _CBRT54_OVER_4 * delta ** (2.0 / 3.0)


def _delta_of(params) -> float:
    return params.delta_tilde if isinstance(params, HalfThresholdParams) else float(params)


def half_threshold_scalar(m: float, params) -> float:
    """Global minimiser of ``(x - m)^2 + delta |x|^(1/2)``.

    ``params`` is a :class:`HalfThresholdParams` or a bare ``delta``. At
    ``|m|`` exactly on the threshold both branches tie and 0 is returned.
    """
    if not math.isfinite(m):
        raise ValueError("m must be finite")
    return float(half_threshold_vector(np.array([m]), params)[0])


def half_threshold_vector(m, params) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("m contains non-finite entries")
    delta = _delta_of(params)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return m.copy()
    out = np.zeros_like(m)
    a = np.abs(m)
    keep = a > half_threshold_level(delta)
    if np.any(keep):
        ak = a[keep]
        cos_arg = np.clip(delta / 8.0 * (ak / 3.0) ** -1.5, -1.0, 1.0)
        phi = np.arccos(cos_arg)
        out[keep] = np.sign(m[keep]) * (2.0 / 3.0) * ak * (
            1.0 + np.cos(2.0 * np.pi / 3.0 - 2.0 * phi / 3.0)
        )
    return out


def quintic_root(kappa: float) -> float:
    """The unique root in (1, inf) of ``t^5 - t^3 = kappa`` for kappa > 0.

    Newton from the right end of the bracket ``[1, 1 + kappa^(1/5) + kappa^(1/3)]``;
    the cubic-quintic is convex there, so Newton decreases monotonically. A
    bisection step replaces any Newton step that leaves the bracket.
    """
    if not (kappa > 0 and math.isfinite(kappa)):
        raise ValueError(f"kappa must be positive and finite, got {kappa}")
    lo = 1.0
    hi = 1.0 + kappa ** 0.2 + kappa ** (1.0 / 3.0)
    t = min(max(1.5, kappa ** 0.2 + 1.0), hi)
    tol = 1e-10 * max(1.0, kappa)
    for _ in range(200):
        t2 = t * t
        f = t2 * t2 * t - t2 * t - kappa
        if abs(f) <= 0.01 * tol:
            break
        if f > 0:
            hi = t
        else:
            lo = t
        step = f / (5.0 * t2 * t2 - 3.0 * t2)
        t_new = t - step
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if t_new == t:
            break
        t = t_new
    return t


def solve_u_subproblem(d, c: float, zeta: float, weight: float) -> np.ndarray:
    """argmin_u  zeta * c / ||u||_2^(1/2) + weight/2 * ||u - d||_2^2.

    Stationarity forces ``u = s^2 d`` where ``s`` is the quintic root for
    ``kappa = zeta c / (2 weight ||d||^(5/2))``. With ``c = 0`` the answer is
    ``d``; with ``d = 0`` any vector of norm ``(zeta c / (2 weight))^(2/5)`` is
    optimal and we return it on the first axis.
    """
    d = np.asarray(d, dtype=float)
    if c < 0:
        raise ValueError("c must be non-negative")
    if not (math.isfinite(c) and math.isfinite(zeta) and math.isfinite(weight)):
        raise ValueError("non-finite parameter")
    if not np.all(np.isfinite(d)):
        raise ValueError("d contains non-finite entries")
    if zeta <= 0 or weight <= 0:
        raise ValueError("zeta and weight must be positive")
    if c == 0:
        return d.copy()
    eta = float(np.linalg.norm(d))
    if eta == 0:
        e = np.zeros_like(d)
        e[0] = (zeta * c / (2.0 * weight)) ** 0.4
        return e
    kappa = zeta * c / (2.0 * weight * eta ** 2.5)
    s = quintic_root(kappa)
    return (s * s) * d
