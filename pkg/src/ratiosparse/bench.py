"""Benchmark harness: trials, metrics, aggregation and CSV tables.

An :class:`ExperimentSpec` names a matrix family, a grid of family parameters
and sparsities, the methods to compare and a master seed. Each
``(cell, trial)`` pair gets its own seed derived from the master, builds one
instance and feeds it to every method, so results do not depend on the order
or the number of worker processes.

Methods
-------
``l1``            l1 ADMM, started at 0
``l1_minus_l2``   DCA for l1 - l2
``irls_lp``       IRLS with p = 1/2, started at the pseudoinverse solution
``half_over_two`` the nested ADMM for the l1/2-over-l2 model

Initialisation follows the usual chain: ``l1_minus_l2`` starts from the l1
answer and ``half_over_two`` from the DCA answer. For noisy Gaussian
experiments both start from the IRLS answer instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .baselines import BaselineConfig, solve_irls_lp, solve_l1, solve_l1_minus_l2_dca
from .core import ProblemInstance, SolverConfig, objective_h
from .gen import GeneratorSpec, derive_seed, generate
from .solver import admm_solve

METHODS = ("l1", "l1_minus_l2", "irls_lp", "half_over_two")
PROPOSED = "half_over_two"
SUCCESS_TOL = 1e-3
FAILURE_CLASSES = ("none", "model_failure", "algorithm_failure")


def default_zeta(noisy: bool, family: str) -> float:
    if not noisy:
        return 1e-5
    return 8e-4 if family == "oversampled_dct" else 8e-3


# ------------------------------------------------------------------ metrics


def rel_error(x_true, x_hat) -> float:
    x_true = np.asarray(x_true, dtype=float)
    nt = float(np.linalg.norm(x_true))
    if nt == 0:
        raise ValueError("relative error is undefined for a zero ground truth")
    return float(np.linalg.norm(x_true - np.asarray(x_hat, dtype=float))) / nt


def snr_metric(x_true, x_hat) -> float:
    """10 log10(||x_hat - x||^2 / ||x||^2) in dB; lower is better, -inf when exact."""
    x_true = np.asarray(x_true, dtype=float)
    num = float(np.sum((np.asarray(x_hat, dtype=float) - x_true) ** 2))
    den = float(np.sum(x_true**2))
    if den == 0:
        raise ValueError("SNR is undefined for a zero ground truth")
    if num == 0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def classify_trial(instance: ProblemInstance, x_hat, zeta: float) -> dict:
    """Success, or which of model and algorithm is to blame.

    A failed trial whose objective ties the ground truth's exactly is filed
    under algorithm failure so the three classes always partition the trials.
    """
    if instance.ground_truth is None:
        raise ValueError("classification needs a ground truth")
    x = instance.ground_truth
    err = rel_error(x, x_hat)
    success = err <= SUCCESS_TOL
    if success:
        cls = "none"
    elif objective_h(instance, zeta, x_hat) < objective_h(instance, zeta, x):
        cls = "model_failure"
    else:
        cls = "algorithm_failure"
    return {
        "rel_error": err,
        "success": success,
        "failure_class": cls,
        "snr_db_metric": snr_metric(x, x_hat),
    }


# ------------------------------------------------------------------ experiment spec


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep. ``params`` holds r values (gaussian) or F values (DCT)."""

    name: str = "sweep"
    family: str = "gaussian"
    params: tuple = (0.2,)
    sparsities: tuple = (5,)
    m: int = 64
    n: int = 512
    min_separation: int = 15
    noise_db: Optional[float] = None
    trials: int = 20
    seed: int = 0
    methods: tuple = METHODS
    zeta: Optional[float] = None
    rho: float = 1.0
    gamma: float = 1.0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "sparsities", tuple(int(s) for s in self.sparsities))
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise ValueError("at least one method is required")
        if self.trials < 1 or self.threads < 1:
            raise ValueError("trials and threads must be positive")
        if not self.params or not self.sparsities:
            raise ValueError("params and sparsities must be non-empty")
        # validates family and feasibility of every cell
        for p, s in self.cells():
            self.generator(p, s, 0)

    @property
    def noisy(self) -> bool:
        return self.noise_db is not None and math.isfinite(self.noise_db)

    @property
    def effective_zeta(self) -> float:
        return self.zeta if self.zeta is not None else default_zeta(self.noisy, self.family)

    def cells(self):
        return [(p, s) for p in self.params for s in self.sparsities]

    def generator(self, param: float, sparsity: int, seed: int) -> GeneratorSpec:
        return GeneratorSpec(
            kind=self.family, param=param, m=self.m, n=self.n, sparsity=sparsity,
            min_separation=self.min_separation, noise_db=self.noise_db if self.noisy else None,
            seed=seed,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("params", "sparsities", "methods"):
            d[k] = list(d[k])
        d["effective_zeta"] = self.effective_zeta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known - {"effective_zeta"}
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------ trials


@dataclass
class TrialRecord:
    cell: int
    family: str
    param: float
    sparsity: int
    noise_db: Optional[float]
    trial: int
    seed: int
    method: str
    rel_error: float = math.nan
    success: bool = False
    failure_class: str = ""
    snr_db_metric: float = math.nan
    wall_time: float = 0.0
    iterations: int = 0
    error: str = ""
    x_hat: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return not self.error

    def sort_key(self):
        return (self.cell, self.trial, METHODS.index(self.method))


def _method_runners(spec: ExperimentSpec, inst: ProblemInstance, sparsity: int):
    zeta = spec.effective_zeta
    bcfg = BaselineConfig()
    scfg = SolverConfig(zeta=zeta, rho0=spec.rho, gamma0=spec.gamma)
    irls_lam = zeta if spec.noisy else 0.0
    from_irls = spec.noisy and spec.family == "gaussian"
    return {
        "l1": ((), lambda dep: solve_l1(inst, zeta, bcfg)),
        "l1_minus_l2": (
            ("irls_lp",) if from_irls else ("l1",),
            lambda dep: solve_l1_minus_l2_dca(inst, zeta, bcfg, x0=dep[0].x),
        ),
        "irls_lp": ((), lambda dep: solve_irls_lp(inst, 0.5, bcfg, sparsity=sparsity, lam=irls_lam)),
        "half_over_two": (
            ("irls_lp",) if from_irls else ("l1_minus_l2",),
            lambda dep: admm_solve(inst, scfg, x0=dep[0].x),
        ),
    }


def run_trial(spec: ExperimentSpec, cell: int, trial: int) -> list:
    """All methods of ``spec`` on the instance of ``(cell, trial)``."""
    param, sparsity = spec.cells()[cell]
    seed = derive_seed(spec.seed, cell, trial)
    inst = generate(spec.generator(param, sparsity, seed))
    runners = _method_runners(spec, inst, sparsity)
    solved, failed, timing = {}, {}, {}

    def solve(name):
        if name in solved or name in failed:
            return
        deps, fn = runners[name]
        for d in deps:
            solve(d)
        bad = [d for d in deps if d in failed]
        if bad:
            failed[name] = f"initialiser {bad[0]} failed"
            return
        t0 = time.perf_counter()
        try:
            solved[name] = fn([solved[d] for d in deps])
        except Exception as exc:  # recorded per trial, never fatal
            failed[name] = f"{type(exc).__name__}: {exc}"
        timing[name] = time.perf_counter() - t0

    records = []
    for name in spec.methods:
        solve(name)
        rec = TrialRecord(
            cell=cell, family=spec.family, param=param, sparsity=sparsity,
            noise_db=spec.noise_db if spec.noisy else None, trial=trial, seed=seed,
            method=name, wall_time=timing.get(name, 0.0),
        )
        if name in failed:
            rec.error = failed[name]
        else:
            res = solved[name]
            rec.x_hat = res.x
            rec.iterations = res.outer_iters
            for k, v in classify_trial(inst, res.x, spec.effective_zeta).items():
                setattr(rec, k, v)
        records.append(rec)
    return records


def _run_trial_packed(args):
    return run_trial(*args)


def run_sweep(spec: ExperimentSpec, threads: Optional[int] = None) -> list:
    """Every (cell, trial, method) combination, sorted by that key."""
    threads = spec.threads if threads is None else threads
    jobs = [(spec, c, t) for c in range(len(spec.cells())) for t in range(spec.trials)]
    if threads <= 1:
        out = [r for job in jobs for r in _run_trial_packed(job)]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = [r for recs in pool.map(_run_trial_packed, jobs) for r in recs]
    return sorted(out, key=TrialRecord.sort_key)


# ------------------------------------------------------------------ aggregation


@dataclass
class Summary:
    rates: list  # dicts per (cell, method)
    ranks: list  # dicts per (cell, method)
    wins: list  # dicts per (cell, competitor)


def _cell_meta(rec: TrialRecord) -> dict:
    return {
        "cell": rec.cell, "family": rec.family, "param": rec.param,
        "sparsity": rec.sparsity, "noise_db": "" if rec.noise_db is None else rec.noise_db,
    }


def aggregate(records: Sequence[TrialRecord]) -> Summary:
    """Per-cell rates, mean ranks (average ties) and wins against the proposed method.

    A trial enters the rank and win tables only if every method ran on it.
    """
    if not records:
        raise ValueError("no records to aggregate")
    records = sorted(records, key=TrialRecord.sort_key)
    by_cell: dict = {}
    for r in records:
        by_cell.setdefault(r.cell, []).append(r)

    rates, ranks, wins = [], [], []
    for cell in sorted(by_cell):
        recs = by_cell[cell]
        meta = _cell_meta(recs[0])
        methods = sorted({r.method for r in recs}, key=METHODS.index)
        for m in methods:
            mine = [r for r in recs if r.method == m]
            good = [r for r in mine if r.ok]
            k = len(good)
            count = lambda cls: sum(r.failure_class == cls for r in good)
            rates.append({
                **meta, "method": m, "trials": len(mine), "errors": len(mine) - k,
                "success_rate": sum(r.success for r in good) / k if k else math.nan,
                "model_failure_rate": count("model_failure") / k if k else math.nan,
                "algorithm_failure_rate": count("algorithm_failure") / k if k else math.nan,
            })

        table: dict = {}
        for r in recs:
            table.setdefault(r.trial, {})[r.method] = r
        complete = [t for t in sorted(table) if all(m in table[t] and table[t][m].ok for m in methods)]
        rank_sum = {m: 0.0 for m in methods}
        for t in complete:
            vals = [table[t][m].snr_db_metric for m in methods]
            for m, rk in zip(methods, rankdata(vals, method="average")):
                rank_sum[m] += float(rk)
        for m in methods:
            ranks.append({
                **meta, "method": m, "trials_ranked": len(complete),
                "mean_rank": rank_sum[m] / len(complete) if complete else math.nan,
            })

        if PROPOSED in methods:
            for m in methods:
                if m == PROPOSED:
                    continue
                cw = pw = ties = 0
                for t in complete:
                    a = table[t][m].snr_db_metric
                    b = table[t][PROPOSED].snr_db_metric
                    cw += a < b
                    pw += b < a
                    ties += a == b
                wins.append({
                    **meta, "competitor": m, "competitor_wins": cw,
                    "proposed_wins": pw, "ties": ties, "trials": len(complete),
                })
            total = sum(w["proposed_wins"] for w in wins if w["cell"] == cell)
            wins.append({
                **meta, "competitor": PROPOSED, "competitor_wins": total,
                "proposed_wins": total, "ties": 0, "trials": len(complete),
            })
    return Summary(rates, ranks, wins)


# ------------------------------------------------------------------ CSV output

RATE_COLUMNS = ["cell", "family", "param", "sparsity", "noise_db", "method", "trials", "errors",
                "success_rate", "model_failure_rate", "algorithm_failure_rate"]
RANK_COLUMNS = ["cell", "family", "param", "sparsity", "noise_db", "method", "trials_ranked", "mean_rank"]
WIN_COLUMNS = ["cell", "family", "param", "sparsity", "noise_db", "competitor", "competitor_wins",
               "proposed_wins", "ties", "trials"]
TRIAL_COLUMNS = ["cell", "family", "param", "sparsity", "noise_db", "trial", "seed", "method",
                 "rel_error", "success", "failure_class", "snr_db_metric", "iterations", "error"]
PLOT_COLUMNS = ["method", "x_name", "x", "series", "y"]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def trials_csv(records) -> str:
    rows = []
    for r in sorted(records, key=TrialRecord.sort_key):
        d = {c: getattr(r, c) for c in TRIAL_COLUMNS}
        d["noise_db"] = "" if r.noise_db is None else r.noise_db
        rows.append(d)
    return _csv(rows, TRIAL_COLUMNS)


def timings_csv(records) -> str:
    rows = [{"cell": r.cell, "trial": r.trial, "method": r.method, "wall_time": r.wall_time}
            for r in sorted(records, key=TrialRecord.sort_key)]
    return _csv(rows, ["cell", "trial", "method", "wall_time"])


def plot_rows(summary: Summary, x_name: str = "sparsity") -> list:
    """Long-format series: success / model / algorithm failure rate against ``x_name``."""
    out = []
    for r in summary.rates:
        for series in ("success_rate", "model_failure_rate", "algorithm_failure_rate"):
            out.append({"method": r["method"], "x_name": x_name, "x": r[x_name], "series": series, "y": r[series]})
    return out


def write_tables(out_dir, spec: ExperimentSpec, records, summary: Optional[Summary] = None) -> dict:
    """Write the CSV tables plus the resolved spec; returns {name: path}.

    Every file except ``timings.csv`` is a pure function of the spec.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary or aggregate(records)
    x_name = "sparsity" if len(spec.sparsities) > 1 or len(spec.params) == 1 else "param"
    files = {
        "rates.csv": _csv(summary.rates, RATE_COLUMNS),
        "ranks.csv": _csv(summary.ranks, RANK_COLUMNS),
        "wins.csv": _csv(summary.wins, WIN_COLUMNS),
        "plot_data.csv": _csv(plot_rows(summary, x_name), PLOT_COLUMNS),
        "trials.csv": trials_csv(records),
        "timings.csv": timings_csv(records),
        "spec.json": json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n",
    }
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths[name] = p
    return paths
