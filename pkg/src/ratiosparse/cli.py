"""Command-line entry point: ``ratiosparse <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error or missing input, 2 solver/runtime error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, bench, rvfl
from .core import SolverConfig, load_instance
from .solver import SolverDivergence, admm_solve

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_range(text: str) -> list:
    """``"5"``, ``"5,10,25"`` or inclusive ``"2:2:30"``."""
    try:
        if ":" in text:
            a, step, b = (int(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            return list(range(a, b + 1, step))
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N,M,... or a:step:b, got {text!r}") from None


def _family_values(prefix: str):
    def parse(text: str) -> list:
        key, _, vals = text.partition("=")
        if not vals:
            key, vals = prefix, text
        if key != prefix:
            raise argparse.ArgumentTypeError(f"expected {prefix}=value[,value...], got {text!r}")
        try:
            return [float(v) for v in vals.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"non-numeric value in {text!r}") from None

    return parse


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    return p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


# ------------------------------------------------------------------ subcommands


def cmd_solve(args) -> int:
    inst = load_instance(_require_file(args.instance))
    fields = {"zeta": args.zeta, "rho0": args.rho, "gamma0": args.gamma, "max_total_iters": args.max_iters,
              "record_iterates": args.record_iterates}
    cfg = SolverConfig(**{k: v for k, v in fields.items() if v is not None})
    if args.print_config:
        print(json.dumps({k: str(v) if not isinstance(v, (int, float, bool, type(None))) else v
                          for k, v in vars(cfg).items()}, indent=2))
        return EXIT_OK
    res = admm_solve(inst, cfg)
    out = _out_dir(args)
    np.savetxt(out / "x.txt", res.x, fmt="%.17g")
    summary = {
        "termination": res.termination, "outer_iters": res.outer_iters,
        "inner_iters": res.total_inner_iters,
        "objective": res.objective_trace[-1] if res.objective_trace else "",
        "nonzeros": int(np.sum(np.abs(res.x) > 1e-6)),
    }
    _write(out / "result.txt", "".join(f"{k}={v}\n" for k, v in summary.items()))
    if res.outer_iters >= 3:
        _write(out / "diagnostics.txt", analysis.descent_report(res, inst, cfg).to_text())
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_toy(args) -> int:
    scan = analysis.toy_example_scan(analysis.parse_grid(args.grid))
    mins = scan.argmins()
    print(f"best sigma = {scan.best_sigma:g}")
    for name, val in mins.items():
        print(f"  argmin {name}: sigma = {val:g}")
    print(f"  max feasibility residual = {scan.feasibility.max():.3g}")
    if args.out:
        out = _out_dir(args)
        rows = ["sigma,ratio,l1,l1_minus_l2"]
        rows += [f"{s!r},{r!r},{a!r},{b!r}" for s, r, a, b in zip(scan.sigma, scan.ratio, scan.l1, scan.l1_minus_l2)]
        _write(out / "toy.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def _bench_spec(args, noisy: bool) -> bench.ExperimentSpec:
    base = bench.ExperimentSpec.load(_require_file(args.config)) if args.config else None
    over = {}
    if args.gaussian is not None and args.dct is not None:
        raise UsageError("choose one of --gaussian and --dct")
    if args.gaussian is not None:
        over.update(family="gaussian", params=tuple(args.gaussian))
    if args.dct is not None:
        over.update(family="oversampled_dct", params=tuple(args.dct))
    for flag, key in (("sparsity", "sparsities"), ("trials", "trials"), ("seed", "seed"), ("zeta", "zeta"),
                      ("rho", "rho"), ("gamma", "gamma"), ("threads", "threads"), ("m", "m"), ("n", "n"),
                      ("min_separation", "min_separation")):
        val = getattr(args, flag)
        if val is not None:
            over[key] = tuple(val) if isinstance(val, list) else val
    if args.methods is not None:
        over["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if noisy:
        over["noise_db"] = args.snr if args.snr is not None else (base.noise_db if base and base.noise_db else 50.0)
    else:
        over["noise_db"] = None
    if base is None:
        defaults = {"name": "noisy" if noisy else "noiseless"}
        if noisy:
            defaults.update(family=over.get("family", "oversampled_dct"), sparsities=(15,))
            if "params" not in over:
                defaults["params"] = (10.0,) if defaults["family"] == "oversampled_dct" else (0.2,)
        return bench.ExperimentSpec(**{**defaults, **over})
    return replace(base, **over)


def cmd_bench(args, noisy: bool) -> int:
    try:
        spec = _bench_spec(args, noisy)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if args.print_config:
        print(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    records = bench.run_sweep(spec)
    summary = bench.aggregate(records)
    paths = bench.write_tables(args.out, spec, records, summary)
    for r in summary.rates:
        print(f"cell {r['cell']} {r['family']} param={r['param']:g} s={r['sparsity']} {r['method']:>14}: "
              f"success {r['success_rate']:.2f}  model-fail {r['model_failure_rate']:.2f}  "
              f"alg-fail {r['algorithm_failure_rate']:.2f}  errors {r['errors']}")
    if noisy:
        for r in summary.ranks:
            print(f"cell {r['cell']} {r['method']:>14}: mean rank {r['mean_rank']:.2f}")
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def _load_matrix(path) -> np.ndarray:
    try:
        A = np.loadtxt(_require_file(path), ndmin=2)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return A


def cmd_nsp(args) -> int:
    if args.matrix:
        A = _load_matrix(args.matrix)
    elif args.random:
        from .gen import rng_for

        m, n = args.random
        A = rng_for(args.seed).standard_normal((m, n))
    else:
        raise UsageError("give --matrix FILE or --random M N")
    cert = analysis.check_ensp(A, args.s, args.p, args.c, args.samples, seed=args.seed)
    print(f"eNSP(s={cert.s}, p={cert.p:g}, c={cert.c:g}): {'holds' if cert.holds else 'fails'}"
          f"{' (sampled)' if cert.sampled else ''}; worst share {cert.worst:.6g}")
    if cert.note:
        print(f"  note: {cert.note}")
    if not cert.holds:
        print(f"  witness T = {list(cert.witness_T)}")
        print(f"  witness v = {np.array2string(cert.witness_v, precision=6)}")
    lines = [f"holds={cert.holds}", f"sampled={cert.sampled}", f"worst={cert.worst!r}", f"note={cert.note}"]
    if analysis.kernel_basis(A).shape[1] > 0:
        inf = analysis.kernel_ratio_infimum(A, args.p, args.samples, seed=args.seed)
        print(f"  inf ||v||_p/||v||_2 over ker(A) <= {inf:.6g}")
        lines.append(f"kernel_ratio_upper_bound={inf!r}")
    if args.out:
        _write(_out_dir(args) / "nsp.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_rvfl_train(args) -> int:
    ds = rvfl.load_csv_dataset(_require_file(args.data), args.targets)
    ds = ds.split(args.test_fraction, args.seed) if args.test_fraction > 0 else ds
    Xtr, Ytr = ds.train()
    model = rvfl.RvflModel.create(Xtr.shape[1], args.L, args.activation, args.seed)
    if args.lam is not None:
        lam, scores = args.lam, {}
    else:
        grid = analysis.parse_grid(args.grid) if args.grid else rvfl.default_lambda_grid()
        if args.grid:
            grid = 10.0 ** grid  # grid given in log10 units
        lam, scores = rvfl.cross_validate(Xtr, Ytr, model, grid, args.solver, folds=3, seed=args.seed)
    rvfl.train(Xtr, Ytr, model, lam, args.solver)
    out = _out_dir(args)
    _write(out / "model.txt", rvfl.export_model(model))
    if scores:
        _write(out / "cv.csv", "lambda,mean_val_mse\n" + "".join(f"{k!r},{v!r}\n" for k, v in sorted(scores.items())))
    msg = f"solver={args.solver} lambda={lam:g} active={rvfl.count_active(model.beta)}/{model.beta.size}"
    if ds.test_idx.size:
        mse = rvfl.evaluate_mse(model, *ds.test())
        msg += f" test_mse={mse:.6g}"
        _write(out / "metrics.txt", f"test_mse={mse!r}\nlambda={lam!r}\n")
    print(msg)
    return EXIT_OK


def cmd_rvfl_eval(args) -> int:
    model = rvfl.import_model(_require_file(args.model).read_text())
    ds = rvfl.load_csv_dataset(_require_file(args.data), args.targets)
    mse = rvfl.evaluate_mse(model, ds.X, ds.Y)
    print(f"mse={mse:.6g}")
    if args.out:
        _write(_out_dir(args) / "eval.txt", f"mse={mse!r}\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ratiosparse", description="Sparse recovery with the l1/2-over-l2 ratio penalty.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("--instance", required=True, help="instance in the text format (see README)")
    s.add_argument("--zeta", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--record-iterates", action="store_true", help="keep x_k for the rate fit")
    s.add_argument("--out", default="out")
    s.add_argument("--print-config", action="store_true")

    t = sub.add_parser("toy", help="scan the 7x8 toy solution line")
    t.add_argument("--grid", default="-15:0.01:25", help="sigma grid a:step:b")
    t.add_argument("--out")

    for name, noisy in (("bench-noiseless", False), ("bench-noisy", True)):
        b = sub.add_parser(name, help=f"{'noisy' if noisy else 'noiseless'} benchmark sweep")
        b.add_argument("--config", help="JSON experiment spec; flags override it")
        b.add_argument("--gaussian", type=_family_values("r"), metavar="r=V[,V]")
        b.add_argument("--dct", type=_family_values("F"), metavar="F=V[,V]")
        b.add_argument("--sparsity", type=_int_range, metavar="a:step:b")
        b.add_argument("--trials", type=int)
        b.add_argument("--seed", type=int)
        b.add_argument("--methods", help=f"comma list from {','.join(bench.METHODS)}")
        b.add_argument("--zeta", type=float)
        b.add_argument("--rho", type=float)
        b.add_argument("--gamma", type=float)
        b.add_argument("--threads", type=int)
        b.add_argument("--m", type=int)
        b.add_argument("--n", type=int)
        b.add_argument("--min-separation", type=int)
        if noisy:
            b.add_argument("--snr", type=float, help="measurement SNR in dB (default 50)")
        else:
            b.set_defaults(snr=None)
        b.add_argument("--out", default="out")
        b.add_argument("--print-config", action="store_true")
        b.set_defaults(noisy=noisy)

    n = sub.add_parser("nsp-check", help="eNSP certificate for a small matrix")
    n.add_argument("--matrix", help="whitespace-separated matrix file")
    n.add_argument("--random", type=int, nargs=2, metavar=("M", "N"))
    n.add_argument("--s", type=int, default=1)
    n.add_argument("--p", type=float, default=1.0)
    n.add_argument("--c", type=float, default=0.5)
    n.add_argument("--samples", type=int, default=2000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out")

    r = sub.add_parser("rvfl-train", help="train an RVFL regressor from CSV")
    r.add_argument("--data", required=True)
    r.add_argument("--targets", type=int, default=1, help="number of trailing target columns")
    r.add_argument("--solver", choices=rvfl.SOLVERS, default="half_over_two")
    r.add_argument("--L", type=int, default=100)
    r.add_argument("--activation", choices=rvfl.ACTIVATIONS, default="sigmoid")
    r.add_argument("--lambda", dest="lam", type=float, help="skip CV and use this lambda")
    r.add_argument("--grid", help="log10(lambda) grid a:step:b for 3-fold CV")
    r.add_argument("--test-fraction", type=float, default=0.25)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="out")

    e = sub.add_parser("rvfl-eval", help="test MSE of an exported RVFL model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--targets", type=int, default=1)
    e.add_argument("--out")
    return p


_NEGATIVE_VALUE = re.compile(r"^-\d")


def _attach_negative_values(argv):
    """Rewrite ``--opt -15:0.01:25`` as ``--opt=-15:0.01:25``.

    argparse only recognises plain negative numbers as values, so ranges and
    lists that start with a minus sign would otherwise read as flags.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt is not None and _NEGATIVE_VALUE.match(nxt):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def dispatch(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_negative_values(argv))
        handler = {
            "solve": cmd_solve,
            "toy": cmd_toy,
            "bench-noiseless": lambda a: cmd_bench(a, False),
            "bench-noisy": lambda a: cmd_bench(a, True),
            "nsp-check": cmd_nsp,
            "rvfl-train": cmd_rvfl_train,
            "rvfl-eval": cmd_rvfl_eval,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverDivergence, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
