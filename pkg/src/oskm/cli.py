"""Command-line front end.

Exit codes: 0 success (or check holds), 1 check failed, 2 usage error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .datagen import Regime, StreamConfig, gen_stream
from .evaluation import (Algorithm, Axis, paired_compare, mistake_bound, run_experiment,
                         run_sweep, worker_count)
from .kernel import KernelFamily, KernelSpec
from .machine import OskmConfig

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

DEFAULT_SWEEPS = {
    Axis.LABEL_FLIP_PROB: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    Axis.SNR_DB: [0.0, 5.0, 10.0, 15.0, 20.0],
}

TRACE_COLUMNS = ["algo", "seed", "step", "block_id", "y_clean", "y_noisy", "raw_score",
                 "predicted_label", "mistake_vs_clean", "mistake_vs_noisy", "update_made"]
SWEEP_COLUMNS = ["axis_value", "algo", "mean_accuracy", "ci_half_width", "n_seeds",
                 "mean_diff", "diff_ci_half_width", "significant"]
BOUND_COLUMNS = ["algo", "seed", "M_N", "bound_value", "best_rho", "trace_K", "loss_norm", "holds"]


class UsageError(Exception):
    pass


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None


def _real_list(text: str) -> list[float]:
    return [_real(t) for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", choices=["oskm", "norma", "both"])
    p.add_argument("--regime", choices=[r.value for r in Regime], default=Regime.NONSTATIONARY.value)
    p.add_argument("--snr-db", type=_real_list, help="real or inf; comma list for --axis snr")
    p.add_argument("--label-noise", type=_real_list,
                   help="flip probability in [0, 0.5]; comma list for --axis label-noise")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--tau", type=int, default=100)
    p.add_argument("--tau-p", type=int)
    p.add_argument("--tau-e", type=int)
    p.add_argument("--lambda", dest="lam", type=_real, default=0.1)
    p.add_argument("--rho", type=_real)
    p.add_argument("--eta", type=_real, default=0.7)
    p.add_argument("--admm-iters", type=int)
    p.add_argument("--kernel", choices=[k.value for k in KernelFamily], default="linear")
    p.add_argument("--bandwidth", type=_real, default=1.0)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--block-len", type=int)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--class-sep", type=_real)
    p.add_argument("--out", help="output CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oskm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"oskm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="per-step traces for one configuration")
    _add_common(p)
    p = sub.add_parser("sweep", help="osKM vs NORMA over a noise axis")
    _add_common(p)
    p.add_argument("--axis", choices=[a.value for a in Axis], required=True)
    p = sub.add_parser("bound-check", help="check the update count against the mistake bound")
    _add_common(p)
    p = sub.add_parser("reduce-check", help="osKM without consensus must reproduce NORMA")
    _add_common(p)
    return parser


def _single(values, flag: str, default: float) -> float:
    if values is None:
        return default
    if len(values) != 1:
        raise UsageError(f"{flag} takes a single value for this command")
    return values[0]


def resolve(args) -> dict:
    """Fill command-specific defaults; the result fully determines the output."""
    cmd = args.command
    r = {
        "command": cmd,
        "algo": args.algo or ("oskm" if cmd == "bound-check" else "both"),
        "regime": args.regime, "seed": args.seed, "tau": args.tau,
        "lambda": args.lam, "eta": args.eta, "kernel": args.kernel, "bandwidth": args.bandwidth,
        "dim": args.dim, "n_samples": args.n_samples,
        "block_len": args.block_len,
        "class_sep": args.class_sep,
    }
    if cmd == "reduce-check":
        for flag, value, needed in (("--rho", args.rho, 0.0), ("--tau-p", args.tau_p, 1),
                                    ("--tau-e", args.tau_e, 1), ("--admm-iters", args.admm_iters, 1)):
            if value is not None and value != needed:
                raise UsageError(f"reduce-check requires {flag} {needed} (consensus switched off)")
        r.update(rho=0.0, tau_p=1, tau_e=1, admm_iters=1, algo="both")
    else:
        r["rho"] = 0.1 if args.rho is None else args.rho
        r["tau_p"] = 10 if args.tau_p is None else args.tau_p
        r["tau_e"] = r["tau_p"] if args.tau_e is None else args.tau_e
        r["admm_iters"] = 3 if args.admm_iters is None else args.admm_iters
    r["seeds"] = 100 if args.seeds is None else args.seeds

    if cmd == "sweep":
        axis = Axis(args.axis)
        r["axis"] = axis.value
        sweep_vals = args.snr_db if axis is Axis.SNR_DB else args.label_noise
        r["values"] = DEFAULT_SWEEPS[axis] if sweep_vals is None else sweep_vals
        if not r["values"]:
            raise UsageError("sweep needs at least one axis value")
        if axis is Axis.SNR_DB:
            r["snr_db"], r["label_noise"] = math.inf, _single(args.label_noise, "--label-noise", 0.0)
        else:
            r["snr_db"], r["label_noise"] = _single(args.snr_db, "--snr-db", math.inf), 0.0
            bad = [v for v in r["values"] if not 0.0 <= v <= 0.5]
            if bad:
                raise UsageError(f"--label-noise values must lie in [0, 0.5], got {bad}")
        if r["seeds"] < 2:
            raise UsageError("sweep needs --seeds >= 2 for confidence intervals")
    else:
        r["snr_db"] = _single(args.snr_db, "--snr-db", math.inf)
        r["label_noise"] = _single(args.label_noise, "--label-noise", 0.0)
    if r["seeds"] < 1:
        raise UsageError(f"--seeds must be >= 1, got {r['seeds']}")
    if cmd == "bound-check":
        if r["kernel"] != "linear":
            raise UsageError("bound-check needs --kernel linear")
        if r["n_samples"] < 1:
            raise UsageError("bound-check needs a nonempty stream (--n-samples >= 1)")
    if r["n_samples"] < 1:
        raise UsageError(f"--n-samples must be >= 1, got {r['n_samples']}")
    return r


def make_configs(r: dict) -> tuple[StreamConfig, OskmConfig]:
    kw = {}
    if r["class_sep"] is not None:
        kw["class_separation"] = r["class_sep"]
    stream = StreamConfig(dim=r["dim"], n_samples=r["n_samples"], regime=r["regime"],
                          block_len=r["block_len"], snr_db=r["snr_db"],
                          label_flip_prob=r["label_noise"], seed=r["seed"], **kw)
    config = OskmConfig(lam=r["lambda"], rho=r["rho"], eta=r["eta"], tau=r["tau"], tau_p=r["tau_p"],
                        tau_e=r["tau_e"], admm_iters=r["admm_iters"],
                        kernel=KernelSpec(r["kernel"], r["bandwidth"]))
    return stream, config


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, list):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def header_lines(r: dict, stream: StreamConfig) -> list[str]:
    flags = {k: v for k, v in r.items() if k not in ("command", "values", "axis", "out")}
    flags["block_len"] = stream.block_len
    flags["class_sep"] = stream.class_separation
    argv = [r["command"]]
    if "axis" in r:
        argv += ["--axis", r["axis"]]
        key = "snr_db" if r["axis"] == Axis.SNR_DB.value else "label_noise"
        flags[key] = r["values"]
    for k, v in flags.items():
        flag = "--" + k.replace("_", "-")
        argv += [flag, _fmt(v)]
    lines = [f"# oskm {__version__}", f"# argv: oskm {' '.join(argv)}"]
    lines += [f"# {k} = {_fmt(v)}" for k, v in sorted(flags.items())]
    return lines


def _write(rows, columns, header, out) -> None:
    buf = io.StringIO(newline="")
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _algos(r) -> list[Algorithm]:
    return [Algorithm.OSKM, Algorithm.NORMA] if r["algo"] == "both" else [Algorithm(r["algo"])]


def _seeds(r) -> list[int]:
    return list(range(r["seed"], r["seed"] + r["seeds"]))


def _run_job(job):
    stream_config, config, algos = job
    stream = gen_stream(stream_config)
    return stream, [run_experiment(a, stream, config, seed=stream_config.seed) for a in algos]


def _map(jobs):
    workers = worker_count()
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def cmd_run(r, report) -> int:
    stream_cfg, config = make_configs(r)
    algos = _algos(r)
    results = _map([(replace(stream_cfg, seed=s), config, algos) for s in _seeds(r)])

    def rows():
        for stream, traces in results:
            for t in traces:
                for i in range(t.n_samples):
                    yield {"algo": t.algorithm.value, "seed": t.seed, "step": i,
                           "block_id": int(stream.block_id[i]), "y_clean": int(t.y_clean[i]),
                           "y_noisy": int(t.y_noisy[i]), "raw_score": float(t.raw_score[i]),
                           "predicted_label": int(t.predicted_label[i]),
                           "mistake_vs_clean": bool(t.mistake_vs_clean[i]),
                           "mistake_vs_noisy": bool(t.mistake_vs_noisy[i]),
                           "update_made": bool(t.update_made[i])}

    _write(rows(), TRACE_COLUMNS, header_lines(r, stream_cfg), r["out"])
    by_algo = {a: [tr for _, ts in results for tr in ts if tr.algorithm is a] for a in algos}
    for a, traces in by_algo.items():
        acc = np.array([t.accuracy_vs_clean for t in traces])
        report(f"{a.value}: accuracy_vs_clean {acc.mean():.4f} over {len(acc)} seed(s), "
               f"mean M_N {np.mean([t.n_updates for t in traces]):.1f}")
    if len(algos) == 2 and r["seeds"] >= 2:
        c = paired_compare(by_algo[Algorithm.OSKM], by_algo[Algorithm.NORMA])
        report(f"oskm - norma: {c.mean_diff:+.4f} +/- {c.diff_ci:.4f} "
               f"({'significant' if c.significant else 'not significant'})")
    aborted = [t for ts in by_algo.values() for t in ts if t.aborted]
    for t in aborted:
        report(f"{t.algorithm.value} seed {t.seed} aborted at step {t.n_samples}: {t.error}")
    return EXIT_DIVERGED if aborted else EXIT_OK


def cmd_sweep(r, report) -> int:
    stream_cfg, config = make_configs(r)
    rep = run_sweep(r["axis"], r["values"], stream_cfg, config, _seeds(r))
    _write(rep.rows(), SWEEP_COLUMNS, header_lines(r, stream_cfg), r["out"])
    for p in rep.points:
        c = p.comparison
        report(f"{r['axis']}={p.value:g}: oskm {c.mean_a:.4f} norma {c.mean_b:.4f} "
               f"diff {c.mean_diff:+.4f} +/- {c.diff_ci:.4f}")
    return EXIT_OK


def cmd_reduce_check(r, report) -> int:
    stream_cfg, config = make_configs(r)
    worst = 0.0
    for s in _seeds(r):
        stream = gen_stream(replace(stream_cfg, seed=s))
        a = run_experiment(Algorithm.OSKM, stream, config, seed=s)
        b = run_experiment(Algorithm.NORMA, stream, config, seed=s)
        diff = np.abs(a.raw_score - b.raw_score)
        worst = max(worst, float(diff.max()))
        bad = np.flatnonzero(diff >= 1e-10)
        if len(bad):
            report(f"seed {s}: scores diverge first at step {bad[0]} "
                   f"(|diff| = {diff[bad[0]]:.3e})")
            report(f"max |score difference| = {worst:.3e}")
            return EXIT_FAILED
    report(f"max |score difference| = {worst:.3e} over {r['seeds']} seed(s)")
    return EXIT_OK


def cmd_bound_check(r, report) -> int:
    stream_cfg, config = make_configs(r)
    algos = _algos(r)
    results = _map([(replace(stream_cfg, seed=s), config, algos) for s in _seeds(r)])
    rows, failed = [], []
    for stream, traces in results:
        for t in traces:
            b = mistake_bound(t, stream, stream.direction, spec=config.kernel)
            rows.append({"algo": t.algorithm.value, "seed": t.seed, "M_N": b.M_N,
                         "bound_value": b.bound_value, "best_rho": b.best_rho,
                         "trace_K": b.trace_K, "loss_norm": b.loss_norm, "holds": b.holds})
            if not b.holds:
                failed.append((t.algorithm.value, t.seed))
    if r["out"] is not None:
        _write(rows, BOUND_COLUMNS, header_lines(r, stream_cfg), r["out"])
    for row in rows:
        report(f"{row['algo']} seed {row['seed']}: M_N {row['M_N']} <= bound "
               f"{row['bound_value']:.6g} (best rho {row['best_rho']:.4g}): "
               f"{'holds' if row['holds'] else 'VIOLATED'}")
    for algo, seed in failed:
        report(f"bound violated: {algo} seed {seed}")
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "reduce-check": cmd_reduce_check,
            "bound-check": cmd_bound_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    csv_to_stdout = args.command in ("run", "sweep") and args.out in (None, "-")
    stream = sys.stderr if csv_to_stdout else sys.stdout

    def report(msg):
        print(msg, file=stream)

    try:
        r = resolve(args)
        r["out"] = args.out
        make_configs(r)
    except (UsageError, ValueError) as exc:
        print(f"oskm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return COMMANDS[args.command](r, report)


if __name__ == "__main__":
    sys.exit(main())
