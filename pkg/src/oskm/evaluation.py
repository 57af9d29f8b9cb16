"""Run harness: online traces, paired seed comparisons, noise sweeps, mistake bounds."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .datagen import Stream, StreamConfig, gen_stream
from .kernel import KernelFamily, KernelSpec
from .loss import sign
from .machine import DivergenceError, OskmConfig, oskm_init, oskm_step
from .norma import NormaState, norma_predict, norma_update

CONFIDENCE = 0.95


class Algorithm(str, enum.Enum):
    OSKM = "oskm"
    NORMA = "norma"


class Axis(str, enum.Enum):
    SNR_DB = "snr"
    LABEL_FLIP_PROB = "label-noise"


@dataclass
class RunTrace:
    algorithm: Algorithm
    seed: int | None
    raw_score: np.ndarray
    predicted_label: np.ndarray
    y_noisy: np.ndarray
    y_clean: np.ndarray
    update_made: np.ndarray
    aborted: bool = False
    error: str | None = None

    @property
    def n_samples(self) -> int:
        return len(self.raw_score)

    @property
    def mistake_vs_clean(self) -> np.ndarray:
        return self.predicted_label != self.y_clean

    @property
    def mistake_vs_noisy(self) -> np.ndarray:
        return self.predicted_label != self.y_noisy

    @property
    def accuracy_vs_clean(self) -> float:
        return 1.0 - float(np.mean(self.mistake_vs_clean)) if self.n_samples else math.nan

    @property
    def accuracy_vs_noisy(self) -> float:
        return 1.0 - float(np.mean(self.mistake_vs_noisy)) if self.n_samples else math.nan

    @property
    def n_updates(self) -> int:
        return int(np.sum(self.update_made))

    @property
    def cumulative_mistakes(self) -> np.ndarray:
        return np.cumsum(self.mistake_vs_clean)


def run_experiment(algorithm, stream: Stream, config: OskmConfig,
                   budget: int | None = None, seed: int | None = None) -> RunTrace:
    """Online protocol: predict on ``x`` first, then reveal the noisy label and update.

    NORMA shares ``lam``, ``eta`` and the kernel with ``config`` and keeps
    supports for ``budget`` steps (default ``config.tau``).  A divergence
    ends the run early and returns a trace flagged ``aborted``.
    """
    algorithm = Algorithm(algorithm)
    n = len(stream)
    if n == 0:
        raise ValueError("stream is empty")
    scores = np.zeros(n)
    labels = np.zeros(n, dtype=int)
    updates = np.zeros(n, dtype=bool)
    done, error = n, None

    if algorithm is Algorithm.OSKM:
        state = oskm_init(config)
        try:
            for i in range(n):
                res = oskm_step(state, stream.x[i], int(stream.y_noisy[i]))
                scores[i], labels[i] = res.score, res.label
        except DivergenceError as exc:
            done, error = i, str(exc)
        updates[[s for s in state.updated_steps if s < done]] = True
    else:
        state = NormaState(spec=config.kernel, lam=config.lam, eta=config.eta,
                           budget=config.tau if budget is None else budget)
        for i in range(n):
            f = norma_predict(state, stream.x[i])
            scores[i], labels[i] = f, sign(f)
            updates[i] = norma_update(state, stream.x[i], int(stream.y_noisy[i]))

    return RunTrace(
        algorithm=algorithm, seed=seed,
        raw_score=scores[:done], predicted_label=labels[:done],
        y_noisy=np.asarray(stream.y_noisy[:done]), y_clean=np.asarray(stream.y_clean[:done]),
        update_made=updates[:done], aborted=error is not None, error=error,
    )


# -- confidence intervals and paired comparison -----------------------------

def ci_half_width(values, confidence: float = CONFIDENCE) -> float:
    """Normal-approximation half-width of the CI for the mean of ``values``."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return math.nan
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    return z * float(np.std(values, ddof=1)) / math.sqrt(len(values))


@dataclass
class PairedComparison:
    seeds: list
    accuracy_a: np.ndarray
    accuracy_b: np.ndarray

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)

    @property
    def differences(self) -> np.ndarray:
        return self.accuracy_a - self.accuracy_b

    @property
    def mean_a(self) -> float:
        return float(np.mean(self.accuracy_a))

    @property
    def mean_b(self) -> float:
        return float(np.mean(self.accuracy_b))

    @property
    def ci_a(self) -> float:
        return ci_half_width(self.accuracy_a)

    @property
    def ci_b(self) -> float:
        return ci_half_width(self.accuracy_b)

    @property
    def mean_diff(self) -> float:
        return float(np.mean(self.differences))

    @property
    def diff_ci(self) -> float:
        return ci_half_width(self.differences)

    @property
    def significant(self) -> bool:
        """True when the paired CI excludes zero."""
        return bool(abs(self.mean_diff) > self.diff_ci)


def paired_compare(traces_a: Sequence[RunTrace], traces_b: Sequence[RunTrace]) -> PairedComparison:
    """Per-seed accuracy-vs-clean differences ``a - b``, paired by seed."""
    seeds_a = [t.seed for t in traces_a]
    seeds_b = [t.seed for t in traces_b]
    if seeds_a != seeds_b:
        raise ValueError(f"unpaired trace lists: seeds {seeds_a} vs {seeds_b}")
    if len(seeds_a) != len(set(seeds_a)):
        raise ValueError("duplicate seeds in trace list")
    return PairedComparison(
        seeds=seeds_a,
        accuracy_a=np.array([t.accuracy_vs_clean for t in traces_a]),
        accuracy_b=np.array([t.accuracy_vs_clean for t in traces_b]),
    )


# -- sweeps -----------------------------------------------------------------

@dataclass
class SweepPoint:
    value: float
    comparison: PairedComparison


@dataclass
class SweepReport:
    axis: Axis
    points: list[SweepPoint] = field(default_factory=list)

    def rows(self):
        """CSV rows: one per (axis value, algorithm)."""
        for p in self.points:
            c = p.comparison
            for algo, mean, ci in (("oskm", c.mean_a, c.ci_a), ("norma", c.mean_b, c.ci_b)):
                yield {
                    "axis_value": p.value, "algo": algo, "mean_accuracy": mean,
                    "ci_half_width": ci, "n_seeds": c.n_seeds, "mean_diff": c.mean_diff,
                    "diff_ci_half_width": c.diff_ci, "significant": int(c.significant),
                }


def worker_count() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("OSKM_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _paired_run(args) -> tuple[RunTrace, RunTrace]:
    stream_config, config = args
    stream = gen_stream(stream_config)
    return (run_experiment(Algorithm.OSKM, stream, config, seed=stream_config.seed),
            run_experiment(Algorithm.NORMA, stream, config, seed=stream_config.seed))


def run_paired(stream_configs: Sequence[StreamConfig], config: OskmConfig,
               workers: int | None = None) -> list[tuple[RunTrace, RunTrace]]:
    """Run osKM and NORMA on each stream; results come back in input order."""
    jobs = [(sc, config) for sc in stream_configs]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_paired_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_paired_run, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_sweep(axis, values: Sequence[float], base: StreamConfig, config: OskmConfig,
              seeds: Sequence[int], workers: int | None = None) -> SweepReport:
    axis = Axis(axis)
    key = "snr_db" if axis is Axis.SNR_DB else "label_flip_prob"
    configs = [replace(base, **{key: value}, seed=s) for value in values for s in seeds]
    results = run_paired(configs, config, workers)
    report = SweepReport(axis)
    for i, value in enumerate(values):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        report.points.append(SweepPoint(value, paired_compare([a for a, _ in chunk],
                                                              [b for _, b in chunk])))
    return report


# -- mistake bound ----------------------------------------------------------

@dataclass
class BoundReport:
    M_N: int
    bound_value: float
    rho_margin_grid: list
    best_rho: float
    comparator_norm: float
    trace_K: float
    loss_norm: float

    @property
    def holds(self) -> bool:
        return self.M_N <= self.bound_value


def bound_formula(loss_norm: float, trace_K: float, rho_margin: float) -> float:
    return (loss_norm / 2 + math.sqrt(loss_norm**2 / 4 + trace_K / rho_margin)) ** 2


def default_rho_grid() -> list[float]:
    return list(np.logspace(-3, 1, 20))


def mistake_bound(trace: RunTrace, stream: Stream, comparator, rho_grid=None,
                  spec: KernelSpec | None = None) -> BoundReport:
    """Check ``M_N`` against the kernel-perceptron style update bound.

    The comparator ``z`` lives in input space (linear kernel only) and the
    projection inside the margin losses is taken as the identity.  Losses
    use the labels the learner was trained on.
    """
    spec = spec or KernelSpec()
    if spec.family is not KernelFamily.LINEAR:
        raise ValueError("mistake bound needs the linear kernel (comparator lives in input space)")
    z = np.asarray(comparator, dtype=float)
    z_norm = float(np.linalg.norm(z))
    if z_norm > 1.0 + 1e-12:
        raise ValueError(f"comparator norm must be <= 1, got {z_norm}")
    rho_grid = default_rho_grid() if rho_grid is None else list(rho_grid)
    if not rho_grid or min(rho_grid) <= 0:
        raise ValueError("rho_grid must be a nonempty list of positive margins")

    idx = np.flatnonzero(trace.update_made)
    m = len(idx)
    if m == 0:
        return BoundReport(0, 0.0, rho_grid, rho_grid[0], z_norm, 0.0, 0.0)
    x = np.asarray(stream.x)[idx]
    y = np.asarray(trace.y_noisy)[idx]
    trace_K = float(np.einsum("ij,ij->", x, x))
    margins = y * (x @ z)

    best = (math.inf, rho_grid[0], 0.0)
    for r in rho_grid:
        loss_norm = float(np.linalg.norm(np.maximum(1.0 - margins / r, 0.0)))
        value = bound_formula(loss_norm, trace_K, r)
        if value < best[0]:
            best = (value, r, loss_norm)
    return BoundReport(m, best[0], rho_grid, best[1], z_norm, trace_K, best[2])
