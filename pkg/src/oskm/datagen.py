"""Synthetic two-class streams with persistent labels, input noise and label flips.

Stand-in for the radar target features: two spherical unit-variance Gaussian
classes in ``dim`` dimensions whose means sit at ``+-class_separation/2``
along a seeded unit direction.  The class is constant over blocks of
``block_len`` consecutive samples and drawn by a fair coin per block.
Features, block classes, input noise and label flips each come from their
own child seed, so turning one noise source on or off leaves the others
untouched.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterator

import numpy as np

# Bayes accuracy of the clean pair is Phi(class_separation / 2); this gives 95%.
DEFAULT_CLASS_SEPARATION = 2.0 * NormalDist().inv_cdf(0.95)


class Regime(str, enum.Enum):
    NONSTATIONARY = "nonstationary"
    STATIONARY = "stationary"


DEFAULT_BLOCK_LEN = {Regime.NONSTATIONARY: 10, Regime.STATIONARY: 200}


@dataclass(frozen=True)
class StreamConfig:
    dim: int = 128
    n_samples: int = 1000
    regime: Regime = Regime.NONSTATIONARY
    block_len: int | None = None
    class_separation: float = DEFAULT_CLASS_SEPARATION
    snr_db: float = math.inf
    label_flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.block_len is None:
            object.__setattr__(self, "block_len", DEFAULT_BLOCK_LEN[self.regime])
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.n_samples < 0:
            raise ValueError(f"n_samples must be non-negative, got {self.n_samples}")
        if self.block_len < 1:
            raise ValueError(f"block_len must be a positive integer, got {self.block_len}")
        if not self.class_separation > 0:
            raise ValueError(f"class_separation must be positive, got {self.class_separation}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError(f"snr_db must be finite or +inf, got {self.snr_db}")
        if not 0.0 <= self.label_flip_prob <= 0.5:
            raise ValueError(f"label_flip_prob must lie in [0, 0.5], got {self.label_flip_prob}")


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y_clean: int
    y_noisy: int
    block_id: int


@dataclass(frozen=True)
class Stream:
    """Column-oriented stream; iterating yields :class:`Sample` objects."""

    x: np.ndarray
    y_clean: np.ndarray
    y_noisy: np.ndarray
    block_id: np.ndarray
    direction: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.y_clean)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.x[i], int(self.y_clean[i]), int(self.y_noisy[i]), int(self.block_id[i]))


def add_input_noise(x, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at a per-sample SNR.

    Per-coordinate variance is ``||x||^2 / (dim * 10^(snr_db/10))``, so the
    expected noise energy sits ``snr_db`` below the sample energy.  Rows of a
    2-D ``x`` are treated as separate samples.
    """
    x = np.asarray(x, dtype=float)
    if snr_db == math.inf:
        return x.copy()
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    power = np.einsum("...i,...i->...", x, x)
    if np.any(power == 0):
        raise ValueError("SNR undefined for zero signal")
    var = power / (x.shape[-1] * 10.0 ** (snr_db / 10.0))
    return x + rng.standard_normal(x.shape) * np.sqrt(var)[..., None]


def flip_labels(y, p: float, rng: np.random.Generator):
    """Flip each label independently with probability ``p``."""
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"flip probability must lie in [0, 0.5], got {p}")
    y = np.asarray(y)
    flipped = np.where(rng.random(y.shape) < p, -y, y)
    return int(flipped) if flipped.ndim == 0 else flipped


def gen_stream(config: StreamConfig) -> Stream:
    feat_ss, block_ss, noise_ss, flip_ss = np.random.SeedSequence(config.seed).spawn(4)
    feat_rng = np.random.default_rng(feat_ss)
    n, dim = config.n_samples, config.dim

    direction = feat_rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    n_blocks = -(-n // config.block_len)
    block_class = np.where(np.random.default_rng(block_ss).random(n_blocks) < 0.5, 1, -1)
    block_id = np.arange(n) // config.block_len
    y_clean = block_class[block_id]

    x = y_clean[:, None] * (0.5 * config.class_separation) * direction
    x = x + feat_rng.standard_normal((n, dim))
    x = add_input_noise(x, config.snr_db, np.random.default_rng(noise_ss))
    y_noisy = flip_labels(y_clean, config.label_flip_prob, np.random.default_rng(flip_ss))
    return Stream(x=x, y_clean=y_clean, y_noisy=np.asarray(y_noisy), block_id=block_id,
                  direction=direction)


def write_stream_csv(stream: Stream, path) -> None:
    dim = stream.x.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "block_id", "y_clean", "y_noisy"] + [f"x_{i}" for i in range(dim)])
        for i in range(len(stream)):
            w.writerow([i, int(stream.block_id[i]), int(stream.y_clean[i]), int(stream.y_noisy[i])]
                       + [repr(float(v)) for v in stream.x[i]])


def read_stream_csv(path) -> Stream:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    if header[:4] != ["step", "block_id", "y_clean", "y_noisy"]:
        raise ValueError(f"unexpected stream header: {header[:4]}")
    dim = len(header) - 4
    data = np.array(body, dtype=float).reshape(len(body), 4 + dim)
    return Stream(
        x=data[:, 4:],
        y_clean=data[:, 2].astype(int),
        y_noisy=data[:, 3].astype(int),
        block_id=data[:, 1].astype(int),
    )
