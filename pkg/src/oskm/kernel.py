"""Kernel evaluation and normalized kernel blocks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class KernelFamily(str, enum.Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    ``bandwidth`` is only used by the Gaussian kernel,
    ``k(x, x') = exp(-||x - x'||^2 / (2 * bandwidth^2))``.
    """

    family: KernelFamily = KernelFamily.LINEAR
    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.family is KernelFamily.GAUSSIAN and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


def kernel_eval(spec: KernelSpec, x, x_prime) -> float:
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    if spec.family is KernelFamily.LINEAR:
        return float(x @ x_prime)
    d = x - x_prime
    return float(np.exp(-(d @ d) / (2.0 * spec.bandwidth**2)))


def gram(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``.

    Both arguments may carry leading batch dimensions, in which case the
    last two axes are treated as (samples, features) and the result has
    shape ``(..., len(A), len(B))``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-1] != B.shape[-1]:
        raise ValueError(f"dimension mismatch: {A.shape[-1]} vs {B.shape[-1]}")
    inner = A @ np.swapaxes(B, -1, -2)
    if spec.family is KernelFamily.LINEAR:
        return inner
    sq_a = np.einsum("...i,...i->...", A, A)[..., :, None]
    sq_b = np.einsum("...i,...i->...", B, B)[..., None, :]
    dist2 = np.maximum(sq_a + sq_b - 2.0 * inner, 0.0)
    return np.exp(-dist2 / (2.0 * spec.bandwidth**2))


@dataclass(frozen=True)
class KernelBlock:
    """A ``rows x columns`` slice of the kernel matrix and its unit-Frobenius version."""

    raw: np.ndarray
    normalized: np.ndarray
    frob_norm: float


def normalize_block(raw) -> KernelBlock:
    raw = np.asarray(raw, dtype=float)
    frob = float(np.linalg.norm(raw))
    if frob == 0.0:
        raise ValueError("degenerate kernel block")
    return KernelBlock(raw=raw, normalized=raw / frob, frob_norm=frob)


def build_kernel_block(spec: KernelSpec, window, tau_e: int) -> KernelBlock:
    """Kernel block of one learner slot.

    ``window`` holds the slot's samples in arrival order (oldest first).
    Row ``i`` is the ``i``-th most recent sample (newest first), for the
    ``tau_e`` most recent samples; column ``k`` runs over the whole window,
    oldest to newest.  A window shorter than ``tau_e`` yields a block with
    fewer rows.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or len(window) == 0:
        raise ValueError("insufficient history: kernel block needs at least one sample")
    if tau_e < 1:
        raise ValueError(f"tau_e must be >= 1, got {tau_e}")
    rows = window[::-1][:tau_e]
    return normalize_block(gram(spec, rows, window))


def build_kernel_blocks(spec: KernelSpec, windows, tau_e: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`build_kernel_block` over a stack of equal-length windows.

    ``windows`` has shape ``(n_slots, length, dim)``.  Returns the
    normalized blocks, shape ``(n_slots, min(tau_e, length), length)``,
    and the per-slot Frobenius norms.
    """
    windows = np.asarray(windows, dtype=float)
    if windows.ndim != 3 or windows.shape[1] == 0:
        raise ValueError("insufficient history: kernel block needs at least one sample")
    rows = windows[:, ::-1][:, :tau_e]
    raw = gram(spec, rows, windows)
    frob = np.sqrt(np.einsum("jrc,jrc->j", raw, raw))
    if np.any(frob == 0.0):
        raise ValueError("degenerate kernel block")
    return raw / frob[:, None, None], frob
