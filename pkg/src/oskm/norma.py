"""NORMA: stochastic functional-gradient descent on the regularized hinge risk.

Baseline learner, and what the osKM update collapses to when the consensus
coupling is switched off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelSpec, gram
from .loss import check_label, hinge_subgradient


@dataclass
class NormaState:
    """Kernel expansion ``f = sum_i coefficients[i] * k(supports[i], .)``.

    Supports are kept for ``budget`` steps after arrival and then dropped
    (oldest first); their coefficients have decayed by ``(1 - eta*lam)``
    per step in the meantime.  ``budget=None`` keeps everything.
    """

    spec: KernelSpec = field(default_factory=KernelSpec)
    lam: float = 0.1
    eta: float = 0.7
    budget: int | None = 100
    supports: np.ndarray | None = None
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    arrivals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    step: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.budget is not None and self.budget < 1:
            raise ValueError(f"budget must be a positive integer, got {self.budget}")

    def __len__(self):
        return len(self.coefficients)


def norma_predict(state: NormaState, x) -> float:
    x = np.asarray(x, dtype=float)
    if state.supports is None or len(state.coefficients) == 0:
        if state.supports is not None and x.shape != state.supports.shape[1:]:
            raise ValueError(f"dimension mismatch: {x.shape} vs {state.supports.shape[1:]}")
        return 0.0
    k = gram(state.spec, state.supports, x[None, :])[:, 0]
    return float(state.coefficients @ k)


def norma_update(state: NormaState, x, y) -> bool:
    """One NORMA step on ``(x, y)``; mutates ``state`` and returns whether a support was added."""
    y = check_label(y)
    x = np.asarray(x, dtype=float)
    if state.supports is None:
        state.supports = np.zeros((0, x.shape[0]))
    margin = y * norma_predict(state, x)

    state.coefficients = state.coefficients * (1.0 - state.eta * state.lam)
    added = bool(hinge_subgradient(margin) < 0)
    if added:
        state.supports = np.vstack([state.supports, x[None, :]])
        state.labels = np.append(state.labels, y)
        state.coefficients = np.append(state.coefficients, state.eta * y)
        state.arrivals = np.append(state.arrivals, state.step)
    state.step += 1

    if state.budget is not None:
        keep = state.arrivals >= state.step - state.budget
        if not keep.all():
            state.supports = state.supports[keep]
            state.labels = state.labels[keep]
            state.coefficients = state.coefficients[keep]
            state.arrivals = state.arrivals[keep]
    return added
