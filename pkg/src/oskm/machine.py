"""Online stochastic kernel machine (osKM).

The stream is cut into consecutive, non-overlapping realizations of
``tau_p`` samples (the persistence window); realization ``i`` ends at sample
``J(i) = i * tau_p``.  Learner slot ``j`` owns the ``j``-th sample of every
realization, so its window is the ``j``-th column of the last ``tau``
realizations.  Each slot runs a NORMA-style stochastic step on its own
sample, and consensus ADMM ties the slots together: for every one of the
``tau_e`` most recent realizations the slots' soft predictions are driven
towards a shared value ``v``, which encodes the prior that the class does
not change inside a persistence window.

Coefficients follow the dual convention ``f_j = sum_m alpha_j[m] y[m] k(x[m], .)``
with the noisy labels ``y`` the learner was shown.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .kernel import KernelSpec, build_kernel_blocks, gram
from .loss import check_label, hinge_subgradient, regularized_risk_from_gram, sign

DIVERGENCE_LIMIT = 1e6


class DivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OskmConfig:
    lam: float = 0.1
    rho: float = 0.1
    eta: float = 0.7
    tau: int = 100
    tau_p: int = 10
    tau_e: int | None = None
    admm_iters: int = 3
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.tau_e is None:
            object.__setattr__(self, "tau_e", self.tau_p)
        for name in ("tau", "tau_p", "tau_e", "admm_iters"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if not self.tau_p <= self.tau_e <= self.tau:
            raise ValueError(
                f"window ordering tau_p <= tau_e <= tau violated: "
                f"tau_p={self.tau_p}, tau_e={self.tau_e}, tau={self.tau}"
            )
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")


class WindowBuffer:
    """Last ``tau`` complete realizations, stored slot-major, plus the one being filled.

    ``x`` has shape ``(tau_p, R, dim)``: ``x[j]`` is slot ``j``'s window in
    arrival order.  ``steps`` holds the 0-based stream position of each
    stored sample.
    """

    def __init__(self, tau: int, tau_p: int):
        self.tau = tau
        self.tau_p = tau_p
        self.x: np.ndarray | None = None
        self.y = np.zeros((tau_p, 0), dtype=int)
        self.steps = np.zeros((tau_p, 0), dtype=int)
        self.pending_x: list[np.ndarray] = []
        self.pending_y: list[int] = []
        self.n_seen = 0
        self.n_realizations = 0

    @property
    def dim(self) -> int | None:
        if self.x is not None:
            return self.x.shape[2]
        return len(self.pending_x[0]) if self.pending_x else None

    @property
    def length(self) -> int:
        return self.y.shape[1]

    def realization_index(self, i: int) -> int:
        """1-based index of the latest sample of realization ``i`` (``i >= 1``)."""
        if i < 1:
            raise ValueError(f"realization numbers start at 1, got {i}")
        return i * self.tau_p

    def push(self, x, y) -> bool:
        """Stage one sample; returns True once the current realization is full."""
        x = np.asarray(x, dtype=float)
        if self.dim is not None and x.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: {x.shape} vs ({self.dim},)")
        self.pending_x.append(x)
        self.pending_y.append(check_label(y))
        self.n_seen += 1
        return len(self.pending_x) == self.tau_p

    def pending(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.pending_x), np.array(self.pending_y)

    def commit(self) -> int:
        """Move the full pending realization into the window; returns how many realizations were evicted."""
        if len(self.pending_x) != self.tau_p:
            raise RuntimeError("commit called before the realization is complete")
        new_x, new_y = self.pending()
        first = self.n_seen - self.tau_p
        new_steps = np.arange(first, self.n_seen)
        if self.x is None:
            self.x = np.zeros((self.tau_p, 0, new_x.shape[1]))
        self.x = np.concatenate([self.x, new_x[:, None, :]], axis=1)
        self.y = np.concatenate([self.y, new_y[:, None]], axis=1)
        self.steps = np.concatenate([self.steps, new_steps[:, None]], axis=1)
        self.pending_x, self.pending_y = [], []
        self.n_realizations += 1
        evicted = max(0, self.length - self.tau)
        if evicted:
            self.x = self.x[:, evicted:]
            self.y = self.y[:, evicted:]
            self.steps = self.steps[:, evicted:]
        return evicted


@dataclass
class OskmState:
    config: OskmConfig
    buffer: WindowBuffer
    alpha: np.ndarray  # (tau_p, R)
    v: np.ndarray  # (r_e,), r_e = min(tau_e, R)
    u: np.ndarray  # (tau_p, r_e)
    blocks: np.ndarray | None = None  # (tau_p, r_e, R), unit Frobenius norm per slot
    frob_norms: np.ndarray | None = None
    updated_steps: list[int] = field(default_factory=list)
    n_sweeps: int = 0

    @property
    def n_updates(self) -> int:
        return len(self.updated_steps)


class StepResult(NamedTuple):
    label: int
    score: float
    committed: bool


def oskm_init(config: OskmConfig) -> OskmState:
    return OskmState(
        config=config,
        buffer=WindowBuffer(config.tau, config.tau_p),
        alpha=np.zeros((config.tau_p, 0)),
        v=np.zeros(0),
        u=np.zeros((config.tau_p, 0)),
    )


def oskm_predict(state: OskmState, x) -> float:
    """Average of the slot hypotheses at ``x``."""
    buf = state.buffer
    x = np.asarray(x, dtype=float)
    if buf.dim is not None and x.shape != (buf.dim,):
        raise ValueError(f"dimension mismatch: {x.shape} vs ({buf.dim},)")
    if buf.length == 0:
        return 0.0
    beta = (state.alpha * buf.y).reshape(-1)
    k = gram(state.config.kernel, buf.x.reshape(-1, buf.x.shape[2]), x[None, :])[:, 0]
    return float(beta @ k) / state.config.tau_p


def slot_predictions(alpha, labels, K) -> np.ndarray:
    """``K_j (y_j * alpha_j)``: each slot's soft predictions on its block rows."""
    return np.einsum("...rc,...c->...r", K, alpha * labels)


def consensus_update(predictions, u) -> np.ndarray:
    """Minimizer of ``sum_j ||v - p_j - u_j||^2``, i.e. the mean of ``p_j + u_j`` over slots."""
    return np.mean(np.asarray(u) + np.asarray(predictions), axis=0)


def dual_update(u, predictions, v) -> np.ndarray:
    return np.asarray(u) + np.asarray(predictions) - np.asarray(v)


def deterministic_direction(alpha, labels, K, v, u, *, eta: float, lam: float, rho: float) -> np.ndarray:
    """Regularization and consensus-penalty part of one coefficient step.

    Equals the gradient of
    ``eta*lam/2 * ||alpha||^2 + rho/2 * ||K (y*alpha) - v + u||^2``.
    The decay term is the RKHS (functional) gradient of ``lam/2 ||f||_H^2``
    written in coefficients, which is what makes a consensus-free slot
    identical to NORMA.
    """
    if rho == 0 or K is None:
        return eta * lam * alpha
    resid = slot_predictions(alpha, labels, K) - v + u
    return eta * lam * alpha + rho * labels * np.einsum("...rc,...r->...c", K, resid)


def alpha_update(alpha, labels, K, v, u, *, eta, lam, rho, data_grad=None) -> np.ndarray:
    """One coefficient step: decay, hinge subgradient, then the consensus penalty.

    ``data_grad`` is the hinge subgradient term in coefficient space (see
    :func:`stochastic_data_grad`); ``None`` skips it.  Passing ``lam=0`` and
    no ``data_grad`` leaves only the penalty step used by the extra ADMM
    sweeps.
    """
    step = deterministic_direction(alpha, labels, K, v, u, eta=eta, lam=lam, rho=rho)
    if data_grad is not None:
        step = step + eta * data_grad
    new = alpha - step
    if not np.all(np.isfinite(new)) or np.max(np.abs(new), initial=0.0) > DIVERGENCE_LIMIT:
        raise DivergenceError("divergence: reduce eta or rho")
    return new


def stochastic_data_grad(new_margins, length: int) -> np.ndarray:
    """Hinge subgradient of each slot's newest sample, placed on that sample's coefficient."""
    new_margins = np.atleast_1d(new_margins)
    grad = np.zeros((len(new_margins), length))
    grad[:, -1] = hinge_subgradient(new_margins)
    return grad


def window_data_grad(alpha, labels, gram_matrix) -> np.ndarray:
    """Functional subgradient of the window-averaged hinge loss, in coefficient space."""
    margins = labels * (gram_matrix @ (alpha * labels))
    return hinge_subgradient(margins) / len(alpha)


def objective_g(alpha, labels, gram_matrix, lam: float) -> float:
    """Per-slot cost: window-averaged hinge loss plus ``lam/2 ||f_j||_H^2``."""
    return regularized_risk_from_gram(alpha, labels, gram_matrix, lam)


def augmented_objective(alpha, labels, gram_matrix, K, v, u, *, lam: float, rho: float) -> float:
    resid = K @ (alpha * labels) - v + u
    return objective_g(alpha, labels, gram_matrix, lam) + 0.5 * rho * float(resid @ resid)


def augmented_gradient(alpha, labels, gram_matrix, K, v, u, *, lam: float, rho: float) -> np.ndarray:
    """Euclidean gradient of :func:`augmented_objective` (valid away from hinge kinks)."""
    beta = alpha * labels
    f = gram_matrix @ beta
    phi = hinge_subgradient(labels * f)
    data = labels * (gram_matrix @ (labels * phi)) / len(alpha)
    resid = K @ beta - v + u
    return data + lam * labels * f + rho * labels * (K.T @ resid)


def slot_gram(state: OskmState, j: int) -> np.ndarray:
    xj = state.buffer.x[j]
    return gram(state.config.kernel, xj, xj)


def rebuild_blocks(state: OskmState) -> None:
    K, frob = build_kernel_blocks(state.config.kernel, state.buffer.x, state.config.tau_e)
    state.blocks, state.frob_norms = K, frob


def admm_sweep(state: OskmState, data_grad=None, decay: bool = False) -> None:
    """One ADMM sweep: coefficient step for every slot, then consensus, then duals.

    ``decay`` applies the ``eta*lam`` regularization shrink and ``data_grad``
    the hinge subgradient of new samples.  The first sweep after a new
    realization uses both; the extra sweeps after it only move the
    consensus penalty.  On a frozen window (no new samples) a sweep with
    ``decay=True`` follows the deterministic part of the update.
    """
    cfg = state.config
    y = state.buffer.y
    lam = cfg.lam if decay else 0.0
    state.alpha = alpha_update(
        state.alpha, y, state.blocks, state.v, state.u,
        eta=cfg.eta, lam=lam, rho=cfg.rho, data_grad=data_grad,
    )
    if cfg.rho > 0:
        preds = slot_predictions(state.alpha, y, state.blocks)
        state.v = consensus_update(preds, state.u)
        state.u = dual_update(state.u, preds, state.v)
    state.n_sweeps += 1


def slot_margins(state: OskmState, new_x, new_y) -> np.ndarray:
    """Margin of each slot's incoming sample under that slot's current hypothesis."""
    if state.buffer.length == 0:
        return np.zeros(len(new_y))
    buf = state.buffer
    k = gram(state.config.kernel, new_x[:, None, :], buf.x)[:, 0, :]
    f = np.einsum("jc,jc->j", state.alpha * buf.y, k)
    return new_y * f


def _shift_in(a: np.ndarray, r_e: int) -> np.ndarray:
    # newest realization becomes row 0; older rows move down, the oldest falls off
    pad = np.zeros(a.shape[:-1] + (1,))
    return np.concatenate([pad, a], axis=-1)[..., :r_e]


def commit_realization(state: OskmState) -> None:
    """Fold the full pending realization into the model (one loop pass of the algorithm)."""
    cfg = state.config
    buf = state.buffer
    new_x, new_y = buf.pending()
    margins = slot_margins(state, new_x, new_y)
    first_step = buf.n_seen - cfg.tau_p

    evicted = buf.commit()
    alpha = np.concatenate([state.alpha, np.zeros((cfg.tau_p, 1))], axis=1)
    state.alpha = alpha[:, evicted:]
    if cfg.rho > 0:
        r_e = min(cfg.tau_e, buf.length)
        state.v = _shift_in(state.v, r_e)
        state.u = _shift_in(state.u, r_e)
        rebuild_blocks(state)

    data_grad = stochastic_data_grad(margins, buf.length)
    for j in np.flatnonzero(data_grad[:, -1] < 0):
        state.updated_steps.append(first_step + int(j))
    for sweep in range(cfg.admm_iters):
        if sweep == 0:
            admm_sweep(state, data_grad=data_grad, decay=True)
        elif cfg.rho > 0:
            admm_sweep(state)


def oskm_step(state: OskmState, x, y) -> StepResult:
    """Predict on ``x`` with the current model, then reveal ``y`` and learn from it."""
    y = check_label(y)
    score = oskm_predict(state, x)
    committed = state.buffer.push(x, y)
    if committed:
        commit_realization(state)
    return StepResult(sign(score), score, committed)


def consensus_residual(state: OskmState) -> float:
    """``max_j ||K_j (y_j*alpha_j) - v||``."""
    preds = slot_predictions(state.alpha, state.buffer.y, state.blocks)
    return float(np.max(np.linalg.norm(preds - state.v, axis=1)))

