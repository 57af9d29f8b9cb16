"""Zero-one and hinge losses, and the regularized risk of a kernel expansion."""

from __future__ import annotations

import numpy as np

from .kernel import KernelSpec, gram


def check_label(y) -> int:
    if y not in (-1, 1):
        raise ValueError(f"invalid label: {y!r} (expected -1 or +1)")
    return int(y)


def sign(f):
    """Sign with ``sign(0) = +1``."""
    if np.ndim(f) == 0:
        return 1 if f >= 0 else -1
    return np.where(np.asarray(f) >= 0, 1, -1)


def zero_one_loss(predicted_label, true_label) -> int:
    return int(check_label(predicted_label) != check_label(true_label))


def hinge_loss(margin):
    return np.maximum(1.0 - np.asarray(margin, dtype=float), 0.0)[()]


def hinge_subgradient(margin):
    # the kink at margin == 1 resolves to 0 (no update once the margin is met)
    return np.where(np.asarray(margin, dtype=float) < 1.0, -1.0, 0.0)[()]


def expansion_margins(alpha, labels, K) -> np.ndarray:
    """Margins ``y_l * f(x_l)`` of ``f = sum_m alpha_m y_m k(x_m, .)`` on its own samples."""
    beta = alpha * labels
    return labels * (K @ beta)


def regularized_risk_from_gram(alpha, labels, K, lam: float) -> float:
    alpha = np.asarray(alpha, dtype=float)
    labels = np.asarray(labels, dtype=float)
    K = np.asarray(K, dtype=float)
    if not (alpha.shape == labels.shape and K.shape == (len(alpha), len(alpha))):
        raise ValueError(
            f"misaligned expansion: alpha {alpha.shape}, labels {labels.shape}, gram {K.shape}"
        )
    if len(alpha) == 0:
        return 0.0
    beta = alpha * labels
    empirical = float(np.mean(hinge_loss(labels * (K @ beta))))
    return empirical + 0.5 * lam * float(beta @ K @ beta)


def regularized_risk(alpha, labels, samples, spec: KernelSpec, lam: float) -> float:
    """Average hinge loss of the expansion on its own samples plus ``lam/2 ||f||_H^2``.

    ``lam = 0`` gives the plain empirical risk.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) != len(np.atleast_1d(alpha)):
        raise ValueError(f"misaligned expansion: {len(np.atleast_1d(alpha))} coefficients "
                         f"for {len(samples)} samples")
    return regularized_risk_from_gram(alpha, labels, gram(spec, samples, samples), lam)
