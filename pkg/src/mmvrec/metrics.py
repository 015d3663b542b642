"""Evaluation metrics, hard-threshold calibration and coherence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexmat import ComplexMatrix
from .errors import ContractViolation


def _as_complex_batch(batch):
    out = []
    for item in batch:
        if isinstance(item, ComplexMatrix):
            out.append(item.to_complex())
        else:
            out.append(np.asarray(item))
    return out


def mse(X_true_batch, X_hat_batch, normalization: str = "per-eval") -> float:
    """Sum of squared Frobenius deviations over a batch.

    normalization 'per-train' divides by M*N*I (the training-loss convention),
    'per-eval' divides by N*T (the evaluation convention).
    """
    X_true_batch = _as_complex_batch(X_true_batch)
    X_hat_batch = _as_complex_batch(X_hat_batch)
    if len(X_true_batch) != len(X_hat_batch) or not X_true_batch:
        raise ContractViolation("batches must be nonempty and the same length")
    total = 0.0
    N, M = X_true_batch[0].shape
    for Xt, Xh in zip(X_true_batch, X_hat_batch):
        if Xt.shape != Xh.shape or Xt.shape != (N, M):
            raise ContractViolation("batch entries have mismatched shapes")
        total += float(np.linalg.norm(Xt - Xh) ** 2)
    T = len(X_true_batch)
    if normalization == "per-train":
        return total / (M * N * T)
    if normalization == "per-eval":
        return total / (N * T)
    raise ContractViolation(f"unknown normalization {normalization!r}")


def hard_threshold(scores: np.ndarray, gamma: float) -> np.ndarray:
    """Elementwise indicator score >= gamma (ties map to active)."""
    if not np.isfinite(gamma):
        raise ContractViolation("gamma must be finite")
    return (np.asarray(scores) >= gamma).astype(np.int64)


def error_rate(alpha_batch, alpha_hat_batch) -> float:
    """Average per-device Hamming error (1/(N*T)) sum_t ||alpha - alpha_hat||_1."""
    alpha_batch = [np.asarray(a) for a in alpha_batch]
    alpha_hat_batch = [np.asarray(a) for a in alpha_hat_batch]
    if len(alpha_batch) != len(alpha_hat_batch) or not alpha_batch:
        raise ContractViolation("batches must be nonempty and the same length")
    total = 0.0
    N = alpha_batch[0].shape[0]
    for a, ah in zip(alpha_batch, alpha_hat_batch):
        if a.shape != ah.shape or a.shape != (N,):
            raise ContractViolation("batch entries have mismatched shapes")
        if not (np.isin(a, (0, 1)).all() and np.isin(ah, (0, 1)).all()):
            raise ContractViolation("error_rate expects binary vectors")
        total += float(np.sum(np.abs(a - ah)))
    return total / (N * len(alpha_batch))


@dataclass(frozen=True)
class ThresholdCalibration:
    gamma_star: float
    pe_curve: list  # (gamma, P_E(gamma)) pairs evaluated during calibration


def calibrate_threshold(score_batches, alpha_batches) -> ThresholdCalibration:
    """Exact minimizer of the detection error rate over thresholds.

    P_E(gamma) is piecewise constant with breakpoints at the observed scores,
    so evaluating at midpoints between consecutive distinct sorted scores
    (plus below-min / above-max sentinels) covers every achievable value.
    Ties break toward the smaller gamma.

    One sorted pass suffices: raising gamma past a score value converts its
    true positives to misses and its false alarms to correct rejections, so
    the error count at every candidate follows from cumulative active and
    inactive counts per distinct score.
    """
    score_list = [np.asarray(s, dtype=np.float64) for s in score_batches]
    alpha_list = [np.asarray(a) for a in alpha_batches]
    if len(score_list) != len(alpha_list) or not score_list:
        raise ContractViolation("batches must be nonempty and the same length")
    N = alpha_list[0].shape[0]
    for s, a in zip(score_list, alpha_list):
        if a.shape != s.shape or a.shape != (N,):
            raise ContractViolation("batch entries have mismatched shapes")
        if not np.isin(a, (0, 1)).all():
            raise ContractViolation("calibration expects binary activity vectors")
    scores = np.concatenate(score_list)
    if scores.size == 0:
        raise ContractViolation("need at least one calibration sample")
    labels = np.concatenate(alpha_list).astype(np.int64)

    order = np.argsort(scores, kind="stable")
    s_sorted, y_sorted = scores[order], labels[order]
    distinct, starts = np.unique(s_sorted, return_index=True)
    per_value = np.diff(np.append(starts, s_sorted.size))
    active_per_value = np.add.reduceat(y_sorted, starts)

    candidates = np.empty(distinct.size + 1)
    candidates[0] = distinct[0] - 1.0
    candidates[1:-1] = 0.5 * (distinct[:-1] + distinct[1:])
    candidates[-1] = distinct[-1] + 1.0

    # misses: actives strictly below gamma; false alarms: inactives at or above
    missed = np.concatenate(([0], np.cumsum(active_per_value)))
    rejected = np.concatenate(([0], np.cumsum(per_value - active_per_value)))
    total_inactive = labels.size - int(labels.sum())
    pe = (missed + (total_inactive - rejected)) / labels.size

    best = int(np.argmin(pe))
    curve = list(zip(candidates.tolist(), pe.tolist()))
    return ThresholdCalibration(gamma_star=float(candidates[best]), pe_curve=curve)


def coherence_metrics(A: ComplexMatrix, group_size: int = 1,
                      reduce: str = "max") -> tuple[float, float, float]:
    """(coherence, block-coherence, sub-coherence) of a column-normalized matrix.

    mu = max_{i != j} |a_i^H a_j|; mu_block = max_{g != h} spectral-norm of the
    cross-group Gram block divided by the group size; nu = max within-group
    off-diagonal |a_i^H a_j|.  With group_size 1, mu_block reduces to mu and
    nu is reported as 0.  ``reduce='mean'`` averages over pairs/groups instead
    of taking the max (used for learned-matrix reporting).
    """
    Ac = A.to_complex()
    norms = np.linalg.norm(Ac, axis=0)
    if np.any(norms == 0):
        raise ContractViolation("matrix has a zero column")
    Abar = Ac / norms
    N = Abar.shape[1]
    d = group_size
    if d < 1 or N % d != 0:
        raise ContractViolation(f"group size {d} must divide N={N}")
    G = np.abs(np.conj(Abar.T) @ Abar)
    off = G[~np.eye(N, dtype=bool)]
    mu = float(np.max(off)) if off.size else 0.0
    if reduce == "mean" and off.size:
        mu = float(np.mean(off))

    if d == 1:
        return mu, mu, 0.0

    n_groups = N // d
    blocks = [Abar[:, g * d : (g + 1) * d] for g in range(n_groups)]
    cross, within = [], []
    for g in range(n_groups):
        gram = np.conj(blocks[g].T) @ blocks[g]
        w = np.abs(gram[~np.eye(d, dtype=bool)])
        within.append(float(np.max(w)) if w.size else 0.0)
        for h in range(n_groups):
            if g == h:
                continue
            s = np.linalg.svd(np.conj(blocks[g].T) @ blocks[h], compute_uv=False)
            cross.append(float(s[0]) / d)
    if reduce == "mean":
        mu_block = float(np.mean(cross)) if cross else 0.0
        nu = float(np.mean(within))
    else:
        mu_block = float(np.max(cross)) if cross else 0.0
        nu = float(np.max(within))
    return mu, mu_block, nu
