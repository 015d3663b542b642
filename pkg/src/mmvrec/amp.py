"""AMP for jointly sparse recovery with a per-index Bernoulli-Gaussian
MMSE denoiser and an Onsager-corrected residual.

The activity prior is a vector eps(n) in (0,1), so informative per-device
probabilities can be plugged in directly (e.g. trained priors imported from
the interchange format).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complexmat import ComplexMatrix
from .errors import ContractViolation, DivergenceError


@dataclass(frozen=True)
class AmpConfig:
    eps: np.ndarray            # length-N activity priors, each in (0,1)
    k_max: int = 50
    tau_floor: float = 1e-12   # guards 1/tau^2 when the residual vanishes
    damping: float = 0.0       # 0 reproduces the plain iteration
    rel_tol: float = 1e-8

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=np.float64)
        if np.any(eps <= 0.0) or np.any(eps >= 1.0):
            raise ContractViolation("activity priors must lie strictly in (0, 1)")
        if self.k_max < 1:
            raise ContractViolation("k_max must be at least 1")
        if self.tau_floor <= 0:
            raise ContractViolation("tau_floor must be positive")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def uniform(cls, N: int, p: float, **kw) -> "AmpConfig":
        return cls(eps=np.full(N, p), **kw)


@dataclass
class AmpState:
    X: np.ndarray       # N x M complex estimate
    R: np.ndarray       # L x M complex residual
    tau: float          # effective noise level, >= tau_floor
    t_lr: np.ndarray    # length-N likelihood-ratio terms t(n), all > 0
    k: int = 0


def _likelihood_log_ratio(pseudo_norm2, M, tau, eps):
    """log t(n) = log((1-eps)/eps) + M log((tau^2+1)/tau^2) - ||p||^2/(tau^2(tau^2+1))."""
    t2 = tau * tau
    return (
        np.log((1.0 - eps) / eps)
        + M * np.log((t2 + 1.0) / t2)
        - pseudo_norm2 / (t2 * (t2 + 1.0))
    )


def mmse_denoise_row(pseudo: np.ndarray, tau: float, eps_n: float) -> np.ndarray:
    """Posterior-mean shrinkage of one pseudo-data vector.

    ``pseudo`` is the length-M column R^H a_n + X_n^H; the return value is the
    updated row X_n (conjugate-transposed back).  The likelihood ratio is
    evaluated in the log domain so the ((tau^2+1)/tau^2)^M factor cannot
    overflow.
    """
    if tau <= 0:
        raise ContractViolation("tau must be positive")
    if not 0.0 < eps_n < 1.0:
        raise ContractViolation("eps must lie strictly in (0, 1)")
    pseudo = np.asarray(pseudo)
    M = pseudo.shape[0]
    t2 = tau * tau
    log_t = _likelihood_log_ratio(np.sum(np.abs(pseudo) ** 2), M, tau, eps_n)
    # 1/(1+t) computed as exp(-log(1+t)) for totality at extreme log_t
    inv_one_plus_t = np.exp(-np.logaddexp(0.0, log_t))
    return (pseudo / (t2 + 1.0) * inv_one_plus_t).conj()


def _denoise_all(pseudo_rows, norms2, tau, eps):
    """Vectorized denoiser over rows. pseudo_rows[n] = (R^H a_n + X_n^H)^H."""
    M = pseudo_rows.shape[1]
    t2 = tau * tau
    log_t = _likelihood_log_ratio(norms2, M, tau, eps)
    inv_one_plus_t = np.exp(-np.logaddexp(0.0, log_t))
    X_new = pseudo_rows * (inv_one_plus_t / (t2 + 1.0))[:, None]
    t_lr = np.clip(np.exp(log_t), 1e-300, 1e300)
    return X_new, t_lr, log_t


def onsager_scale(norms2: np.ndarray, log_t: np.ndarray, tau: float, M: int) -> float:
    """Scalar s with S = s * I_M: the mean over n of the denoiser divergence.

    Per index, the Jacobian of the denoiser with respect to its pseudo data is
    (1/((tau^2+1)(1+t))) I + (t/((1+t)^2 (tau^2+1)^2 tau^2)) p p^H; collapsing
    the rank-one part to scalar-times-identity via its trace/M and averaging
    over n gives s.  Everything involving t(n) is evaluated in the log domain
    (t/(1+t)^2 = exp(log t - 2 log(1+t))).
    """
    t2 = tau * tau
    inv_one_plus_t = np.exp(-np.logaddexp(0.0, log_t))
    t_over = np.exp(log_t - 2.0 * np.logaddexp(0.0, log_t))
    first = inv_one_plus_t / (t2 + 1.0)
    second = norms2 * t_over / ((t2 + 1.0) ** 2 * t2 * M)
    return float(np.mean(first + second))


def onsager_residual(state: AmpState, Y: np.ndarray, A: np.ndarray,
                     X_next: np.ndarray, config: AmpConfig) -> np.ndarray:
    """R^(k+1) = Y - A X^(k+1) + (N/L) R^(k) S with S the Onsager correction."""
    L, N = A.shape
    M = Y.shape[1]
    pseudo_rows = np.conj(A.T) @ state.R + state.X
    norms2 = np.sum(np.abs(pseudo_rows) ** 2, axis=1)
    log_t = _likelihood_log_ratio(norms2, M, state.tau, config.eps)
    s = onsager_scale(norms2, log_t, state.tau, M)
    R_next = Y - A @ X_next + (N / L) * state.R * s
    if not np.isfinite(R_next).all():
        raise DivergenceError(f"non-finite residual at AMP iteration {state.k + 1}",
                              iteration=state.k + 1)
    return R_next


@dataclass
class AmpDiagnostics:
    tau: list = field(default_factory=list)
    residual_norm: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def solve_amp(Y: ComplexMatrix, A: ComplexMatrix,
              config: AmpConfig) -> tuple[ComplexMatrix, AmpDiagnostics]:
    """Run the AMP iteration from X=0, R=Y for k_max iterations.

    Stops early when the relative change of X falls below ``rel_tol``.

    The iteration internally rescales (A, Y) by 1/sqrt(L): the denoiser's
    unit-variance prior assumes unit-norm measurement columns, while the
    pilot convention here is ||a_n|| = sqrt(L).  The returned estimate is in
    the original units.
    """
    Ac = A.to_complex()
    Yc = Y.to_complex()
    L, N = Ac.shape
    Ac = Ac / np.sqrt(L)
    Yc = Yc / np.sqrt(L)
    M = Yc.shape[1]
    if config.eps.shape[0] != N:
        raise ContractViolation(f"eps has length {config.eps.shape[0]}, expected {N}")

    X = np.zeros((N, M), dtype=np.complex128)
    R = Yc.copy()
    diag = AmpDiagnostics()
    state = AmpState(X=X, R=R, tau=0.0, t_lr=np.ones(N), k=0)

    for k in range(config.k_max):
        tau = max(np.sqrt(1.0 / (M * L)) * np.linalg.norm(R), config.tau_floor)
        state.tau = tau
        pseudo_rows = np.conj(Ac.T) @ R + X
        norms2 = np.sum(np.abs(pseudo_rows) ** 2, axis=1)
        X_new, t_lr, log_t = _denoise_all(pseudo_rows, norms2, tau, config.eps)
        if config.damping > 0:
            X_new = (1.0 - config.damping) * X_new + config.damping * X

        s = onsager_scale(norms2, log_t, tau, M)
        R_new = Yc - Ac @ X_new + (N / L) * R * s
        if not (np.isfinite(X_new).all() and np.isfinite(R_new).all()):
            raise DivergenceError(f"non-finite iterate at AMP iteration {k + 1}",
                                  iteration=k + 1)

        delta = np.linalg.norm(X_new - X) / max(np.linalg.norm(X), 1.0)
        X, R = X_new, R_new
        state.X, state.R, state.t_lr, state.k = X, R, t_lr, k + 1
        diag.tau.append(tau)
        diag.residual_norm.append(float(np.linalg.norm(R)))
        if delta < config.rel_tol:
            diag.converged = True
            break

    diag.iterations = state.k
    return ComplexMatrix.from_complex(X), diag
