"""ADMM solver for the GROUP LASSO problem via its sharing reformulation.

Minimizes (1/2)||A X - Y||_F^2 + lambda * sum_n ||X_{n,:}||_2 over complex
N x M matrices.  Per-column auxiliary blocks are never materialized; only
their average Bbar is stored, which decouples the N row updates into
closed-form block soft-thresholds that all read frozen iteration-k state
(Jacobi style, hence parallelizable).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .complexmat import ComplexMatrix
from .errors import ContractViolation, DivergenceError


@dataclass(frozen=True)
class AdmmConfig:
    lam: float = 0.1
    rho: float = 1.0
    k_max: int = 200
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4

    def __post_init__(self):
        if self.lam < 0:
            raise ContractViolation("lambda must be nonnegative")
        if self.rho <= 0:
            raise ContractViolation("rho must be positive")
        if self.k_max < 1:
            raise ContractViolation("k_max must be at least 1")
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ContractViolation("tolerances must be positive")


@dataclass
class AdmmState:
    """Iteration state: estimate, averaged auxiliary block, scaled dual.

    ``AXbar`` caches (1/N) * A @ X and must stay coherent with X; ``col_norms2``
    holds the real column energies a_n^H a_n.
    """

    A: np.ndarray          # L x N complex
    X: np.ndarray          # N x M complex
    Bbar: np.ndarray       # L x M complex
    C: np.ndarray          # L x M complex
    AXbar: np.ndarray      # L x M complex
    col_norms2: np.ndarray  # length-N real
    k: int = 0

    @classmethod
    def initial(cls, A: np.ndarray, M: int) -> "AdmmState":
        L, N = A.shape
        col_norms2 = np.real(np.sum(np.conj(A) * A, axis=0))
        if np.any(col_norms2 <= 0):
            raise ContractViolation("pilot matrix has a zero column")
        zeros = np.zeros((L, M), dtype=np.complex128)
        return cls(
            A=A,
            X=np.zeros((N, M), dtype=np.complex128),
            Bbar=zeros.copy(),
            C=zeros.copy(),
            AXbar=zeros.copy(),
            col_norms2=col_norms2,
        )


def row_update(state: AdmmState, n: int, config: AdmmConfig) -> np.ndarray:
    """Closed-form update of one row from frozen iteration-k state.

    t = a_n^H (a_n X_n + Bbar - AXbar - C); the row is the block
    soft-threshold max{1 - lambda/(rho ||t||), 0} t / (a_n^H a_n), exactly
    zero when rho ||t|| <= lambda.
    """
    a = state.A[:, n]
    t = np.conj(a) @ (np.outer(a, state.X[n]) + state.Bbar - state.AXbar - state.C)
    return _shrink_row(t, state.col_norms2[n], config.lam, config.rho)


def _shrink_row(t, col_norm2, lam, rho):
    tnorm = np.linalg.norm(t)
    if lam > 0 and rho * tnorm <= lam:
        return np.zeros_like(t)
    return (1.0 - lam / (rho * tnorm) if lam > 0 else 1.0) * t / col_norm2


def all_row_updates(state: AdmmState, config: AdmmConfig) -> np.ndarray:
    """Vectorized equivalent of row_update applied to every n."""
    # t_n = ||a_n||^2 X_n + (A^H W)_n with W = Bbar - AXbar - C
    W = state.Bbar - state.AXbar - state.C
    T = state.col_norms2[:, None] * state.X + np.conj(state.A.T) @ W
    tnorm = np.linalg.norm(T, axis=1)
    if config.lam > 0:
        scale = np.maximum(1.0 - config.lam / (config.rho * np.maximum(tnorm, 1e-300)), 0.0)
    else:
        scale = np.ones_like(tnorm)
    return (scale / state.col_norms2)[:, None] * T


def bbar_update(state: AdmmState, Y: np.ndarray, config: AdmmConfig) -> np.ndarray:
    """Bbar = (Y + rho * AXbar^(k+1) + rho * C^(k)) / (N + rho)."""
    N = state.A.shape[1]
    return (Y + config.rho * state.AXbar + config.rho * state.C) / (N + config.rho)


def dual_update(state: AdmmState) -> np.ndarray:
    """C^(k+1) = C^(k) + AXbar^(k+1) - Bbar^(k+1)."""
    return state.C + state.AXbar - state.Bbar


def group_lasso_objective(A: np.ndarray, X: np.ndarray, Y: np.ndarray,
                          lam: float) -> float:
    return 0.5 * np.linalg.norm(A @ X - Y) ** 2 + lam * np.sum(
        np.linalg.norm(X, axis=1)
    )


@dataclass
class AdmmDiagnostics:
    objective: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)
    dual_residual: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "primal_residual", "dual_residual"])
            for i, (o, r, s) in enumerate(
                zip(self.objective, self.primal_residual, self.dual_residual)
            ):
                w.writerow([i + 1, f"{o:.17g}", f"{r:.17g}", f"{s:.17g}"])


def solve_group_lasso(Y: ComplexMatrix, A: ComplexMatrix,
                      config: AdmmConfig) -> tuple[ComplexMatrix, AdmmDiagnostics]:
    """Run the sharing-form ADMM until k_max or the residual test passes.

    Stops when both the primal residual ||AXbar - Bbar||_F and the dual
    residual rho * ||Bbar^(k+1) - Bbar^(k)||_F fall below
    eps_abs + eps_rel * (their natural scales).
    """
    Ac = A.to_complex()
    Yc = Y.to_complex()
    if Ac.shape[0] != Yc.shape[0]:
        raise ContractViolation(f"A is {Ac.shape}, Y is {Yc.shape}")
    state = AdmmState.initial(Ac, Yc.shape[1])
    N = Ac.shape[1]
    diag = AdmmDiagnostics()

    for k in range(config.k_max):
        X_new = all_row_updates(state, config)
        state.X = X_new
        state.AXbar = (Ac @ X_new) / N
        Bbar_prev = state.Bbar
        state.Bbar = bbar_update(state, Yc, config)
        state.C = dual_update(state)
        state.k = k + 1

        if not np.isfinite(state.X).all():
            raise DivergenceError(
                f"non-finite iterate at ADMM iteration {k + 1}", iteration=k + 1
            )

        r_norm = np.linalg.norm(state.AXbar - state.Bbar)
        s_norm = config.rho * np.linalg.norm(state.Bbar - Bbar_prev)
        diag.objective.append(group_lasso_objective(Ac, state.X, Yc, config.lam))
        diag.primal_residual.append(r_norm)
        diag.dual_residual.append(s_norm)

        eps_pri = config.eps_abs + config.eps_rel * max(
            np.linalg.norm(state.AXbar), np.linalg.norm(state.Bbar)
        )
        eps_dual = config.eps_abs + config.eps_rel * config.rho * np.linalg.norm(state.C)
        if r_norm < eps_pri and s_norm < eps_dual:
            diag.converged = True
            break

    diag.iterations = state.k
    return ComplexMatrix.from_complex(state.X), diag


def kkt_residuals(A: np.ndarray, X: np.ndarray, Y: np.ndarray, lam: float,
                  zero_tol: float = 1e-9) -> tuple[float, float]:
    """Subgradient stationarity residuals of the GROUP LASSO objective.

    Returns (max over nonzero rows of ||a_n^H (A X - Y) + lam X_n/||X_n||||,
    max over zero rows of max(0, ||a_n^H (A X - Y)|| - lam)).
    """
    G = np.conj(A.T) @ (A @ X - Y)
    row_norms = np.linalg.norm(X, axis=1)
    nonzero = row_norms > zero_tol
    res_nz = 0.0
    if nonzero.any():
        sub = G[nonzero] + lam * X[nonzero] / row_norms[nonzero, None]
        res_nz = float(np.max(np.linalg.norm(sub, axis=1)))
    res_z = 0.0
    if (~nonzero).any():
        res_z = float(np.max(np.maximum(np.linalg.norm(G[~nonzero], axis=1) - lam, 0.0)))
    return res_nz, res_z
