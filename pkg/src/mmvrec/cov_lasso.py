"""Covariance-based support recovery via a nonnegative SMV LASSO.

Lifts the measurements to the vectorized sample covariance
vec(Y Y^H / M) = (A* Khatri-Rao A) r + vec(E1) + vec(E2) with
r(n) = ||X_{n,:}||^2 / M, stacks real and imaginary parts into a real system
and solves min (1/2)||Phi r - b||^2 + lambda ||r||_1 s.t. r >= 0 by
coordinate descent.  r is a power vector, so the nonnegativity constraint
only shrinks the feasible set toward the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .complexmat import ComplexMatrix
from .errors import ContractViolation, NonConvergenceError
from .map_detect import empirical_covariance


@dataclass(frozen=True)
class CovarianceSystem:
    """Real-stacked lifted system: b (2L^2,), Phi (2L^2, N)."""

    b: np.ndarray
    Phi: np.ndarray
    N: int
    L: int
    M: int


def khatri_rao_lift(A: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker lift: column n = conj(a_n) kron a_n (L^2 x N)."""
    L, N = A.shape
    # entry at row i + L*j of column n is a(i,n) * conj(a(j,n)) = vec(a_n a_n^H)
    return (A[:, None, :] * np.conj(A)[None, :, :]).reshape(L * L, N, order="F")


def build_system(Y: ComplexMatrix, A: ComplexMatrix) -> CovarianceSystem:
    """Assemble b = stacked vec(Y Y^H / M) and Phi = stacked A* Khatri-Rao A."""
    Ac = A.to_complex()
    if Ac.shape[0] != Y.rows:
        raise ContractViolation(f"A is {Ac.shape}, Y is {Y.shape}")
    L, N = Ac.shape
    Sigma_hat = empirical_covariance(Y).to_complex()
    b_c = Sigma_hat.reshape(-1, order="F")   # column vectorization
    Phi_c = khatri_rao_lift(Ac)
    b = np.concatenate([np.real(b_c), np.imag(b_c)])
    Phi = np.vstack([np.real(Phi_c), np.imag(Phi_c)])
    return CovarianceSystem(b=b, Phi=np.ascontiguousarray(Phi), N=N, L=L, M=Y.cols)


def residual_terms(Y: ComplexMatrix, A: ComplexMatrix, X: ComplexMatrix,
                   Z: ComplexMatrix, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth lift error terms (diagnostic use only).

    E1 = A offdiag(X X^H / M) A^H captures cross-row interference;
    E2 = (A X Z^H + Z X^H A^H + Z Z^H) / M is the noise contribution, so
    Y Y^H / M = A diag(r) A^H + E1 + E2 exactly.
    """
    Ac, Xc, Zc = A.to_complex(), X.to_complex(), Z.to_complex()
    G = Xc @ np.conj(Xc.T) / M
    np.fill_diagonal(G, 0.0)
    E1 = Ac @ G @ np.conj(Ac.T)
    AX = Ac @ Xc
    E2 = (AX @ np.conj(Zc.T) + Zc @ np.conj(AX.T) + Zc @ np.conj(Zc.T)) / M
    return E1, E2


@njit(cache=True)
def _cd_kernel(Phi, b, lam, r, max_sweeps, tol):
    n_rows, N = Phi.shape
    resid = b - Phi @ r
    col_norms2 = np.empty(N)
    for n in range(N):
        s = 0.0
        for i in range(n_rows):
            s += Phi[i, n] * Phi[i, n]
        col_norms2[n] = s
    sweeps = 0
    for _ in range(max_sweeps):
        max_change = 0.0
        for n in range(N):
            if col_norms2[n] == 0.0:
                continue
            g = 0.0
            for i in range(n_rows):
                g += Phi[i, n] * resid[i]
            new = (g + col_norms2[n] * r[n] - lam) / col_norms2[n]
            if new < 0.0:
                new = 0.0
            d = new - r[n]
            if d != 0.0:
                for i in range(n_rows):
                    resid[i] -= d * Phi[i, n]
                r[n] = new
            if abs(d) > max_change:
                max_change = abs(d)
        sweeps += 1
        if max_change < tol:
            break
    return sweeps


def kkt_residual(system: CovarianceSystem, r: np.ndarray, lam: float) -> float:
    """Max violation of the nonnegative-LASSO optimality conditions."""
    g = system.Phi.T @ (system.Phi @ r - system.b) + lam
    positive = r > 0
    res = 0.0
    if positive.any():
        res = float(np.max(np.abs(g[positive])))
    if (~positive).any():
        res = max(res, float(np.max(np.maximum(-g[~positive], 0.0))))
    return res


def solve_nn_lasso(system: CovarianceSystem, lam: float, max_sweeps: int = 200,
                   kkt_tol: float = 1e-6, coord_tol: float = 1e-12) -> np.ndarray:
    """Coordinate-descent minimizer of the nonnegative LASSO.

    Returns the nonnegative score vector r_hat; raises
    :class:`NonConvergenceError` (with the residual attached) if the KKT
    conditions are not met within ``kkt_tol`` after ``max_sweeps`` sweeps.
    """
    if lam < 0:
        raise ContractViolation("lambda must be nonnegative")
    r = np.zeros(system.N)
    _cd_kernel(system.Phi, system.b, lam, r, max_sweeps, coord_tol)
    res = kkt_residual(system, r, lam)
    if res > kkt_tol:
        raise NonConvergenceError(
            f"nonnegative LASSO: KKT residual {res:.3e} after {max_sweeps} sweeps",
            residual=res,
        )
    return r


def solve_cov_lasso(Y: ComplexMatrix, A: ComplexMatrix, lam: float,
                    max_sweeps: int = 200, kkt_tol: float = 1e-6,
                    subtract_noise: bool = False,
                    sigma2: float = 0.0) -> np.ndarray:
    """build_system + solve_nn_lasso in one call.

    With ``subtract_noise`` the known sigma2 * vec(I) component of the noise
    term is removed from b before solving.
    """
    system = build_system(Y, A)
    if subtract_noise:
        b = system.b.copy()
        eye = np.eye(system.L).reshape(-1, order="F") * sigma2
        b[: system.L ** 2] -= eye
        system = CovarianceSystem(b=b, Phi=system.Phi, N=system.N,
                                  L=system.L, M=system.M)
    return solve_nn_lasso(system, lam, max_sweeps=max_sweeps, kkt_tol=kkt_tol)
