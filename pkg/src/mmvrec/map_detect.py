"""Coordinate-descent MAP/ML support estimation on the sample covariance.

Minimizes log|A diag(alpha) A^H + sigma^2 I| + tr((.)^{-1} Sigma_hat) plus,
for the MAP variant, the Bernoulli prior term
-(1/M) sum_n (alpha(n) log eps(n) + (1-alpha(n)) log(1-eps(n))),
over the relaxed cone alpha >= 0, one coordinate at a time.  The covariance
inverse is maintained by Sherman-Morrison rank-one updates and periodically
verified against (and if drifted, rebuilt by) direct inversion.

Sweeps run inside a numba kernel; the per-coordinate update is also exposed
as a plain-numpy operation for oracle tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .complexmat import ComplexMatrix
from .errors import ContractViolation, EvaluationError


@dataclass(frozen=True)
class MapConfig:
    eps: np.ndarray          # length-N priors in (0,1); ignored by ML
    sigma2: float = 0.1
    k_max: int = 55          # outer sweep cap
    variant: str = "MAP"     # "MAP" or "ML"
    tol: float = 1e-6        # max coordinate change to stop sweeping
    drift_interval: int = 50  # coordinate steps between inverse checks
    drift_tol: float = 1e-6

    def __post_init__(self):
        if self.variant not in ("MAP", "ML"):
            raise ContractViolation(f"unknown variant {self.variant!r}")
        eps = np.asarray(self.eps, dtype=np.float64)
        if np.any(eps <= 0.0) or np.any(eps >= 1.0):
            raise ContractViolation("priors must lie strictly in (0, 1)")
        if self.variant == "MAP" and np.any(np.abs(eps - 0.5) < 1e-6):
            # the MAP update divides by log(eps/(1-eps)); use the ML variant there
            raise ContractViolation("MAP variant requires |eps - 1/2| >= 1e-6")
        if self.sigma2 <= 0:
            raise ContractViolation("sigma2 must be positive")
        if self.k_max < 1:
            raise ContractViolation("k_max must be at least 1")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def uniform(cls, N: int, p: float, **kw) -> "MapConfig":
        return cls(eps=np.full(N, p), **kw)


@dataclass
class MapState:
    alpha: np.ndarray       # length-N relaxed activities, >= 0
    Sinv: np.ndarray        # L x L inverse of (sigma2 I + A diag(alpha) A^H)
    Sigma_hat: np.ndarray   # L x L sample covariance Y Y^H / M
    M: int
    k: int = 0
    steps: int = 0
    delta_clamps: int = 0
    rejected_steps: int = 0
    rebuilds: int = 0

    @classmethod
    def initial(cls, Sigma_hat: np.ndarray, N: int, M: int, sigma2: float) -> "MapState":
        L = Sigma_hat.shape[0]
        return cls(
            alpha=np.zeros(N),
            Sinv=np.eye(L, dtype=np.complex128) / sigma2,
            Sigma_hat=Sigma_hat,
            M=M,
        )


def empirical_covariance(Y: ComplexMatrix) -> ComplexMatrix:
    """Sample covariance Y Y^H / M via the split real/imag formulas."""
    M = Y.cols
    if M < 1:
        raise ContractViolation("need at least one column")
    re = (Y.re @ Y.re.T + Y.im @ Y.im.T) / M
    im = (Y.im @ Y.re.T - Y.re @ Y.im.T) / M
    return ComplexMatrix(re, im)


def _map_step_scalars(q1, q2, alpha_n, eps_n, M, variant_ml):
    """Closed-form coordinate minimizer d, floored at -alpha_n.

    Returns (d, delta_clamped).  ML uses the eps -> 1/2 limit of the MAP
    closed form.
    """
    if variant_ml:
        return max((q2 - q1) / (q1 * q1), -alpha_n), False
    beta = (2.0 / M) * np.log(eps_n / (1.0 - eps_n))
    delta = q1 * q1 * (q1 * q1 - 2.0 * beta * q2)
    clamped = delta < 0.0
    if clamped:
        delta = 0.0
    d = (q1 * q1 - beta * q1 - np.sqrt(delta)) / (beta * q1 * q1)
    return max(d, -alpha_n), clamped


def coordinate_step(state: MapState, n: int, A: np.ndarray,
                    config: MapConfig) -> float:
    """One coordinate update of alpha(n) with a Sherman-Morrison Sinv update.

    Mutates ``state`` in place and returns the applied step d(n).  A step
    whose rank-one denominator 1 + d a^H Sinv a is nonpositive is rejected
    (d forced to 0) and counted.
    """
    a = A[:, n]
    w = state.Sinv @ a
    q1 = float(np.real(np.vdot(a, w)))
    q2 = float(np.real(np.vdot(w, state.Sigma_hat @ w)))
    d, clamped = _map_step_scalars(
        q1, q2, state.alpha[n], config.eps[n], state.M, config.variant == "ML"
    )
    if clamped:
        state.delta_clamps += 1
    denom = 1.0 + d * q1
    if denom <= 0.0:
        state.rejected_steps += 1
        d = 0.0
    if d != 0.0:
        state.alpha[n] += d
        state.Sinv = state.Sinv - (d / denom) * np.outer(w, np.conj(w))
    state.steps += 1
    return d


def f_map(alpha: np.ndarray, A: np.ndarray, Sigma_hat: np.ndarray,
          config: MapConfig, M: int) -> float:
    """Relaxed objective (prior term included only for the MAP variant)."""
    L = A.shape[0]
    Sigma = config.sigma2 * np.eye(L, dtype=np.complex128) + (A * alpha) @ np.conj(A.T)
    sign, logdet = np.linalg.slogdet(Sigma)
    if sign.real <= 0:
        raise EvaluationError("covariance model matrix is not positive definite")
    try:
        trace_term = float(np.real(np.trace(np.linalg.solve(Sigma, Sigma_hat))))
    except np.linalg.LinAlgError as exc:
        raise EvaluationError("singular covariance model matrix") from exc
    value = float(logdet.real) + trace_term
    if config.variant == "MAP":
        value -= float(
            np.sum(alpha * np.log(config.eps) + (1.0 - alpha) * np.log(1.0 - config.eps))
        ) / M
    return value


@njit(cache=True)
def _sweep_kernel(A, Sinv, Sigma_hat, alpha, eps, sigma2, M, variant_ml,
                  n_sweeps, tol, drift_interval, drift_tol, steps_start):
    L, N = A.shape
    steps = steps_start
    rebuilds = 0
    delta_clamps = 0
    rejected = 0
    sweeps_done = 0
    last_change = np.inf
    for _ in range(n_sweeps):
        max_change = 0.0
        for n in range(N):
            a = np.ascontiguousarray(A[:, n])
            w = Sinv @ a
            q1 = 0.0
            for l in range(L):
                q1 += (np.conj(a[l]) * w[l]).real
            v = Sigma_hat @ w
            q2 = 0.0
            for l in range(L):
                q2 += (np.conj(w[l]) * v[l]).real
            if variant_ml:
                d = (q2 - q1) / (q1 * q1)
            else:
                beta = (2.0 / M) * np.log(eps[n] / (1.0 - eps[n]))
                delta = q1 * q1 * (q1 * q1 - 2.0 * beta * q2)
                if delta < 0.0:
                    delta = 0.0
                    delta_clamps += 1
                d = (q1 * q1 - beta * q1 - np.sqrt(delta)) / (beta * q1 * q1)
            if d < -alpha[n]:
                d = -alpha[n]
            denom = 1.0 + d * q1
            if denom <= 0.0:
                rejected += 1
                d = 0.0
            if d != 0.0:
                alpha[n] += d
                coef = d / denom
                for i in range(L):
                    wi = coef * w[i]
                    for j in range(L):
                        Sinv[i, j] -= wi * np.conj(w[j])
            if abs(d) > max_change:
                max_change = abs(d)
            steps += 1
            if steps % drift_interval == 0:
                # verify Sinv against the matrix it should invert; rebuild on drift
                Sigma = (A * alpha) @ np.conj(A.T)
                for i in range(L):
                    Sigma[i, i] += sigma2
                P = Sinv @ Sigma
                drift = 0.0
                for i in range(L):
                    for j in range(L):
                        e = P[i, j] - (1.0 + 0.0j if i == j else 0.0 + 0.0j)
                        drift += (e * np.conj(e)).real
                if np.sqrt(drift) >= drift_tol:
                    Sinv[:, :] = np.linalg.inv(Sigma)
                    rebuilds += 1
        sweeps_done += 1
        last_change = max_change
        if max_change < tol:
            break
    return sweeps_done, steps, rebuilds, delta_clamps, rejected, last_change


@dataclass
class MapDiagnostics:
    sweeps: int = 0
    objective: list = field(default_factory=list)
    rebuilds: int = 0
    delta_clamps: int = 0
    rejected_steps: int = 0
    converged: bool = False


def solve_map(Y: ComplexMatrix, A: ComplexMatrix, config: MapConfig,
              record_objective: bool = False) -> tuple[np.ndarray, MapDiagnostics]:
    """Full coordinate sweeps n=1..N until k_max or max change < tol.

    Returns the relaxed alpha as soft activity scores (threshold them with
    :mod:`mmvrec.metrics`).  With ``record_objective`` the relaxed objective
    is evaluated after every sweep (slower; used by monotonicity checks).
    """
    Ac = np.ascontiguousarray(A.to_complex())
    N = Ac.shape[1]
    if config.eps.shape[0] != N:
        raise ContractViolation(f"eps has length {config.eps.shape[0]}, expected {N}")
    Sigma_hat = np.ascontiguousarray(empirical_covariance(Y).to_complex())
    M = Y.cols
    state = MapState.initial(Sigma_hat, N, M, config.sigma2)
    diag = MapDiagnostics()
    variant_ml = config.variant == "ML"

    sweeps_at_once = 1 if record_objective else config.k_max
    steps = 0
    while diag.sweeps < config.k_max:
        requested = min(sweeps_at_once, config.k_max - diag.sweeps)
        done, steps, rb, dc, rj, last_change = _sweep_kernel(
            Ac, state.Sinv, Sigma_hat, state.alpha, config.eps,
            config.sigma2, M, variant_ml, requested,
            config.tol, config.drift_interval, config.drift_tol, steps,
        )
        diag.sweeps += done
        diag.rebuilds += rb
        diag.delta_clamps += dc
        diag.rejected_steps += rj
        if record_objective:
            diag.objective.append(f_map(state.alpha, Ac, Sigma_hat, config, M))
        if last_change < config.tol:
            diag.converged = True
            break
        if done == requested and not record_objective:
            break
    state.k = diag.sweeps
    return state.alpha, diag


def mmse_given_support(Y: ComplexMatrix, A: ComplexMatrix, alpha_hat: np.ndarray,
                       sigma2: float) -> ComplexMatrix:
    """MMSE channel estimate on a detected support; off-support rows are zero.

    X_hat = Gamma A^H (A Gamma A^H + sigma2 I)^{-1} Y with Gamma = diag(alpha_hat).
    """
    alpha_hat = np.asarray(alpha_hat)
    if not np.isin(alpha_hat, (0, 1)).all():
        raise ContractViolation("alpha_hat must be binary")
    Ac = A.to_complex()
    Yc = Y.to_complex()
    L = Ac.shape[0]
    X_hat = np.zeros((Ac.shape[1], Yc.shape[1]), dtype=np.complex128)
    support = np.flatnonzero(alpha_hat)
    if support.size:
        As = Ac[:, support]
        K = As @ np.conj(As.T) + sigma2 * np.eye(L, dtype=np.complex128)
        X_hat[support] = np.conj(As.T) @ np.linalg.solve(K, Yc)
    return ComplexMatrix.from_complex(X_hat)
