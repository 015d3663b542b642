"""Activity models, channel generation and the noisy linear measurement process.

Everything here is a pure function of (parameters, seed): the same seed gives
bit-identical output, which is what makes parallel sweeps reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .complexmat import ComplexMatrix, complex_matmul
from .errors import ContractViolation


# --------------------------------------------------------------------------
# activity models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IndependentTwoGroup:
    """Two equal halves with independent per-device access probabilities."""

    N: int
    p1: float
    p2: float

    def __post_init__(self):
        if self.N % 2 != 0:
            raise ContractViolation("IndependentTwoGroup requires even N")
        for p in (self.p1, self.p2):
            if not 0.0 <= p <= 1.0:
                raise ContractViolation(f"access probability {p} outside [0, 1]")

    @property
    def mean_access_probability(self) -> float:
        return 0.5 * (self.p1 + self.p2)


@dataclass(frozen=True)
class SingleActiveGroup:
    """G contiguous groups; exactly one group active, chosen uniformly."""

    N: int
    G: int

    def __post_init__(self):
        _check_groups(self.N, self.G)

    @property
    def mean_access_probability(self) -> float:
        return 1.0 / self.G


@dataclass(frozen=True)
class IidGroupActivity:
    """G contiguous groups, each active independently with probability p."""

    N: int
    G: int
    p: float

    def __post_init__(self):
        _check_groups(self.N, self.G)
        if not 0.0 <= self.p <= 1.0:
            raise ContractViolation(f"group access probability {self.p} outside [0, 1]")

    @property
    def mean_access_probability(self) -> float:
        return self.p


def _check_groups(N, G):
    if G < 1 or N % G != 0:
        raise ContractViolation(f"group count {G} must divide N={N}")


ActivityModel = Union[IndependentTwoGroup, SingleActiveGroup, IidGroupActivity]


def draw_support(model: ActivityModel, rng: np.random.Generator) -> np.ndarray:
    """Draw a binary activity vector alpha of length N under the model's law.

    Group layout for the correlated variants: group g owns the contiguous
    index block [g*N/G, (g+1)*N/G).
    """
    if isinstance(model, IndependentTwoGroup):
        half = model.N // 2
        alpha = np.empty(model.N, dtype=np.int64)
        alpha[:half] = rng.random(half) < model.p1
        alpha[half:] = rng.random(half) < model.p2
        return alpha
    if isinstance(model, SingleActiveGroup):
        size = model.N // model.G
        g = rng.integers(model.G)
        alpha = np.zeros(model.N, dtype=np.int64)
        alpha[g * size : (g + 1) * size] = 1
        return alpha
    if isinstance(model, IidGroupActivity):
        size = model.N // model.G
        active = rng.random(model.G) < model.p
        return np.repeat(active.astype(np.int64), size)
    raise ContractViolation(f"unknown activity model {model!r}")


# --------------------------------------------------------------------------
# signal / measurement generation
# --------------------------------------------------------------------------

def draw_signal(alpha: np.ndarray, M: int, rng: np.random.Generator) -> ComplexMatrix:
    """N x M jointly sparse signal: row n = alpha(n) * h_n with h ~ CN(0, 1)."""
    alpha = np.asarray(alpha)
    if not np.isin(alpha, (0, 1)).all():
        raise ContractViolation("alpha must be binary")
    N = alpha.shape[0]
    scale = np.sqrt(0.5)
    re = rng.normal(0.0, scale, size=(N, M))
    im = rng.normal(0.0, scale, size=(N, M))
    mask = alpha.astype(np.float64)[:, None]
    return ComplexMatrix(re * mask, im * mask)


def measure(A: ComplexMatrix, X: ComplexMatrix, sigma2: float,
            rng: np.random.Generator) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Y = A X + Z with Z entries i.i.d. CN(0, sigma2); returns (Y, Z)."""
    if sigma2 < 0:
        raise ContractViolation("sigma2 must be nonnegative")
    AX = complex_matmul(A, X)
    scale = np.sqrt(sigma2 / 2.0)
    shape = (A.rows, X.cols)
    Z = ComplexMatrix(rng.normal(0.0, 1.0, shape) * scale,
                      rng.normal(0.0, 1.0, shape) * scale)
    Y = ComplexMatrix(AX.re + Z.re, AX.im + Z.im)
    return Y, Z


def gaussian_pilots(L: int, N: int, normalize: bool,
                    rng: np.random.Generator) -> ComplexMatrix:
    """L x N pilot matrix with i.i.d. CN(0,1) entries.

    With ``normalize`` each column is rescaled to exact Euclidean norm
    sqrt(L), the constraint used for trained pilots.
    """
    if L < 1 or N < 1:
        raise ContractViolation("pilot dimensions must be positive")
    scale = np.sqrt(0.5)
    z = rng.normal(0.0, scale, (L, N)) + 1j * rng.normal(0.0, scale, (L, N))
    if normalize:
        norms = np.linalg.norm(z, axis=0)
        z = z * (np.sqrt(L) / norms)
    return ComplexMatrix.from_complex(z)


# --------------------------------------------------------------------------
# problem instances
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    """One trial: measurement matrix, ground truth, measurements and its seed."""

    A: ComplexMatrix
    X: ComplexMatrix
    Y: ComplexMatrix
    alpha: np.ndarray
    sigma2: float
    seed: int


def derive_seed(root_seed: int, *indices: int) -> int:
    """Deterministic 64-bit child seed for (root, index path)."""
    ss = np.random.SeedSequence([int(root_seed) & (2**63 - 1), *map(int, indices)])
    return int(ss.generate_state(1, np.uint64)[0])


def make_instance(A: ComplexMatrix, model: ActivityModel, M: int,
                  sigma2: float, seed: int) -> ProblemInstance:
    """Generate (alpha, X, Y) from the seed; same seed reproduces bit-exactly."""
    rng = np.random.default_rng(seed)
    alpha = draw_support(model, rng)
    X = draw_signal(alpha, M, rng)
    Y, _ = measure(A, X, sigma2, rng)
    return ProblemInstance(A=A, X=X, Y=Y, alpha=alpha, sigma2=sigma2, seed=int(seed))


def regenerate_noise(instance: ProblemInstance, model: ActivityModel) -> ComplexMatrix:
    """Re-derive the stored instance's noise realization Z from its seed."""
    rng = np.random.default_rng(instance.seed)
    alpha = draw_support(model, rng)
    X = draw_signal(alpha, instance.X.cols, rng)
    _, Z = measure(instance.A, X, instance.sigma2, rng)
    return Z
