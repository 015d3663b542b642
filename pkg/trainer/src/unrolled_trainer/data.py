"""Scenario sampling for training: two-group activity, CN(0,1) channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class TwoGroupScenario:
    """First N/2 devices access with probability p1, the rest with p2."""

    N: int
    M: int
    L: int
    sigma2: float
    p1: float
    p2: float

    def __post_init__(self):
        if self.N % 2 != 0:
            raise ValueError("two-group scenario requires even N")
        for p in (self.p1, self.p2):
            if not 0.0 <= p <= 1.0:
                raise ValueError("access probabilities must lie in [0, 1]")

    @property
    def probs(self) -> np.ndarray:
        half = self.N // 2
        return np.concatenate([np.full(half, self.p1), np.full(half, self.p2)])


def sample_batch(scenario: TwoGroupScenario, batch: int,
                 rng: np.random.Generator):
    """Draw (alpha, X) for one batch; X rows are unit-variance CN(0,1)."""
    alpha = (rng.random((batch, scenario.N)) < scenario.probs).astype(np.float64)
    X = (rng.standard_normal((batch, scenario.N, scenario.M))
         + 1j * rng.standard_normal((batch, scenario.N, scenario.M))) / np.sqrt(2)
    X = X * alpha[:, :, None]
    return (torch.from_numpy(alpha),
            torch.from_numpy(X).to(torch.complex128))


def sample_noise(scenario: TwoGroupScenario, batch: int,
                 rng: np.random.Generator) -> torch.Tensor:
    Z = (rng.standard_normal((batch, scenario.L, scenario.M))
         + 1j * rng.standard_normal((batch, scenario.L, scenario.M)))
    Z *= np.sqrt(scenario.sigma2 / 2.0)
    return torch.from_numpy(Z).to(torch.complex128)
