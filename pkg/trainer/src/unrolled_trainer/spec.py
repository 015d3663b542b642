"""Configuration types for the auto-encoder designs."""

from __future__ import annotations

from dataclasses import dataclass, field

DECODERS = ("group-lasso", "amp", "map", "covariance")
TASKS = ("signal", "support")
DEFAULT_U = {"group-lasso": 200, "amp": 50, "map": 55, "covariance": 0}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class AutoEncoderSpec:
    """Architecture of one auto-encoder: task, decoder family and sizes.

    U counts unrolled algorithm blocks, V counts fully connected correction
    layers.  V=0 is a diagnostic mode (pure unrolled algorithm, used by the
    parity checks); training requires V >= 1.  ``trainable`` selects which
    of {"A", "lambda", "rho", "eps"} receive gradients.
    """

    task: str
    decoder: str
    N: int
    M: int
    L: int
    sigma2: float = 0.1
    U: int = -1                  # -1 picks the decoder's default budget
    V: int = 3
    trainable: tuple = ("A",)
    hidden_width: int = 0        # 0 picks 4*N

    def __post_init__(self):
        if self.task not in TASKS:
            raise SpecError(f"unknown task {self.task!r}")
        if self.decoder not in DECODERS:
            raise SpecError(f"unknown decoder {self.decoder!r}")
        if self.decoder in ("group-lasso", "amp") and self.task != "signal":
            raise SpecError(f"{self.decoder} decoder produces a signal estimate")
        if self.decoder in ("map", "covariance") and self.task != "support":
            raise SpecError(f"{self.decoder} decoder produces activity scores")
        if self.U == -1:
            object.__setattr__(self, "U", DEFAULT_U[self.decoder])
        if self.decoder == "covariance" and self.U != 0:
            raise SpecError("the covariance decoder has no unrolled part (U=0)")
        if self.U < 0 or self.V < 0:
            raise SpecError("U and V must be nonnegative")
        if min(self.N, self.M, self.L) < 1 or self.sigma2 <= 0:
            raise SpecError("N, M, L must be positive and sigma2 > 0")
        bad = set(self.trainable) - {"A", "lambda", "rho", "eps"}
        if bad:
            raise SpecError(f"unknown trainable parameters {sorted(bad)}")
        object.__setattr__(self, "trainable", tuple(self.trainable))
        if self.hidden_width == 0:
            object.__setattr__(self, "hidden_width", 4 * self.N)


@dataclass(frozen=True)
class TrainRun:
    """Training budget and early stopping."""

    train_size: int = 9000
    val_size: int = 1000
    test_size: int = 1000
    learning_rate: float = 1e-4
    correction_lr: float = 0.0   # 0 means: use learning_rate
    batch_size: int = 32
    epoch_cap: int = 1000        # desk-scale default; raise for full runs
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        sizes = (self.train_size, self.val_size, self.test_size,
                 self.batch_size, self.epoch_cap, self.patience)
        if any(s < 1 for s in sizes) or self.learning_rate <= 0:
            raise SpecError("all training-run fields must be positive")
        if self.correction_lr < 0:
            raise SpecError("correction_lr must be nonnegative")
