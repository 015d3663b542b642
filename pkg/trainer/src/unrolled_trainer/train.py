"""ADAM training with the pilot-norm projection and flat-validation early
stopping, plus threshold calibration for the support task."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from mmvrec.metrics import calibrate_threshold

from .data import TwoGroupScenario, sample_batch, sample_noise
from .model import AutoEncoder, bce_loss, mse_loss
from .spec import SpecError, TrainRun


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainResult:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    epochs: int = 0
    stopped_early: bool = False
    gamma_star: float = float("nan")
    test_loss: float = float("nan")


def _loss_fn(model: AutoEncoder):
    return mse_loss if model.spec.task == "signal" else bce_loss


def _epoch_batches(size: int, batch: int):
    for start in range(0, size, batch):
        yield min(batch, size - start)


@torch.no_grad()
def evaluate(model: AutoEncoder, scenario: TwoGroupScenario, size: int,
             rng: np.random.Generator, batch: int = 64) -> float:
    """Average loss on freshly sampled data (noise included)."""
    loss_fn = _loss_fn(model)
    total, count = 0.0, 0
    for b in _epoch_batches(size, batch):
        alpha, X = sample_batch(scenario, b, rng)
        Z = sample_noise(scenario, b, rng)
        out = model(X, noise=Z)
        target = X if model.spec.task == "signal" else alpha
        total += float(loss_fn(target, out)) * b
        count += b
    return total / count


def train(model: AutoEncoder, scenario: TwoGroupScenario,
          run: TrainRun) -> TrainResult:
    """Minimize the task loss with ADAM; early-stop when the validation loss
    has not improved for ``patience`` epochs; renormalize pilot columns to
    sqrt(L) after every step while A is trainable."""
    if model.spec.V < 1:
        raise SpecError("training requires at least one correction layer")
    corr_ids = {id(p) for p in model.correction.parameters()}
    algo = [p for p in model.parameters()
            if p.requires_grad and id(p) not in corr_ids]
    corr = [p for p in model.correction.parameters() if p.requires_grad]
    if not algo and not corr:
        raise SpecError("nothing to train: spec.trainable selects no parameters")
    groups = []
    if algo:
        groups.append({"params": algo, "lr": run.learning_rate})
    if corr:
        groups.append({"params": corr,
                       "lr": run.correction_lr or run.learning_rate})
    opt = torch.optim.Adam(groups)
    loss_fn = _loss_fn(model)
    project = model.encoder.A_re.requires_grad

    result = TrainResult()
    rng_train = np.random.default_rng(run.seed)
    best_val, best_state, flat = np.inf, None, 0
    for epoch in range(run.epoch_cap):
        model.train()
        epoch_loss, count = 0.0, 0
        for b in _epoch_batches(run.train_size, run.batch_size):
            alpha, X = sample_batch(scenario, b, rng_train)
            Z = sample_noise(scenario, b, rng_train)
            out = model(X, noise=Z)
            target = X if model.spec.task == "signal" else alpha
            loss = loss_fn(target, out)
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch)
            opt.zero_grad()
            loss.backward()
            opt.step()
            if project:
                model.encoder.renormalize_columns()
            epoch_loss += float(loss.detach()) * b
            count += b
        result.train_loss.append(epoch_loss / count)

        model.eval()
        val = evaluate(model, scenario, run.val_size,
                       np.random.default_rng(run.seed + 1))
        result.val_loss.append(val)
        result.epochs = epoch + 1
        if val < best_val - 1e-12:
            best_val, flat = val, 0
            best_state = {k: v.detach().clone()
                          for k, v in model.state_dict().items()}
        else:
            flat += 1
            if flat >= run.patience:
                result.stopped_early = True
                break
    if best_state is not None:
        model.load_state_dict(best_state)

    model.eval()
    rng_test = np.random.default_rng(run.seed + 2)
    result.test_loss = evaluate(model, scenario, run.test_size, rng_test)
    if model.spec.task == "support":
        result.gamma_star = calibrate_gamma(model, scenario, run)
    return result


@torch.no_grad()
def calibrate_gamma(model: AutoEncoder, scenario: TwoGroupScenario,
                    run: TrainRun, size: int = 256) -> float:
    """Pick the error-rate-optimal hard threshold on training-side samples."""
    rng = np.random.default_rng(run.seed + 3)
    scores, truths = [], []
    for b in _epoch_batches(size, 64):
        alpha, X = sample_batch(scenario, b, rng)
        Z = sample_noise(scenario, b, rng)
        out = model(X, noise=Z)
        scores.extend(np.asarray(out))
        truths.extend(np.asarray(alpha).astype(int))
    return float(calibrate_threshold(scores, truths).gamma_star)
