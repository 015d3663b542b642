"""Auto-encoder computation graphs: learnable pilot encoder, unrolled
model-driven decoders and fully connected correction layers.

Everything runs in float64 / complex128 so the V=0 decoders agree with the
reference numpy solvers to near machine precision.  All tensors are batched:
X is (B, N, M) complex, Y is (B, L, M) complex, activity scores are (B, N).
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .spec import AutoEncoderSpec, SpecError


def _to_complex(re: torch.Tensor, im: torch.Tensor) -> torch.Tensor:
    return torch.complex(re, im)


class Encoder(nn.Module):
    """Linear measurement Y = A X + Z with Re(A), Im(A) as the two weight
    matrices; noise is drawn fresh per forward pass unless supplied."""

    def __init__(self, L: int, N: int, sigma2: float, A0: np.ndarray,
                 trainable: bool):
        super().__init__()
        self.L, self.N, self.sigma2 = L, N, sigma2
        re = torch.from_numpy(np.ascontiguousarray(A0.real))
        im = torch.from_numpy(np.ascontiguousarray(A0.imag))
        self.A_re = nn.Parameter(re, requires_grad=trainable)
        self.A_im = nn.Parameter(im, requires_grad=trainable)

    @property
    def A(self) -> torch.Tensor:
        return _to_complex(self.A_re, self.A_im)

    def forward(self, X: torch.Tensor, noise: torch.Tensor = None,
                generator: torch.Generator = None) -> torch.Tensor:
        Y = torch.einsum("ln,bnm->blm", self.A, X)
        if noise is None:
            shape = Y.shape
            scale = math.sqrt(self.sigma2 / 2.0)
            re = torch.randn(shape, dtype=torch.float64, generator=generator)
            im = torch.randn(shape, dtype=torch.float64, generator=generator)
            noise = scale * _to_complex(re, im)
        return Y + noise

    @torch.no_grad()
    def renormalize_columns(self) -> None:
        """Project columns back to the ||a_n|| = sqrt(L) constraint set."""
        norms = (self.A_re**2 + self.A_im**2).sum(0).sqrt()
        scale = math.sqrt(self.L) / norms.clamp_min(1e-300)
        self.A_re.mul_(scale)
        self.A_im.mul_(scale)


class GroupLassoDecoder(nn.Module):
    """U unrolled sharing-form ADMM blocks with tunable lambda, rho > 0."""

    def __init__(self, U: int, lam0: float, rho0: float, trainable: bool):
        super().__init__()
        self.U = U
        self.log_lam = nn.Parameter(torch.tensor(math.log(lam0), dtype=torch.float64),
                                    requires_grad=trainable)
        self.log_rho = nn.Parameter(torch.tensor(math.log(rho0), dtype=torch.float64),
                                    requires_grad=trainable)

    def forward(self, Y: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        lam, rho = self.log_lam.exp(), self.log_rho.exp()
        B, L, M = Y.shape
        N = A.shape[1]
        col_norms2 = (A.conj() * A).sum(0).real              # (N,)
        X = torch.zeros((B, N, M), dtype=Y.dtype)
        Bbar = torch.zeros_like(Y)
        C = torch.zeros_like(Y)
        AXbar = torch.zeros_like(Y)
        Ah = A.conj().transpose(0, 1)
        for _ in range(self.U):
            W = Bbar - AXbar - C
            T = col_norms2[None, :, None] * X + torch.einsum("nl,blm->bnm", Ah, W)
            tnorm = torch.linalg.vector_norm(T, dim=2)
            scale = (1.0 - lam / (rho * tnorm.clamp_min(1e-300))).clamp_min(0.0)
            X = (scale / col_norms2[None, :])[:, :, None] * T
            AXbar = torch.einsum("ln,bnm->blm", A, X) / N
            Bbar = (Y + rho * AXbar + rho * C) / (N + rho)
            C = C + AXbar - Bbar
        return X


class AmpDecoder(nn.Module):
    """U unrolled AMP blocks with a Bernoulli-Gaussian MMSE denoiser and a
    trainable per-device activity prior eps(n) = sigmoid(logit)."""

    def __init__(self, N: int, U: int, eps0: np.ndarray, trainable: bool,
                 tau_floor: float = 1e-12):
        super().__init__()
        self.U, self.tau_floor = U, tau_floor
        logits = torch.from_numpy(np.log(eps0 / (1.0 - eps0)))
        self.eps_logit = nn.Parameter(logits, requires_grad=trainable)

    @property
    def eps(self) -> torch.Tensor:
        return torch.sigmoid(self.eps_logit)

    def forward(self, Y: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        B, L, M = Y.shape
        N = A.shape[1]
        # rescale so the columns have unit norm (the denoiser's unit-variance
        # prior assumes that); the signal estimate keeps its original scale
        A = A / math.sqrt(L)
        Y = Y / math.sqrt(L)
        eps = self.eps
        log_prior = torch.log1p(-eps) - torch.log(eps)       # log((1-eps)/eps)
        Ah = A.conj().transpose(0, 1)
        X = torch.zeros((B, N, M), dtype=Y.dtype)
        R = Y.clone()
        for _ in range(self.U):
            tau = torch.linalg.vector_norm(R.reshape(B, -1), dim=1) * math.sqrt(
                1.0 / (M * L)
            )
            tau = tau.clamp_min(self.tau_floor)              # (B,)
            t2 = (tau * tau)[:, None]                        # (B,1)
            pseudo = torch.einsum("nl,blm->bnm", Ah, R) + X
            norms2 = (pseudo.conj() * pseudo).real.sum(2)    # (B,N)
            log_t = (log_prior[None, :]
                     + M * torch.log((t2 + 1.0) / t2)
                     - norms2 / (t2 * (t2 + 1.0)))
            inv_one_plus_t = torch.sigmoid(-log_t)
            X = pseudo * (inv_one_plus_t / (t2 + 1.0)).unsqueeze(2).to(Y.dtype)
            # Onsager scale: mean over n of the denoiser divergence;
            # t/(1+t)^2 = sigmoid(log t) * sigmoid(-log t)
            t_over = torch.sigmoid(log_t) * inv_one_plus_t
            first = inv_one_plus_t / (t2 + 1.0)
            second = norms2 * t_over / ((t2 + 1.0) ** 2 * t2 * M)
            s = (first + second).mean(1)                     # (B,)
            R = Y - torch.einsum("ln,bnm->blm", A, X) + (N / L) * R * s[
                :, None, None
            ].to(Y.dtype)
        return X


class MapDecoder(nn.Module):
    """U unrolled coordinate-descent sweeps over the relaxed activity cone,
    rank-one inverse updates, trainable eps(n)."""

    def __init__(self, N: int, U: int, eps0: np.ndarray, sigma2: float,
                 trainable: bool, variant: str = "MAP"):
        super().__init__()
        if variant not in ("MAP", "ML"):
            raise SpecError(f"unknown variant {variant!r}")
        self.U, self.sigma2, self.variant = U, sigma2, variant
        logits = torch.from_numpy(np.log(eps0 / (1.0 - eps0)))
        self.eps_logit = nn.Parameter(logits, requires_grad=trainable)

    @property
    def eps(self) -> torch.Tensor:
        return torch.sigmoid(self.eps_logit)

    def forward(self, Y: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        B, L, M = Y.shape
        N = A.shape[1]
        Sigma_hat = Y @ Y.conj().transpose(1, 2) / M         # (B,L,L)
        Sinv = (torch.eye(L, dtype=Y.dtype) / self.sigma2).expand(B, L, L).clone()
        alpha = torch.zeros((B, N), dtype=torch.float64)
        eye_rows = torch.eye(N, dtype=torch.float64)
        eps = self.eps
        for _ in range(self.U):
            for n in range(N):
                a = A[:, n]
                w = Sinv @ a                                  # (B,L)
                q1 = torch.einsum("l,bl->b", a.conj(), w).real
                q2 = torch.einsum("bl,bl->b", w.conj(), torch.einsum(
                    "bij,bj->bi", Sigma_hat, w)).real
                if self.variant == "ML":
                    d = (q2 - q1) / (q1 * q1)
                else:
                    beta = (2.0 / M) * (torch.log(eps[n]) - torch.log1p(-eps[n]))
                    delta = (q1 * q1 * (q1 * q1 - 2.0 * beta * q2)).clamp_min(0.0)
                    d = (q1 * q1 - beta * q1 - torch.sqrt(delta)) / (beta * q1 * q1)
                d = torch.maximum(d, -alpha[:, n])
                denom = 1.0 + d * q1
                d = torch.where(denom > 0.0, d, torch.zeros_like(d))
                denom = 1.0 + d * q1
                alpha = alpha + d[:, None] * eye_rows[n][None, :]
                coef = (d / denom)[:, None, None].to(Y.dtype)
                Sinv = Sinv - coef * torch.einsum("bi,bj->bij", w, w.conj())
        return alpha


class CovarianceDecoder(nn.Module):
    """Feature extractor for the covariance-based design: stacked real and
    imaginary parts of vec(Y Y^H / M), 2 L^2 values per sample (U = 0, the
    whole mapping to scores is learned by the correction layers)."""

    def __init__(self, L: int):
        super().__init__()
        self.L = L

    def forward(self, Y: torch.Tensor, A: torch.Tensor = None) -> torch.Tensor:
        B, L, M = Y.shape
        Sigma_hat = Y @ Y.conj().transpose(1, 2) / M
        # column-major vectorization: entry (i, j) lands at i + L*j
        v = Sigma_hat.transpose(1, 2).reshape(B, L * L)
        return torch.cat([v.real, v.imag], dim=1)


class SignalCorrection(nn.Module):
    """V fully connected layers refining a complex signal estimate.

    Residual form with a zero-initialized output layer, so the untrained
    correction is an exact bypass; the output head is linear.
    """

    def __init__(self, N: int, M: int, V: int, width: int):
        super().__init__()
        self.N, self.M, self.V = N, M, V
        if V == 0:
            self.net = None
            return
        dims = [2 * N * M] + [width] * (V - 1) + [2 * N * M]
        layers = []
        for i in range(V):
            layers.append(nn.Linear(dims[i], dims[i + 1], dtype=torch.float64))
            if i < V - 1:
                layers.append(nn.ReLU())
        nn.init.zeros_(layers[-1].weight)
        nn.init.zeros_(layers[-1].bias)
        self.net = nn.Sequential(*layers)

    def forward(self, X: torch.Tensor) -> torch.Tensor:
        if self.net is None:
            return X
        B = X.shape[0]
        flat = torch.cat([X.real.reshape(B, -1), X.imag.reshape(B, -1)], dim=1)
        out = self.net(flat)
        half = self.N * self.M
        corr = torch.complex(out[:, :half], out[:, half:]).reshape(
            B, self.N, self.M
        )
        return X + corr


class SupportCorrection(nn.Module):
    """V fully connected layers mapping decoder features to activity scores;
    the last layer uses a sigmoid activation.  V = 0 passes features through
    unchanged (diagnostic parity mode)."""

    def __init__(self, in_dim: int, N: int, V: int, width: int):
        super().__init__()
        self.V = V
        if V == 0:
            self.net = None
            return
        dims = [in_dim] + [width] * (V - 1) + [N]
        layers = []
        for i in range(V):
            layers.append(nn.Linear(dims[i], dims[i + 1], dtype=torch.float64))
            layers.append(nn.ReLU() if i < V - 1 else nn.Sigmoid())
        self.net = nn.Sequential(*layers)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        if self.net is None:
            return feats
        return self.net(feats)


class AutoEncoder(nn.Module):
    """Encoder + unrolled decoder + correction layers for one spec."""

    def __init__(self, spec: AutoEncoderSpec, A0: np.ndarray,
                 eps0: np.ndarray = None, lam0: float = 0.1, rho0: float = 1.0):
        super().__init__()
        self.spec = spec
        if A0.shape != (spec.L, spec.N):
            raise SpecError(f"A0 is {A0.shape}, spec needs ({spec.L}, {spec.N})")
        if eps0 is None:
            eps0 = np.full(spec.N, 0.1)
        eps0 = np.clip(np.asarray(eps0, dtype=np.float64), 1e-6, 1 - 1e-6)
        self.encoder = Encoder(spec.L, spec.N, spec.sigma2, A0,
                               trainable="A" in spec.trainable)
        if spec.decoder == "group-lasso":
            self.decoder = GroupLassoDecoder(
                spec.U, lam0, rho0,
                trainable=bool({"lambda", "rho"} & set(spec.trainable)),
            )
        elif spec.decoder == "amp":
            self.decoder = AmpDecoder(spec.N, spec.U, eps0,
                                      trainable="eps" in spec.trainable)
        elif spec.decoder == "map":
            self.decoder = MapDecoder(spec.N, spec.U, eps0, spec.sigma2,
                                      trainable="eps" in spec.trainable)
        else:
            self.decoder = CovarianceDecoder(spec.L)
        if spec.task == "signal":
            self.correction = SignalCorrection(spec.N, spec.M, spec.V,
                                               spec.hidden_width)
        else:
            in_dim = 2 * spec.L**2 if spec.decoder == "covariance" else spec.N
            self.correction = SupportCorrection(in_dim, spec.N, spec.V,
                                                spec.hidden_width)

    def decode(self, Y: torch.Tensor) -> torch.Tensor:
        out = self.decoder(Y, self.encoder.A)
        return self.correction(out)

    def forward(self, X: torch.Tensor, noise: torch.Tensor = None,
                generator: torch.Generator = None) -> torch.Tensor:
        return self.decode(self.encoder(X, noise=noise, generator=generator))


def build_autoencoder(spec: AutoEncoderSpec, A0: np.ndarray,
                      eps0: np.ndarray = None, lam0: float = 0.1,
                      rho0: float = 1.0) -> AutoEncoder:
    return AutoEncoder(spec, A0, eps0=eps0, lam0=lam0, rho0=rho0)


def mse_loss(X_true: torch.Tensor, X_hat: torch.Tensor) -> torch.Tensor:
    """(1/(M N I)) sum of squared deviations over the batch."""
    diff = X_hat - X_true
    B, N, M = X_true.shape
    return (diff.conj() * diff).real.sum() / (M * N * B)


def bce_loss(alpha: torch.Tensor, alpha_hat: torch.Tensor,
             clamp: float = 1e-12) -> torch.Tensor:
    """Binary cross-entropy over devices and samples."""
    p = alpha_hat.clamp(clamp, 1.0 - clamp)
    return -(alpha * torch.log(p) + (1.0 - alpha) * torch.log1p(-p)).mean()
