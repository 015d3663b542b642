"""Cross-implementation parity: V=0 unrolled decoders vs the reference
numpy solvers, on identical instances through the interchange contract."""

from __future__ import annotations

import numpy as np
import torch

from mmvrec.amp import AmpConfig, solve_amp
from mmvrec.cov_lasso import build_system
from mmvrec.group_lasso import AdmmConfig, solve_group_lasso
from mmvrec.map_detect import MapConfig, solve_map
from mmvrec.sampling import IndependentTwoGroup, derive_seed, make_instance
from mmvrec.complexmat import ComplexMatrix

from .data import TwoGroupScenario
from .model import build_autoencoder
from .spec import AutoEncoderSpec


def _instances(spec, scenario, count, seed):
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((spec.L, spec.N))
         + 1j * rng.standard_normal((spec.L, spec.N))) / np.sqrt(2)
    A *= np.sqrt(spec.L) / np.linalg.norm(A, axis=0)
    A_cm = ComplexMatrix(A.real.copy(), A.imag.copy())
    model = IndependentTwoGroup(N=spec.N, p1=scenario.p1, p2=scenario.p2)
    insts = [make_instance(A_cm, model, spec.M, spec.sigma2,
                           derive_seed(seed, t)) for t in range(count)]
    return A, A_cm, insts


def _reference_output(spec, inst, eps, lam, rho):
    if spec.decoder == "group-lasso":
        cfg = AdmmConfig(lam=lam, rho=rho, k_max=spec.U,
                         eps_abs=1e-300, eps_rel=1e-300)
        X, _ = solve_group_lasso(inst.Y, inst.A, cfg)
        return X.to_complex()
    if spec.decoder == "amp":
        cfg = AmpConfig(eps=eps, k_max=spec.U, rel_tol=0.0)
        X, _ = solve_amp(inst.Y, inst.A, cfg)
        return X.to_complex()
    if spec.decoder == "map":
        cfg = MapConfig(eps=eps, sigma2=spec.sigma2, k_max=spec.U, tol=0.0)
        alpha, _ = solve_map(inst.Y, inst.A, cfg)
        return alpha
    # covariance: U=0, the unrolled part is the lifted feature vector, which
    # must match the reference system's right-hand side
    return build_system(inst.Y, inst.A).b


def parity_report(spec: AutoEncoderSpec, scenario: TwoGroupScenario,
                  instances: int = 20, seed: int = 0,
                  lam: float = 0.1, rho: float = 1.0) -> dict:
    """Max elementwise deviation between the V=0 decoder and the reference
    solver over ``instances`` shared instances."""
    spec0 = AutoEncoderSpec(
        task=spec.task, decoder=spec.decoder, N=spec.N, M=spec.M, L=spec.L,
        sigma2=spec.sigma2, U=spec.U, V=0, trainable=(),
    )
    A, A_cm, insts = _instances(spec0, scenario, instances, seed)
    eps = np.clip(np.full(spec.N, 0.5 * (scenario.p1 + scenario.p2)),
                  1e-6, 1 - 1e-6)
    model = build_autoencoder(spec0, A, eps0=eps, lam0=lam, rho0=rho)
    model.eval()

    Y = torch.stack([torch.from_numpy(i.Y.to_complex()) for i in insts])
    with torch.no_grad():
        ours = model.decode(Y)
    worst = 0.0
    for i, inst in enumerate(insts):
        ref = _reference_output(spec0, inst, eps, lam, rho)
        dev = float(np.max(np.abs(np.asarray(ours[i]) - ref)))
        worst = max(worst, dev)
    return {"decoder": spec.decoder, "instances": instances,
            "max_deviation": worst}
