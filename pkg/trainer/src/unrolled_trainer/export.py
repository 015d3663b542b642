"""Artifact export: learned pilot matrix and priors in the binary
interchange format, scalars in a JSON manifest."""

from __future__ import annotations

import json
import os

import numpy as np
import torch

from mmvrec.complexmat import ComplexMatrix, save_cmat

from .model import AutoEncoder

MANIFEST_NAME = "manifest.json"
PILOTS_NAME = "A.cmat"
EPS_NAME = "eps.cmat"


def export_artifacts(model: AutoEncoder, out_dir, gamma_star: float = None) -> dict:
    """Write A.cmat, eps.cmat (when the decoder has priors) and manifest.json.

    Returns the manifest dict.  Exports are deterministic functions of the
    model state, so export -> import -> export is byte-identical.
    """
    os.makedirs(out_dir, exist_ok=True)
    spec = model.spec
    with torch.no_grad():
        A = np.asarray(model.encoder.A_re) + 1j * np.asarray(model.encoder.A_im)
    save_cmat(ComplexMatrix(A.real.copy(), A.imag.copy()),
              os.path.join(out_dir, PILOTS_NAME))

    manifest = {
        "task": spec.task,
        "decoder": spec.decoder,
        "N": spec.N, "M": spec.M, "L": spec.L,
        "sigma2": spec.sigma2,
        "U": spec.U, "V": spec.V,
        "hidden_width": spec.hidden_width,
        "trainable": list(spec.trainable),
        "pilots": PILOTS_NAME,
    }
    if hasattr(model.decoder, "eps"):
        with torch.no_grad():
            eps = np.asarray(model.decoder.eps, dtype=np.float64)
        save_cmat(ComplexMatrix(eps[:, None].copy(), np.zeros((spec.N, 1))),
                  os.path.join(out_dir, EPS_NAME))
        manifest["eps"] = EPS_NAME
    if hasattr(model.decoder, "log_lam"):
        with torch.no_grad():
            manifest["lambda"] = float(model.decoder.log_lam.exp())
            manifest["rho"] = float(model.decoder.log_rho.exp())
    if gamma_star is not None:
        manifest["gamma_star"] = float(gamma_star)

    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, MANIFEST_NAME)) as fh:
        return json.load(fh)
