"""Command-line entry point.

Subcommands:
  train         train an auto-encoder from a JSON config and export artifacts
  export        re-export artifacts from a saved checkpoint
  parity-check  compare the V=0 unrolled decoder against the reference solver
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import torch

from .data import TwoGroupScenario
from .export import export_artifacts
from .model import build_autoencoder
from .parity import parity_report
from .spec import AutoEncoderSpec, TrainRun
from .train import train

CHECKPOINT_NAME = "checkpoint.pt"


def _load_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    spec = AutoEncoderSpec(**raw["spec"])
    scenario = TwoGroupScenario(
        N=spec.N, M=spec.M, L=spec.L, sigma2=spec.sigma2,
        p1=raw["scenario"]["p1"], p2=raw["scenario"]["p2"],
    )
    run = TrainRun(**raw.get("run", {}))
    return spec, scenario, run, raw


def _initial_pilots(spec, seed):
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((spec.L, spec.N))
         + 1j * rng.standard_normal((spec.L, spec.N))) / np.sqrt(2)
    return A * (np.sqrt(spec.L) / np.linalg.norm(A, axis=0))


def cmd_train(args) -> int:
    spec, scenario, run, raw = _load_config(args.config)
    torch.manual_seed(run.seed)
    model = build_autoencoder(
        spec, _initial_pilots(spec, run.seed),
        eps0=np.full(spec.N, 0.5 * (scenario.p1 + scenario.p2)),
        lam0=raw.get("lambda", 0.1), rho0=raw.get("rho", 1.0),
    )
    result = train(model, scenario, run)
    gamma = result.gamma_star if spec.task == "support" else None
    manifest = export_artifacts(model, args.output, gamma_star=gamma)
    torch.save({"spec": spec, "state": model.state_dict()},
               f"{args.output}/{CHECKPOINT_NAME}")
    print(json.dumps({"epochs": result.epochs,
                      "stopped_early": result.stopped_early,
                      "test_loss": result.test_loss,
                      "gamma_star": gamma,
                      "artifacts": sorted(manifest)}))
    return 0


def cmd_export(args) -> int:
    ckpt = torch.load(args.checkpoint, weights_only=False)
    spec = ckpt["spec"]
    model = build_autoencoder(spec, _initial_pilots(spec, 0))
    model.load_state_dict(ckpt["state"])
    export_artifacts(model, args.output, gamma_star=args.gamma_star)
    print(f"exported artifacts to {args.output}")
    return 0


def cmd_parity(args) -> int:
    spec, scenario, run, raw = _load_config(args.config)
    report = parity_report(spec, scenario, instances=args.instances,
                           seed=run.seed, lam=raw.get("lambda", 0.1),
                           rho=raw.get("rho", 1.0))
    print(json.dumps(report))
    return 0 if report["max_deviation"] <= args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unrolled-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and export artifacts")
    p.add_argument("config", help="JSON training configuration")
    p.add_argument("-o", "--output", required=True, help="artifact directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="export artifacts from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--gamma-star", dest="gamma_star", type=float, default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("parity-check",
                       help="compare the V=0 decoder with the reference solver")
    p.add_argument("config")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_parity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
