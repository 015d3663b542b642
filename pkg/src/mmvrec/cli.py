"""Command-line entry point.

Subcommands:
  sweep           run a configured experiment sweep and write a CSV table
  calibrate       calibrate a detection threshold for one solver at one point
  coherence       report coherence metrics of a ``.cmat`` pilot matrix
  roundtrip-check verify a ``.cmat`` file loads and round-trips bit-exactly

Experiment configuration lives in a JSON file; a few common fields can be
overridden from the command line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .complexmat import load_cmat, save_cmat
from .errors import ContractViolation
from .harness import (
    ExperimentConfig,
    ScenarioConfig,
    SolverSpec,
    apply_sweep_value,
    emit_results,
    make_pilots,
    run_sweep,
    tune_lambda,
)
from .metrics import calibrate_threshold, coherence_metrics
from .sampling import (
    IidGroupActivity,
    IndependentTwoGroup,
    SingleActiveGroup,
    derive_seed,
)


def _activity_from_dict(d: dict):
    variant = d.get("variant")
    if variant == "independent-two-group":
        return IndependentTwoGroup(N=d["N"], p1=d["p1"], p2=d["p2"])
    if variant == "single-active-group":
        return SingleActiveGroup(N=d["N"], G=d["G"])
    if variant == "iid-group":
        return IidGroupActivity(N=d["N"], G=d["G"], p=d["p"])
    raise ContractViolation(f"unknown activity variant {variant!r}")


def load_config(path, overrides: dict) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    for key in ("trials", "root_seed", "calibration_trials"):
        if overrides.get(key) is not None:
            raw[key] = overrides[key]
    if overrides.get("sweep_values") is not None:
        raw["sweep"]["values"] = overrides["sweep_values"]

    sc = raw["scenario"]
    activity = _activity_from_dict({**sc["activity"], "N": sc["N"]})
    scenario = ScenarioConfig(
        N=sc["N"], M=sc["M"], L=sc["L"], sigma2=sc.get("sigma2", 0.1),
        activity=activity, pilots=sc.get("pilots", "gaussian"),
    )
    solvers = tuple(
        SolverSpec(
            id=s["id"], task=s.get("task", ""),
            params={k: v for k, v in s.items() if k not in ("id", "task")},
        )
        for s in raw["solvers"]
    )
    return ExperimentConfig(
        scenario=scenario,
        solvers=solvers,
        sweep_axis=raw["sweep"]["axis"],
        sweep_values=tuple(raw["sweep"]["values"]),
        trials=int(raw.get("trials", 1000)),
        root_seed=int(raw.get("root_seed", 1)),
        calibration_trials=int(raw.get("calibration_trials", 1000)),
        record_timing=bool(raw.get("record_timing", True)),
    )


def cmd_sweep(args) -> int:
    config = load_config(args.config, vars(args))
    records = run_sweep(config, workers=args.workers)
    emit_results(records, args.output)
    print(f"wrote {len(records)} records to {args.output}")
    return 0


def cmd_calibrate(args) -> int:
    config = load_config(args.config, vars(args))
    scenario = apply_sweep_value(
        config.scenario, config.sweep_axis, config.sweep_values[args.point]
    )
    spec = next((s for s in config.solvers if s.label == args.solver
                 or s.id == args.solver), None)
    if spec is None:
        print(f"no configured solver matches {args.solver!r}", file=sys.stderr)
        return 2
    point_seed = derive_seed(config.root_seed, args.point)
    A, _ = make_pilots(scenario, derive_seed(point_seed, 3))
    from .harness import make_instance, run_solver  # local to keep imports light

    lam = None
    if spec.id in ("group-lasso", "cov-lasso") and "lam" not in spec.params:
        lam = tune_lambda(spec, scenario, A, point_seed)
    score_b, alpha_b = [], []
    for t in range(config.calibration_trials):
        inst = make_instance(A, scenario.activity, scenario.M, scenario.sigma2,
                             derive_seed(point_seed, 1, t))
        _, scores = run_solver(spec, inst, scenario, lam)
        score_b.append(scores)
        alpha_b.append(inst.alpha)
    cal = calibrate_threshold(score_b, alpha_b)
    print(json.dumps({"solver": spec.label, "gamma_star": cal.gamma_star,
                      "lambda": lam,
                      "pe_at_gamma_star": min(p for _, p in cal.pe_curve)}))
    return 0


def cmd_coherence(args) -> int:
    A = load_cmat(args.matrix)
    mu, mu_block, nu = coherence_metrics(A, group_size=args.group_size,
                                         reduce=args.reduce)
    print(json.dumps({"coherence": mu, "block_coherence": mu_block,
                      "sub_coherence": nu}))
    return 0


def cmd_roundtrip(args) -> int:
    mat = load_cmat(args.matrix)
    fd, tmp = tempfile.mkstemp(suffix=".cmat")
    os.close(fd)
    try:
        save_cmat(mat, tmp)
        again = load_cmat(tmp)
        ok = (np.array_equal(mat.re, again.re)
              and np.array_equal(mat.im, again.im))
    finally:
        os.unlink(tmp)
    print(f"{args.matrix}: {mat.rows}x{mat.cols}, "
          f"round-trip {'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmvrec")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run an experiment sweep")
    p.add_argument("config", help="JSON experiment configuration")
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    p.add_argument("--trials", type=int)
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--calibration-trials", dest="calibration_trials", type=int)
    p.add_argument("--sweep-values", dest="sweep_values", type=float, nargs="+")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="calibrate a detection threshold")
    p.add_argument("config")
    p.add_argument("solver", help="solver id or label from the config")
    p.add_argument("--point", type=int, default=0, help="sweep point index")
    p.add_argument("--trials", type=int)
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--calibration-trials", dest="calibration_trials", type=int)
    p.set_defaults(func=cmd_calibrate, sweep_values=None)

    p = sub.add_parser("coherence", help="coherence metrics of a .cmat matrix")
    p.add_argument("matrix")
    p.add_argument("--group-size", dest="group_size", type=int, default=1)
    p.add_argument("--reduce", choices=("max", "mean"), default="max")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("roundtrip-check", help="verify a .cmat file")
    p.add_argument("matrix")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
