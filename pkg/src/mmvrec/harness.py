"""Experiment orchestration: scenario sweeps, solver dispatch, seeding,
threshold calibration and CSV result tables.

Every trial owns a seed derived from (root_seed, sweep point, batch, trial),
so serial and parallel executions produce byte-identical result tables.
"""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .amp import AmpConfig, solve_amp
from .complexmat import ComplexMatrix, load_cmat
from .cov_lasso import build_system, solve_nn_lasso
from .errors import ContractViolation, DivergenceError, NonConvergenceError
from .group_lasso import AdmmConfig, solve_group_lasso
from .map_detect import MapConfig, mmse_given_support, solve_map
from .metrics import calibrate_threshold, hard_threshold
from .sampling import (
    ActivityModel,
    IidGroupActivity,
    IndependentTwoGroup,
    SingleActiveGroup,
    derive_seed,
    gaussian_pilots,
    make_instance,
)

WORKERS_ENV = "MMVREC_WORKERS"

SIGNAL_SOLVERS = {"group-lasso", "amp", "map", "ml"}
SUPPORT_SOLVERS = {"group-lasso", "amp", "map", "ml", "cov-lasso"}
DEFAULT_ITERATIONS = {"group-lasso": 200, "amp": 50, "map": 55, "ml": 55,
                      "cov-lasso": 200}
LAMBDA_GRID = tuple(float(x) for x in np.logspace(-3, 1, 9))


@dataclass(frozen=True)
class SolverSpec:
    """One configured solver: id, task and free-form parameters.

    Recognized params: ``lam`` / ``rho`` / ``k_max`` (group-lasso, cov-lasso),
    ``eps`` (scalar prior) or ``eps_file`` (N x 1 ``.cmat``) for amp/map,
    ``gamma`` to pin the detection threshold instead of calibrating it.
    """

    id: str
    task: str = ""            # "signal" or "support"; default depends on id
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in SIGNAL_SOLVERS | SUPPORT_SOLVERS:
            raise ContractViolation(f"unknown solver id {self.id!r}")
        task = self.task or ("support" if self.id == "cov-lasso" else "signal")
        if task == "signal" and self.id not in SIGNAL_SOLVERS:
            raise ContractViolation(f"{self.id} cannot run the signal task")
        if task == "support" and self.id not in SUPPORT_SOLVERS:
            raise ContractViolation(f"{self.id} cannot run the support task")
        object.__setattr__(self, "task", task)

    @property
    def label(self) -> str:
        return f"{self.id}[{self.task}]"


@dataclass(frozen=True)
class ScenarioConfig:
    N: int
    M: int
    L: int
    sigma2: float
    activity: ActivityModel
    pilots: str = "gaussian"   # "gaussian", "gaussian-normalized" or a file path


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    solvers: tuple
    sweep_axis: str
    sweep_values: tuple
    trials: int
    root_seed: int
    calibration_trials: int = 1000
    record_timing: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ContractViolation("need at least one trial")
        if not self.sweep_values:
            raise ContractViolation("sweep needs at least one value")
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))


@dataclass(frozen=True)
class ExperimentRecord:
    sweep_axis: str
    sweep_value: float
    solver: str
    metric: str
    value: float
    trials: int
    excluded_trials: int
    seed: int
    pilot_source: str
    ms_per_trial: float


# --------------------------------------------------------------------------
# scenario resolution
# --------------------------------------------------------------------------

def apply_sweep_value(scenario: ScenarioConfig, axis: str,
                      value: float) -> ScenarioConfig:
    """Return the scenario with one axis moved to ``value``."""
    act = scenario.activity
    if axis == "L/N":
        return replace(scenario, L=int(round(value * scenario.N)))
    if axis == "M":
        return replace(scenario, M=int(round(value)))
    if axis == "p":
        if isinstance(act, IndependentTwoGroup):
            # keep the p1/p2 ratio, move the mean
            ratio = act.p1 / act.p2 if act.p2 > 0 else 1.0
            p2 = 2.0 * value / (1.0 + ratio)
            return replace(scenario, activity=replace(act, p1=ratio * p2, p2=p2))
        if isinstance(act, IidGroupActivity):
            return replace(scenario, activity=replace(act, p=value))
        raise ContractViolation("p sweep undefined for the single-active-group model")
    if axis == "p1/p2":
        if not isinstance(act, IndependentTwoGroup):
            raise ContractViolation("p1/p2 sweep requires the two-group model")
        p = act.mean_access_probability
        p2 = 2.0 * p / (1.0 + value)
        return replace(scenario, activity=replace(act, p1=value * p2, p2=p2))
    if axis == "G":
        if isinstance(act, (SingleActiveGroup, IidGroupActivity)):
            return replace(scenario, activity=replace(act, G=int(round(value))))
        raise ContractViolation("G sweep requires a grouped activity model")
    raise ContractViolation(f"unknown sweep axis {axis!r}")


def make_pilots(scenario: ScenarioConfig, seed: int) -> tuple[ComplexMatrix, str]:
    if scenario.pilots == "gaussian":
        A = gaussian_pilots(scenario.L, scenario.N, False, np.random.default_rng(seed))
        return A, "gaussian"
    if scenario.pilots == "gaussian-normalized":
        A = gaussian_pilots(scenario.L, scenario.N, True, np.random.default_rng(seed))
        return A, "gaussian-normalized"
    A = import_matrix(scenario.pilots)
    if A.shape != (scenario.L, scenario.N):
        raise ContractViolation(
            f"pilot file {scenario.pilots} is {A.shape}, scenario needs "
            f"({scenario.L}, {scenario.N})"
        )
    return A, scenario.pilots


# --------------------------------------------------------------------------
# solver dispatch
# --------------------------------------------------------------------------

def _resolve_eps(spec: SolverSpec, scenario: ScenarioConfig) -> np.ndarray:
    if "eps_file" in spec.params:
        mat = import_matrix(spec.params["eps_file"])
        eps = mat.re.reshape(-1)
    elif "eps" in spec.params:
        val = spec.params["eps"]
        eps = np.full(scenario.N, float(val)) if np.isscalar(val) else np.asarray(val)
    elif "eps_groups" in spec.params:
        # list of per-group probabilities over equal contiguous groups
        groups = np.asarray(spec.params["eps_groups"], dtype=np.float64)
        eps = np.repeat(groups, scenario.N // groups.size)
    else:
        eps = np.full(scenario.N, scenario.activity.mean_access_probability)
    return np.clip(eps, 1e-6, 1.0 - 1e-6)


def run_solver(spec: SolverSpec, instance, scenario: ScenarioConfig,
               lam: Optional[float] = None):
    """Run one solver on one instance.

    Returns (X_hat or None, scores or None): signal solvers yield an N x M
    estimate, score-producing solvers yield nonnegative soft activity scores.
    map/ml yield scores for both tasks (the signal estimate is produced later
    via the MMSE-given-support path once a threshold is available).
    """
    k_max = int(spec.params.get("k_max", DEFAULT_ITERATIONS[spec.id]))
    if spec.id == "group-lasso":
        cfg = AdmmConfig(
            lam=lam if lam is not None else float(spec.params.get("lam", 0.1)),
            rho=float(spec.params.get("rho", 1.0)),
            k_max=k_max,
        )
        X_hat, _ = solve_group_lasso(instance.Y, instance.A, cfg)
        scores = np.sum(np.abs(X_hat.to_complex()) ** 2, axis=1) / scenario.M
        return X_hat, scores
    if spec.id == "amp":
        cfg = AmpConfig(eps=_resolve_eps(spec, scenario), k_max=k_max)
        X_hat, _ = solve_amp(instance.Y, instance.A, cfg)
        scores = np.sum(np.abs(X_hat.to_complex()) ** 2, axis=1) / scenario.M
        return X_hat, scores
    if spec.id in ("map", "ml"):
        cfg = MapConfig(
            eps=_resolve_eps(spec, scenario),
            sigma2=scenario.sigma2,
            k_max=k_max,
            variant="ML" if spec.id == "ml" else "MAP",
        )
        alpha_soft, _ = solve_map(instance.Y, instance.A, cfg)
        return None, alpha_soft
    if spec.id == "cov-lasso":
        system = build_system(instance.Y, instance.A)
        r_hat = solve_nn_lasso(
            system,
            lam if lam is not None else float(spec.params.get("lam", 0.01)),
            max_sweeps=k_max,
            kkt_tol=float(spec.params.get("kkt_tol", 1e-6)),
        )
        return None, r_hat
    raise ContractViolation(f"unknown solver id {spec.id!r}")


def _trial_payload(point_scenario, A, specs, lambdas, seed):
    return {
        "scenario": point_scenario,
        "A": A,
        "specs": specs,
        "lambdas": lambdas,
        "seed": seed,
    }


def _run_trial(payload):
    """Worker body: one instance, every configured solver.

    Returns per-solver dict with either raw outputs or an 'error' marker.
    """
    scenario = payload["scenario"]
    instance = make_instance(
        payload["A"], scenario.activity, scenario.M, scenario.sigma2, payload["seed"]
    )
    out = {"alpha": instance.alpha, "X": instance.X, "Y": instance.Y,
           "results": {}}
    for spec in payload["specs"]:
        t0 = time.perf_counter()
        try:
            X_hat, scores = run_solver(
                spec, instance, scenario, payload["lambdas"].get(spec.label)
            )
            elapsed_ms = (time.perf_counter() - t0) * 1e3
            out["results"][spec.label] = {
                "X_hat": X_hat, "scores": scores, "ms": elapsed_ms,
            }
        except (DivergenceError, NonConvergenceError) as exc:
            out["results"][spec.label] = {"error": str(exc)}
    return out


def _run_batch(point_scenario, A, specs, lambdas, seeds, workers):
    payloads = [_trial_payload(point_scenario, A, specs, lambdas, s) for s in seeds]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, payloads, chunksize=4))
    else:
        results = [_run_trial(p) for p in payloads]
    return results


# --------------------------------------------------------------------------
# lambda tuning
# --------------------------------------------------------------------------

def tune_lambda(spec: SolverSpec, scenario: ScenarioConfig, A: ComplexMatrix,
                seed: int, n_val: int = 16,
                grid=LAMBDA_GRID) -> float:
    """Pick lambda on a held-out validation batch.

    group-lasso: minimize per-eval MSE; cov-lasso: maximize separation between
    true-active and true-inactive scores (threshold-free surrogate for the
    detection error).
    """
    instances = [
        make_instance(A, scenario.activity, scenario.M, scenario.sigma2,
                      derive_seed(seed, 2, t))
        for t in range(n_val)
    ]
    best_lam, best_loss = grid[0], np.inf
    for lam in grid:
        loss, ok = 0.0, 0
        for inst in instances:
            try:
                X_hat, scores = run_solver(spec, inst, scenario, lam)
            except (DivergenceError, NonConvergenceError):
                continue
            ok += 1
            if spec.id == "group-lasso":
                loss += float(
                    np.linalg.norm(X_hat.to_complex() - inst.X.to_complex()) ** 2
                ) / scenario.N
            else:
                active = inst.alpha.astype(bool)
                hi = scores[active].min() if active.any() else 0.0
                lo = scores[~active].max() if (~active).any() else 0.0
                loss += float(lo - hi)
        if ok == 0:
            continue
        loss /= ok
        if loss < best_loss:
            best_lam, best_loss = lam, loss
    return float(best_lam)


# --------------------------------------------------------------------------
# the sweep
# --------------------------------------------------------------------------

def _needs_scores(spec: SolverSpec) -> bool:
    return spec.task == "support" or spec.id in ("map", "ml")


def run_sweep(config: ExperimentConfig, workers: Optional[int] = None):
    """Execute the full sweep and return the sorted list of ExperimentRecords."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    records = []
    for point_idx, value in enumerate(config.sweep_values):
        scenario = apply_sweep_value(config.scenario, config.sweep_axis, value)
        point_seed = derive_seed(config.root_seed, point_idx)
        A, pilot_source = make_pilots(scenario, derive_seed(point_seed, 3))

        lambdas = {}
        for spec in config.solvers:
            if spec.id in ("group-lasso", "cov-lasso") and "lam" not in spec.params:
                lambdas[spec.label] = tune_lambda(spec, scenario, A, point_seed)

        # calibration batch (disjoint seeds) for every score-producing solver
        calib_specs = [s for s in config.solvers if _needs_scores(s)]
        gammas = {}
        if calib_specs:
            calib_seeds = [derive_seed(point_seed, 1, t)
                           for t in range(config.calibration_trials)]
            calib = _run_batch(scenario, A, calib_specs, lambdas, calib_seeds, workers)
            for spec in calib_specs:
                if "gamma" in spec.params:
                    gammas[spec.label] = float(spec.params["gamma"])
                    continue
                score_b, alpha_b = [], []
                for trial in calib:
                    res = trial["results"][spec.label]
                    if "error" in res:
                        continue
                    score_b.append(res["scores"])
                    alpha_b.append(trial["alpha"])
                if score_b:
                    gammas[spec.label] = calibrate_threshold(score_b, alpha_b).gamma_star
                else:
                    gammas[spec.label] = 0.0

        test_seeds = [derive_seed(point_seed, 0, t) for t in range(config.trials)]
        trials = _run_batch(scenario, A, config.solvers, lambdas, test_seeds, workers)

        for spec in config.solvers:
            errors = 0
            times = []
            mse_sum = 0.0
            err_sum = 0.0
            used = 0
            for trial in trials:
                res = trial["results"][spec.label]
                if "error" in res:
                    errors += 1
                    continue
                used += 1
                times.append(res["ms"])
                if spec.task == "signal":
                    if spec.id in ("map", "ml"):
                        alpha_hat = hard_threshold(res["scores"], gammas[spec.label])
                        X_hat = mmse_given_support(
                            trial["Y"], A, alpha_hat, scenario.sigma2
                        )
                    else:
                        X_hat = res["X_hat"]
                    mse_sum += float(
                        np.linalg.norm(X_hat.to_complex() - trial["X"].to_complex()) ** 2
                    ) / scenario.N
                else:
                    alpha_hat = hard_threshold(res["scores"], gammas[spec.label])
                    err_sum += float(np.sum(np.abs(trial["alpha"] - alpha_hat)))
            ms = float(np.median(times)) if (times and config.record_timing) else 0.0
            common = dict(
                sweep_axis=config.sweep_axis, sweep_value=float(value),
                solver=spec.label, trials=config.trials, excluded_trials=errors,
                seed=point_seed, pilot_source=pilot_source, ms_per_trial=ms,
            )
            metric = "mse" if spec.task == "signal" else "error_rate"
            val = (mse_sum / used) if spec.task == "signal" else err_sum / (
                scenario.N * used
            ) if used else float("nan")
            if used == 0:
                val = float("nan")
            records.append(ExperimentRecord(metric=metric, value=val, **common))
            if spec.label in lambdas:
                records.append(
                    ExperimentRecord(metric="lambda", value=lambdas[spec.label],
                                     **common)
                )
            if spec.label in gammas:
                records.append(
                    ExperimentRecord(metric="gamma_star", value=gammas[spec.label],
                                     **common)
                )
    records.sort(key=lambda r: (r.sweep_value, r.solver, r.metric))
    return records


# --------------------------------------------------------------------------
# matrix import and CSV emission
# --------------------------------------------------------------------------

def import_matrix(path) -> ComplexMatrix:
    """Load a ``.cmat`` interchange file (bit-exact round-trip)."""
    return load_cmat(path)


CSV_HEADER = ("sweep_axis,sweep_value,solver,metric,value,trials,"
              "excluded_trials,seed,pilot_source,ms_per_trial")


def emit_results(records, path) -> None:
    """Write records as CSV with 17-significant-digit (round-trippable) floats."""
    if not records:
        raise ContractViolation("no records to emit")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.sweep_axis},{r.sweep_value:.17g},{r.solver},{r.metric},"
            f"{r.value:.17g},{r.trials},{r.excluded_trials},{r.seed},"
            f"{r.pilot_source},{r.ms_per_trial:.17g}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
