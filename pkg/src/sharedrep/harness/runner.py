"""Seeded trials, parallel sweeps and the results CSV."""

from __future__ import annotations

import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .._rng import derive_seed, make_rng
from ..diversity import diversity_matrix, spectrum
from ..errors import ConfigurationError, SharedRepError
from ..estimators import estimator_mom, estimator_multigroup, estimator_pairwise, estimator_replica
from ..model import (
    LinkSpec,
    generate_ground_truth,
    effective_alphas,
    sample_dataset,
    sample_nonlinear_dataset,
    sample_partitions,
)
from ..subspace import principal_angle_distance
from ..transfer import fit_new_client, independent_baseline, private_fit_new_client
from .config import ExperimentConfig, parse_estimator

__all__ = [
    "RESULTS_HEADER",
    "CSV_COLUMNS",
    "ResultRow",
    "SweepResult",
    "build_world",
    "run_trial",
    "sweep",
    "read_results",
]

RESULTS_HEADER = "# shared-rep-results v1"
CSV_COLUMNS = (
    "config_hash",
    "estimator",
    "seed",
    "sin_theta_error",
    "transfer_error",
    "lambda1",
    "lambdak",
    "wallclock_ms",
)


@dataclass(frozen=True)
class ResultRow:
    """One (config, estimator, repetition) outcome.

    ``sin_theta_error`` and ``transfer_error`` are NaN when they do not
    apply (the independent baseline has no basis, runs without a transfer
    block have no new client) or when the estimator failed, in which case
    ``diagnostic`` says why.
    """

    config_hash: str
    estimator: str
    seed: int
    sin_theta_error: float
    transfer_error: float
    lambda1: float
    lambdak: float
    wallclock_ms: float
    repetition: int = 0
    N: int = 0
    diagnostic: str = ""
    config: Optional[ExperimentConfig] = field(default=None, compare=False, repr=False)

    def get(self, name: str):
        """Row field, falling back to the config (``d``, ``k``, ``M``, ...)."""
        if name in self.__dataclass_fields__ and name != "config":
            return getattr(self, name)
        if self.config is not None and hasattr(self.config, name):
            return getattr(self.config, name)
        raise KeyError(name)

    @property
    def failed(self) -> bool:
        return bool(self.diagnostic)


@dataclass(frozen=True)
class World:
    """Everything about a config that stays fixed across repetitions."""

    gt: object
    partitions: np.ndarray
    lambda1: float
    lambdak: float
    alpha_new: np.ndarray


@lru_cache(maxsize=16)
def build_world(config: ExperimentConfig) -> World:
    """Ground truth, partitions and new-client head, seeded by the config hash."""
    h = config.config_hash
    gt = generate_ground_truth(
        config.d, config.k, config.M, config.gamma_profile, "gaussian",
        seed=derive_seed(h, 0), noise_sigma=config.noise_sigma,
    )
    partitions = sample_partitions(config.partition_scheme, config.M, seed=derive_seed(h, 1))
    spec = spectrum(diversity_matrix(effective_alphas(gt, LinkSpec(config.link)), partitions))
    # keyed on (master_seed, k) only, so the new client stays put across an M or d sweep
    rng = make_rng(derive_seed(config.master_seed, config.k, 2))
    while True:
        alpha_new = rng.standard_normal(config.k) / math.sqrt(config.k)
        if np.linalg.norm(alpha_new) <= gt.alpha_bound:
            break
    return World(gt, partitions, spec.lambda1, spec.lambdak, alpha_new)


def _estimate(name: str, dataset, k: int, shuffle_seed: int):
    """Dispatch by estimator name; ``multigroup:g`` uses ``min(g, n_i)`` groups at client ``i``."""
    kind, arg = parse_estimator(name)
    if kind == "replica":
        return estimator_replica(dataset, k, shuffle_seed=shuffle_seed)
    if kind == "multigroup":
        g = "n" if arg == "n" else np.minimum(int(arg), dataset.partitions)
        return estimator_multigroup(dataset, k, g, shuffle_seed=shuffle_seed)
    if kind == "mom":
        return estimator_mom(dataset, k)
    return estimator_pairwise(dataset, k)


def run_trial(config: ExperimentConfig, repetition: int) -> list:
    """Evaluate every requested estimator on one freshly sampled dataset.

    Data for repetition ``r`` is seeded by ``(master_seed, r)``. New-client
    covariates are standard Gaussian with response ``x^T B_star alpha_new``
    plus noise of the configured scale. Estimator failures become rows with
    NaN metrics and a diagnostic instead of aborting the run.
    """
    if not 0 <= repetition < config.repetitions:
        raise ConfigurationError(f"repetition {repetition} outside [0, {config.repetitions})")
    world = build_world(config)
    gt = world.gt
    seed = derive_seed(config.master_seed, repetition)
    if config.link == "linear":
        dataset = sample_dataset(gt, world.partitions, seed)
    else:
        dataset = sample_nonlinear_dataset(gt, LinkSpec(config.link), world.partitions, seed)

    tb = config.transfer
    if tb is not None:
        rng = make_rng(derive_seed(config.master_seed, repetition, 1))
        X_new = rng.standard_normal((tb.n_new, config.d))
        theta_new = gt.B_star @ world.alpha_new
        y_new = X_new @ theta_new + config.noise_sigma * rng.standard_normal(tb.n_new)
        dp_seed = derive_seed(config.master_seed, repetition, 2)

    common = dict(
        config_hash=config.hash_hex, seed=seed, lambda1=world.lambda1, lambdak=world.lambdak,
        repetition=repetition, N=dataset.N, config=config,
    )
    rows = []
    for name in config.estimators:
        t0 = time.perf_counter()
        sin_err = t_err = math.nan
        diagnostic = ""
        try:
            if name == "independent":
                t_err = float(np.linalg.norm(independent_baseline(X_new, y_new) - theta_new))
            else:
                est = _estimate(name, dataset, config.k, derive_seed(seed, 3))
                sin_err = principal_angle_distance(est, gt.B_star)
                if tb is not None:
                    if tb.private:
                        fit = private_fit_new_client(est, X_new, y_new, tb.epsilon, tb.delta, tb.clip_bound, dp_seed)
                    else:
                        fit = fit_new_client(est, X_new, y_new)
                    t_err = float(np.linalg.norm(fit.theta_hat - theta_new))
        except (SharedRepError, np.linalg.LinAlgError) as exc:
            sin_err = t_err = math.nan
            diagnostic = f"{type(exc).__name__}: {exc}"
        ms = (time.perf_counter() - t0) * 1e3
        rows.append(ResultRow(estimator=name, sin_theta_error=sin_err, transfer_error=t_err,
                              wallclock_ms=ms, diagnostic=diagnostic, **common))
    return rows


def _job(args):
    config, rep = args
    return run_trial(config, rep)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class SweepResult:
    rows: list
    configs: list

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path=None, *, include_timing: bool = False) -> str:
        """Serialise rows; ``wallclock_ms`` is ``NA`` unless ``include_timing``.

        Timings vary run to run, so leaving them out keeps the file a pure
        function of the grid and seeds.
        """
        lines = [RESULTS_HEADER, ",".join(CSV_COLUMNS)]
        for r in self.rows:
            vals = [r.config_hash, r.estimator, r.seed, r.sin_theta_error, r.transfer_error, r.lambda1, r.lambdak,
                    r.wallclock_ms if include_timing else math.nan]
            lines.append(",".join(_fmt(v) for v in vals))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def manifest(self) -> dict:
        return {
            "format": "shared-rep-configs",
            "version": 1,
            "configs": [{"config_hash": c.hash_hex, **c.canonical()} for c in self.configs],
        }

    def write(self, out_dir, *, include_timing: bool = False) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_csv(out / "results.csv", include_timing=include_timing)
        (out / "configs.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        failures = [r for r in self.rows if r.failed]
        if failures:
            (out / "diagnostics.txt").write_text(
                "".join(f"{r.config_hash} {r.estimator} rep={r.repetition}: {r.diagnostic}\n" for r in failures)
            )
        return out / "results.csv"


def sweep(grid: Iterable[ExperimentConfig], parallelism: int = 1) -> SweepResult:
    """Run every repetition of every config.

    Rows come back in grid order, then repetition, then estimator order,
    whatever the degree of parallelism.
    """
    configs = list(grid)
    if not configs:
        raise ConfigurationError("empty experiment grid")
    seen = {}
    for c in configs:
        if c.config_hash in seen:
            raise ConfigurationError(f"duplicate config in grid (hash {c.hash_hex})")
        seen[c.config_hash] = c
    if int(parallelism) < 1:
        raise ConfigurationError("parallelism must be >= 1")
    jobs = [(c, r) for c in configs for r in range(c.repetitions)]
    if parallelism == 1 or len(jobs) == 1:
        chunks = [_job(j) for j in jobs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(int(parallelism), len(jobs)), mp_context=ctx) as pool:
            chunks = list(pool.map(_job, jobs))
    rows = [row for chunk in chunks for row in chunk]
    return SweepResult(rows, configs)


def read_results(csv_path, configs_path: Optional[str] = None) -> list:
    """Load a results CSV as dicts; config fields are merged in when a manifest is given."""
    csv_path = Path(csv_path)
    lines = csv_path.read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ConfigurationError(f"{csv_path}: missing or unsupported results header")
    if tuple(lines[1].split(",")) != CSV_COLUMNS:
        raise ConfigurationError(f"{csv_path}: unexpected columns")
    by_hash = {}
    if configs_path is None and (csv_path.parent / "configs.json").exists():
        configs_path = csv_path.parent / "configs.json"
    if configs_path is not None:
        for c in json.loads(Path(configs_path).read_text())["configs"]:
            by_hash[c["config_hash"]] = c
    rows = []
    for line in lines[2:]:
        vals = line.split(",")
        row = dict(zip(CSV_COLUMNS, vals))
        for key in CSV_COLUMNS[3:]:
            row[key] = math.nan if row[key] == "NA" else float(row[key])
        row["seed"] = int(row["seed"])
        extra = by_hash.get(row["config_hash"], {})
        for key, value in extra.items():
            row.setdefault(key, value)
        rows.append(row)
    return rows
