"""HC-vs-RC experiment driver: per-trial work, parallel execution, CSV output."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import RandomSource
from ..envs import GridWorld, PointMassEnv, gridworld_generate
from ..sampling import RcConfig, data_equalized_schedule, hc_collect, rc_dagger
from ..supervisors import GridSupervisor, NoisySupervisor, SwitchingLqrSupervisor
from ..theorem import theorem_csv, theorem_table
from .config import ExperimentConfig
from .metrics import (
    BaselineError,
    cost_ratio,
    episode_scores,
    grid_ratio,
    heldout_surrogate_loss,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("trial", "algorithm", "demos", "norm_perf", "loss_dim1", "loss_dim2",
              "baseline_shifted", "error")
WORKERS_ENV = "LFDBENCH_WORKERS"
ALGORITHMS = ("HC", "RC")

# Stream indices under each trial's RandomSource.
_ENV_STREAM, _HC_STREAM, _RC_STREAM, _EVAL_STREAM, _FIT_STREAM = range(5)
_HELDOUT_FIT = 100_000  # offset of held-out refit streams under _FIT_STREAM


@dataclass
class ResultRow:
    trial: int
    algorithm: str
    demos: int
    norm_perf: float = math.nan
    losses: tuple = ()
    baseline_shifted: bool = False
    error: str = ""
    wall_time: float = 0.0

    def csv_fields(self) -> list[str]:
        loss = list(self.losses) + [math.nan] * (2 - len(self.losses))
        return [str(self.trial), self.algorithm, str(self.demos), _fmt(self.norm_perf),
                _fmt(loss[0]), _fmt(loss[1]), "1" if self.baseline_shifted else "0", self.error]


def _fmt(x: float) -> str:
    return "" if x is None or not math.isfinite(x) else repr(float(x))


def heldout_count(n_demos: int) -> int:
    """Trajectories held out when measuring generalization loss at a budget."""
    return n_demos // 6


# ---------------------------------------------------------------------------
# Per-trial work


@dataclass
class _Setup:
    env: object
    supervisor: object  # clean, for evaluation
    labeller: object  # what demonstrations and RC labels come from
    learner: object
    horizon: int
    label_noise: float = 0.0


def _grid_setup(cfg: ExperimentConfig, rng: RandomSource) -> _Setup:
    e = cfg.env
    world = gridworld_generate(rng.child(_ENV_STREAM), e.get("width", 15), e.get("height", 15),
                               e.get("penalty_frac", 0.08), e.get("slip_prob", 0.16),
                               e.get("horizon", 30))
    sup = GridSupervisor(world, gamma=e.get("gamma", 0.99))
    flip = e.get("flip_prob", 0.0)
    labeller = NoisySupervisor(sup, flip) if flip > 0 else sup
    extra = {"scale": (world.width - 1, world.height - 1)} if cfg.learner == "linear" else {}
    return _Setup(world, sup, labeller, cfg.make_learner(**extra), world.horizon)


def _pointmass_setup(cfg: ExperimentConfig, rng: RandomSource) -> _Setup:
    e = cfg.env
    env = PointMassEnv(noise_scale=e.get("noise_scale", 0.1), mass1=e.get("mass1", 1.0),
                       mass2=e.get("mass2", 4.0), region_bound=e.get("region_bound", 12.0),
                       horizon=e.get("horizon", 35))
    sup = SwitchingLqrSupervisor(env)
    return _Setup(env, sup, sup, cfg.make_learner(), env.horizon, e.get("label_noise", 0.0))


def _rc_policies(cfg: ExperimentConfig, s: _Setup, rng: RandomSource, initial):
    """Map budget -> (policy, dataset, policy trained without the last
    held-out trajectories). ``initial`` holds RC's starting HC demos."""
    m = cfg.rc.get("m_initial", 1)
    beta = cfg.rc.get("beta", 0.0)
    iterations = cfg.rc.get("iterations")
    budgets = cfg.schedule
    out = {}
    if iterations is None:
        # One rollout per iteration: every budget is a prefix of the longest run.
        top = budgets[-1]
        rc_cfg = RcConfig(s.learner, m, top - m, 1, beta, s.label_noise)
        res = rc_dagger(s.env, s.labeller, rc_cfg, s.horizon, rng, initial)
        for n in budgets:
            h = heldout_count(n)
            held = res.dataset.trajectory_slice(n - h, n) if h else None
            before = res.policies[n - h - m] if h and n - h >= m else None
            out[n] = (res.policies[n - m], held, before)
        out["sizes"] = res.sizes
        return out
    for n in budgets:
        k = min(iterations, n - m)
        counts = data_equalized_schedule(n, RcConfig(s.learner, m, k, 1, beta, s.label_noise))
        rc_cfg = RcConfig(s.learner, m, k, tuple(counts) or 1, beta, s.label_noise)
        res = rc_dagger(s.env, s.labeller, rc_cfg, s.horizon, rng.child(n), initial)
        h = heldout_count(n)
        held = res.dataset.trajectory_slice(n - h, n) if h else None
        before = None
        if h:
            # Latest iterate fitted before any held-out trajectory was collected.
            ends = np.cumsum([m] + counts)
            k = int(np.searchsorted(ends, n - h, side="right")) - 1
            before = res.policies[k] if k >= 0 else None
        out[n] = (res.policy, held, before)
        out["sizes"] = res.sizes
    return out


def run_trial(cfg: ExperimentConfig, trial: int) -> list[ResultRow]:
    return _run_trial(cfg, trial)[0]


def _run_trial(cfg: ExperimentConfig, trial: int) -> tuple[list[ResultRow], dict]:
    rng = RandomSource(cfg.master_seed).child(trial)
    rows: list[ResultRow] = []
    info = {"trial": trial, "spawn_key": list(rng.spawn_key)}
    try:
        t0 = time.perf_counter()
        s = _grid_setup(cfg, rng) if cfg.family == "grid" else _pointmass_setup(cfg, rng)
        eval_rng = rng.child(_EVAL_STREAM)
        sup_mean = episode_scores(s.supervisor, s.env, cfg.n_eval, s.horizon, eval_rng).mean()
        is_grid = isinstance(s.env, GridWorld)
        shifted = False
        if is_grid:
            try:
                grid_ratio(sup_mean, sup_mean, s.env, s.horizon)
            except BaselineError:
                shifted = True

        def score(policy) -> float:
            mean = episode_scores(policy, s.env, cfg.n_eval, s.horizon, eval_rng).mean()
            if is_grid:
                return grid_ratio(mean, sup_mean, s.env, s.horizon, shift=shifted)
            return cost_ratio(mean, sup_mean)

        top = cfg.schedule[-1]
        hc_data, _ = hc_collect(s.env, s.labeller, top, s.horizon, rng.child(_HC_STREAM),
                                s.label_noise)
        fit_rng = rng.child(_FIT_STREAM)
        m = cfg.rc.get("m_initial", 1)
        rc = _rc_policies(cfg, s, rng.child(_RC_STREAM), hc_data.trajectory_slice(0, m))
        info["rc_dataset_sizes"] = list(rc["sizes"])
        info["final_policy"] = rc[top][0].to_json()
        setup_time = time.perf_counter() - t0
        for n in cfg.schedule:
            t1 = time.perf_counter()
            h = heldout_count(n)
            hc_policy = s.learner.fit(hc_data.trajectory_slice(0, n), fit_rng.child(n))
            hc_loss = ()
            if h:
                trained = s.learner.fit(hc_data.trajectory_slice(0, n - h), fit_rng.child(_HELDOUT_FIT + n))
                hc_loss = tuple(heldout_surrogate_loss(trained, hc_data.trajectory_slice(n - h, n)))
            rows.append(ResultRow(trial, "HC", n, score(hc_policy), hc_loss, shifted,
                                  wall_time=time.perf_counter() - t1 + setup_time / (2 * len(cfg.schedule))))
            t1 = time.perf_counter()
            rc_policy, held, before = rc[n]
            rc_loss = tuple(heldout_surrogate_loss(before, held)) if before is not None else ()
            rows.append(ResultRow(trial, "RC", n, score(rc_policy), rc_loss, shifted,
                                  wall_time=time.perf_counter() - t1 + setup_time / (2 * len(cfg.schedule))))
    except Exception as exc:  # recorded per trial; the run continues
        log.warning("trial %d failed: %s", trial, exc)
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        done = {(r.algorithm, r.demos) for r in rows}
        rows += [ResultRow(trial, a, n, error=msg) for n in cfg.schedule for a in ALGORITHMS
                 if (a, n) not in done]
        info["error"] = msg
    return rows, info


# ---------------------------------------------------------------------------
# Orchestration


def resolve_workers(cfg: ExperimentConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if cfg.workers:
        return cfg.workers
    return os.cpu_count() or 1


def _trial_job(args):
    cfg, trial = args
    return _run_trial(cfg, trial)


def run_trials(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRow]:
    return [row for rows, _ in _run_all(cfg, workers) for row in rows]


def _run_all(cfg: ExperimentConfig, workers: int | None):
    workers = workers or resolve_workers(cfg)
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if workers == 1 or cfg.trials == 1:
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=max(1, cfg.trials // (4 * workers))))
    return results


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


@dataclass
class RunSummary:
    path: Path
    rows: list = field(default_factory=list)
    n_errors: int = 0
    manifest_path: Path | None = None


def manifest_path_for(csv_path: Path) -> Path:
    return csv_path.with_suffix(".manifest.json")


def run_experiment(cfg: ExperimentConfig, output: str | Path | None = None,
                   workers: int | None = None, manifest: bool = True) -> RunSummary:
    """Run every trial and write the CSV (plus a JSON manifest with seeds,
    RC dataset sizes and each trial's final RC policy).

    Output is deterministic given ``master_seed``, whatever the worker count.
    """
    path = Path(output or cfg.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "theorem":
        t = cfg.theorem
        m_values = t.get("m_values", list(range(1, 13)))
        mu = t.get("mu", cfg.env.get("mu", 0.25))
        table = theorem_table(m_values, mu, cfg.trials, RandomSource(cfg.master_seed))
        path.write_text(theorem_csv(table))
        return RunSummary(path, table, 0)
    results = _run_all(cfg, workers)
    rows = [row for trial_rows, _ in results for row in trial_rows]
    path.write_text(rows_to_csv(rows))
    n_err = sum(1 for r in rows if r.error)
    log.info("wrote %d rows (%d errors) to %s", len(rows), n_err, path)
    mpath = None
    if manifest:
        mpath = manifest_path_for(path)
        doc = {"config": cfg.to_json(), "master_seed": cfg.master_seed,
               "csv": path.name, "trials": [info for _, info in results]}
        mpath.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return RunSummary(path, rows, n_err, mpath)
