"""Experiment configuration: JSON documents with strict key checking.

Schema (all keys optional except ``kind``)::

    {
      "kind": "grid-expressiveness" | "grid-noisy" | "pointmass-convergence" | "theorem",
      "learner": "linear" | "tree" | "least_squares" | "majority",
      "learner_params": {...},          # keyword arguments of the learner
      "schedule": [1, 5, 10, ...],      # trajectory budgets, strictly increasing
      "trials": 100,
      "master_seed": 0,
      "n_eval": 50,
      "workers": null,                  # null: LFDBENCH_WORKERS or cpu count
      "output": "results.csv",
      "env": {...},                     # see ENV_KEYS
      "rc": {"m_initial": 1, "iterations": null, "beta": 0.0},
      "theorem": {"m_values": [1, 2, 4], "mu": 0.25}
    }

``rc.iterations = null`` means one rollout per iteration, so RC at budget
``N`` runs ``N - m_initial`` iterations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..learners import LeastSquaresLearner, LinearLearner, MajorityVoteLearner, TreeLearner

KINDS = ("grid-expressiveness", "grid-noisy", "pointmass-convergence", "theorem")
LEARNERS = {
    "linear": LinearLearner,
    "tree": TreeLearner,
    "least_squares": LeastSquaresLearner,
    "majority": MajorityVoteLearner,
}
TOP_KEYS = {"kind", "learner", "learner_params", "schedule", "trials", "master_seed",
            "n_eval", "workers", "output", "env", "rc", "theorem"}
ENV_KEYS = {
    "grid": {"width", "height", "penalty_frac", "slip_prob", "horizon", "flip_prob", "gamma"},
    "pointmass": {"noise_scale", "horizon", "label_noise", "mass1", "mass2", "region_bound"},
    "theorem": {"mu"},
}
RC_KEYS = {"m_initial", "iterations", "beta"}
THEOREM_KEYS = {"m_values", "mu"}

GRID_SCHEDULE = (1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
NOISY_SCHEDULE = GRID_SCHEDULE + (60, 70, 80, 90, 100)
POINTMASS_SCHEDULE = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
POINTMASS_LABEL_NOISE = 10.0

DEFAULTS = {
    "grid-expressiveness": dict(learner="linear", schedule=GRID_SCHEDULE, trials=100,
                                env={"flip_prob": 0.0}),
    "grid-noisy": dict(learner="tree", schedule=NOISY_SCHEDULE, trials=100,
                       env={"flip_prob": 0.3}),
    "pointmass-convergence": dict(learner="least_squares", schedule=POINTMASS_SCHEDULE,
                                  trials=200, env={"label_noise": POINTMASS_LABEL_NOISE}),
    "theorem": dict(learner="majority", schedule=(), trials=100_000, env={}),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    learner: str = ""
    learner_params: dict = field(default_factory=dict)
    schedule: tuple = ()
    trials: int = 0
    master_seed: int = 0
    n_eval: int = 50
    workers: int | None = None
    output: str = "results.csv"
    env: dict = field(default_factory=dict)
    rc: dict = field(default_factory=dict)
    theorem: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        d = DEFAULTS[self.kind]
        if not self.learner:
            object.__setattr__(self, "learner", d["learner"])
        if not self.schedule:
            object.__setattr__(self, "schedule", tuple(d["schedule"]))
        if not self.trials:
            object.__setattr__(self, "trials", d["trials"])
        object.__setattr__(self, "schedule", tuple(int(n) for n in self.schedule))
        object.__setattr__(self, "env", {**d["env"], **self.env})
        self._validate()

    def _validate(self):
        if self.learner not in LEARNERS:
            raise ConfigError(f"unknown learner {self.learner!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_eval < 1:
            raise ConfigError("n_eval must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        s = self.schedule
        if self.kind != "theorem":
            if not s:
                raise ConfigError("schedule is empty")
            if any(b <= a for a, b in zip(s, s[1:])):
                raise ConfigError(f"schedule must be strictly increasing, got {list(s)}")
            if s[0] < max(1, self.rc.get("m_initial", 1)):
                raise ConfigError("every budget must cover the RC initial demos")
        family = self.family
        _reject_unknown(self.env, ENV_KEYS[family], "env")
        _reject_unknown(self.rc, RC_KEYS, "rc")
        _reject_unknown(self.theorem, THEOREM_KEYS, "theorem")
        try:
            self.make_learner()
        except TypeError as exc:
            raise ConfigError(f"bad learner_params: {exc}") from None

    @property
    def family(self) -> str:
        return {"grid-expressiveness": "grid", "grid-noisy": "grid",
                "pointmass-convergence": "pointmass", "theorem": "theorem"}[self.kind]

    def make_learner(self, **extra):
        return LEARNERS[self.learner](**{**self.learner_params, **extra})

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "learner": self.learner, "learner_params": self.learner_params,
            "schedule": list(self.schedule), "trials": self.trials,
            "master_seed": self.master_seed, "n_eval": self.n_eval, "workers": self.workers,
            "output": self.output, "env": self.env, "rc": self.rc, "theorem": self.theorem,
        }


def _reject_unknown(doc: dict, allowed: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")


def parse_config(doc: dict) -> ExperimentConfig:
    _reject_unknown(doc, TOP_KEYS, "config")
    if "kind" not in doc:
        raise ConfigError("config needs a 'kind'")
    kwargs = dict(doc)
    if "schedule" in kwargs:
        kwargs["schedule"] = tuple(kwargs["schedule"])
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)
