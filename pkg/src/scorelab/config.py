"""Experiment configuration: flat dotted-key text files.

One ``key = value`` pair per line, ``#`` comments, no nesting; every key
is declared in the schema below with a type and default, and unknown keys
are rejected at load time.  The raw text is echoed verbatim into each
output directory so results stay attributable to an exact configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ExperimentConfig", "load_config", "parse_config", "DEFAULTS"]


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if str(x).strip())


def _bool(text):
    if str(text).strip() in ("1", "true", "yes"):
        return True
    if str(text).strip() in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# key -> (parser, default)
DEFAULTS = {
    "seed": (int, 0),
    "dataset.kind": (str, "gauss_ring"),
    "dataset.n": (int, 32),
    "dataset.path": (str, ""),
    "dataset.modes": (int, 8),
    "dataset.radius": (float, 2.0),
    "dataset.spread": (float, 0.25),
    "schedule.kind": (str, "linear"),
    "schedule.sigma_max": (float, 0.995),
    "schedule.t_min": (float, 1e-3),
    "train.sigma_tn": (float, 0.4),
    "train.sigma_tn_list": (_floats, (0.0, 0.1, 0.4, 0.7)),
    "train.batch": (int, 64),
    "train.iterations": (int, 2000),
    "train.lr": (float, 1e-3),
    "train.loss_mode": (str, "hybrid"),
    "sample.count": (int, 2048),
    "sample.steps": (int, 96),
    "sample.stop_t": (float, 0.0),  # 0 means the schedule floor t_min
    "sample.record": (_bool, False),
    "sample.field": (str, "learned"),
    "sample.checkpoint": (str, ""),
    "eval.gen": (str, ""),
    "eval.heldout": (int, 2048),
    "metrics.sim_thresholds": (_floats, (0.9, 0.95, 0.99)),
    "metrics.mem_dist_factor": (float, 0.05),
    "mi.sigma_min": (float, 0.05),
    "mi.sigma_max": (float, 0.95),
    "mi.points": (int, 19),
    "mi.dim": (int, 1),
    "mi.m": (int, 4),
    "subpop.n": (int, 20),
    "subpop.N": (int, 12),
    "subpop.zipf_k": (int, 6),
    "subpop.draws": (int, 2_000_000),
    "gmm.gap": (float, 2.0),
    "gmm.epsilon": (float, 0.1),
    "gmm.points": (int, 100),
}

_VALID_CHOICES = {
    "dataset.kind": {"gauss_ring", "file"},
    "schedule.kind": {"linear"},
    "train.loss_mode": {"ddpm", "ambient", "hybrid"},
    "sample.field": {"learned", "empirical-ddpm", "empirical-ambient"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    raw_text: str

    def __getitem__(self, key):
        return self.values[key]

    def override_seed(self, seed: int) -> "ExperimentConfig":
        vals = dict(self.values)
        vals["seed"] = int(seed)
        return ExperimentConfig(values=vals, raw_text=self.raw_text)


def parse_config(text: str) -> ExperimentConfig:
    values = {key: default for key, (_, default) in DEFAULTS.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in DEFAULTS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        parser, _ = DEFAULTS[key]
        try:
            values[key] = parser(raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    for key, choices in _VALID_CHOICES.items():
        if values[key] not in choices:
            raise ValueError(f"{key} must be one of {sorted(choices)}")
    _validate(values)
    return ExperimentConfig(values=values, raw_text=text)


def _validate(v):
    if not 0.0 < v["schedule.sigma_max"] < 1.0:
        raise ValueError("schedule.sigma_max must lie in (0, 1)")
    if not 0.0 <= v["train.sigma_tn"] < 1.0:
        raise ValueError("train.sigma_tn must lie in [0, 1)")
    if any(not 0.0 <= s < 1.0 for s in v["train.sigma_tn_list"]):
        raise ValueError("train.sigma_tn_list entries must lie in [0, 1)")
    if v["dataset.kind"] == "file" and not v["dataset.path"]:
        raise ValueError("dataset.kind=file requires dataset.path")
    for key in ("dataset.n", "train.batch", "sample.count", "sample.steps", "eval.heldout"):
        if v[key] < 1:
            raise ValueError(f"{key} must be >= 1")
    if v["train.iterations"] < 0:
        raise ValueError("train.iterations must be >= 0")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
