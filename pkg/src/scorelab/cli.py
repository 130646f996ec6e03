"""Command-line orchestration: train / sample / eval / sweep / mi / subpop / gmm.

Every command takes ``--config PATH`` (flat key=value text), an optional
``--seed`` override and ``--out DIR``.  The raw config text is copied
verbatim into the output directory and every CSV starts with a comment
line carrying the format version and master seed, so any artifact can be
regenerated bit for bit from (config, seed).

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import rng
from .config import ExperimentConfig, load_config
from .datasets import gauss_ring, load_points, save_points
from .infotheory import mi_dataset_bound, mi_single_point
from .gmmnoise import merge_and_separation_status, tv_at_noise
from .metrics import exact_w2, gaussian_frechet, memorization_fraction, nn_similarity, pareto_sweep
from .samples import SampleSet, noise_sample_set
from .sampler import IntegrationDivergedError, reverse_ode_sample
from .schedule import linear_schedule
from .scores import EmpiricalAmbientScore, EmpiricalDDPMScore, LearnedScore
from .subpop import (
    FrequencyPrior,
    MixtureInstance,
    error_decomposition_check,
    tau1_bounds_check,
    tau_report,
    weight,
)
from .trainer import TrainConfig, TrainingDivergedError, load_checkpoint, save_checkpoint, train

CSV_FORMAT = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise _UsageError(message)


def _write_csv(path, header, rows, seed):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# scorelab-csv format={CSV_FORMAT} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _prepare_out(cfg: ExperimentConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.raw_text, encoding="utf-8")


def _schedule(cfg):
    return linear_schedule(sigma_max=cfg["schedule.sigma_max"], t_min=cfg["schedule.t_min"])


def _dataset(cfg, stream_name="dataset", n=None):
    if cfg["dataset.kind"] == "file":
        return load_points(cfg["dataset.path"])
    return gauss_ring(
        n or cfg["dataset.n"],
        cfg["seed"],
        modes=cfg["dataset.modes"],
        radius=cfg["dataset.radius"],
        spread=cfg["dataset.spread"],
        stream_name=stream_name,
    )


def _sigma_to_t(sigma_tn, sched):
    if sigma_tn >= sched.sigma_max:
        raise ValueError(f"sigma_tn={sigma_tn} must be below sigma_max={sched.sigma_max}")
    return sigma_tn / sched.sigma_max


# -- commands ----------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    sched = _schedule(cfg)
    data = _dataset(cfg)
    tcfg = TrainConfig(
        t_n=_sigma_to_t(cfg["train.sigma_tn"], sched),
        batch=cfg["train.batch"],
        iterations=cfg["train.iterations"],
        learning_rate=cfg["train.lr"],
        seed=rng.component_seed("train", cfg["seed"]),
        loss_mode=cfg["train.loss_mode"],
    )
    result = train(data, tcfg, sched)
    save_checkpoint(out / "checkpoint.bin", result.net, result.mean, result.scale)
    rows = [(i, result.losses[i], result.clean_losses[i]) for i in range(len(result.losses))]
    _write_csv(out / "loss.csv", ["iteration", "loss", "clean_loss"], rows, cfg["seed"])
    return 0


def _build_field(cfg, sched, master_seed):
    kind = cfg["sample.field"]
    if kind == "learned":
        if not cfg["sample.checkpoint"]:
            raise ValueError("sample.field=learned requires sample.checkpoint")
        net, mean, scale = load_checkpoint(cfg["sample.checkpoint"])
        return LearnedScore(net, sched), mean, scale, sched.t_min
    data = _dataset(cfg)
    if kind == "empirical-ddpm":
        return EmpiricalDDPMScore(data, sched), np.zeros(data.dim), 1.0, sched.t_min
    t_n = _sigma_to_t(cfg["train.sigma_tn"], sched)
    noisy = noise_sample_set(data, t_n, rng.component_seed("nature-noise", master_seed), sched)
    return EmpiricalAmbientScore(noisy, sched), np.zeros(data.dim), 1.0, t_n


def cmd_sample(cfg: ExperimentConfig, out: Path, args=None) -> int:
    sched = _schedule(cfg)
    field, mean, scale, floor = _build_field(cfg, sched, cfg["seed"])
    steps = cfg["sample.steps"] if args is None or args.steps is None else args.steps
    stop_cfg = cfg["sample.stop_t"] if args is None or args.stop_t is None else args.stop_t
    record = cfg["sample.record"] or bool(args is not None and args.record)
    stop_t = max(stop_cfg, sched.t_min, floor)
    rec = reverse_ode_sample(
        field,
        n=cfg["sample.count"],
        steps=steps,
        stop_t=stop_t,
        seed=rng.component_seed("sample", cfg["seed"]),
        record=record,
    )
    finals = rec.final * scale + mean
    save_points(out / "samples.csv", finals)
    if rec.states is not None:
        np.savez(out / "trajectory.npz", times=rec.state_times, states=rec.states)
    return 0


def _eval_rows(cfg, gen: SampleSet, data: SampleSet, heldout: SampleSet | None):
    report = nn_similarity(gen, data, thresholds=cfg["metrics.sim_thresholds"])
    delta = cfg["metrics.mem_dist_factor"] * data.data_scale
    rows = [("memorization_fraction", delta, memorization_fraction(report, delta))]
    for th, frac in report.threshold_fractions.items():
        rows.append(("nn_similarity_fraction", th, frac))
    rows.append(("mean_similarity", "", report.mean_similarity))
    rows.append(("p95_similarity", "", report.p95_similarity))
    fre = gaussian_frechet(gen, data)
    rows.append(("gaussian_frechet_vs_train", "", fre.value))
    rows.append(("frechet_regularized", "", int(fre.regularized)))
    if heldout is not None:
        m = min(gen.n, heldout.n)
        rows.append(("exact_w2_vs_heldout", "", exact_w2(SampleSet(gen.points[:m]), SampleSet(heldout.points[:m]))))
    return rows


def cmd_eval(cfg: ExperimentConfig, out: Path) -> int:
    if not cfg["eval.gen"]:
        raise ValueError("eval.gen must point to a generated-samples file")
    gen = load_points(cfg["eval.gen"])
    data = _dataset(cfg)
    heldout = None
    if cfg["dataset.kind"] == "gauss_ring":
        heldout = _dataset(cfg, stream_name="heldout", n=cfg["eval.heldout"])
    _write_csv(out / "eval.csv", ["metric", "threshold", "value"], _eval_rows(cfg, gen, data, heldout), cfg["seed"])
    return 0


def run_sweep_leg(cfg, sched, data, sigma_tn, leg_seed, out_dir=None):
    """Train at one nature level, sample, and measure (quality, memorization)."""
    tcfg = TrainConfig(
        t_n=_sigma_to_t(sigma_tn, sched),
        batch=cfg["train.batch"],
        iterations=cfg["train.iterations"],
        learning_rate=cfg["train.lr"],
        seed=rng.component_seed("train", leg_seed),
        loss_mode="hybrid",
    )
    result = train(data, tcfg, sched)
    field = LearnedScore(result.net, sched)
    rec = reverse_ode_sample(
        field,
        n=cfg["sample.count"],
        steps=cfg["sample.steps"],
        stop_t=sched.t_min,
        seed=rng.component_seed("sample", leg_seed),
    )
    gen = SampleSet(rec.final * result.scale + result.mean)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out_dir / "checkpoint.bin", result.net, result.mean, result.scale)
        save_points(out_dir / "samples.csv", gen.points)
    report = nn_similarity(gen, data)
    mem = memorization_fraction(report, cfg["metrics.mem_dist_factor"] * data.data_scale)
    heldout = _dataset(cfg, stream_name="heldout", n=cfg["sample.count"])
    quality = exact_w2(gen, SampleSet(heldout.points[: gen.n]))
    return quality, mem


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    sigmas = cfg["train.sigma_tn_list"]
    if len(sigmas) < 2 or 0.0 not in sigmas:
        raise ValueError("sweep needs >= 2 sigma_tn values including the 0 baseline")
    sched = _schedule(cfg)
    data = _dataset(cfg)
    results, status = [], {}
    for i, s in enumerate(sigmas):
        leg_seed = rng.component_seed(f"sweep-leg-{i}-{s:.6g}", cfg["seed"])
        leg_dir = out / "legs" / f"sigma_{s:.6g}"
        try:
            quality, mem = run_sweep_leg(cfg, sched, data, s, leg_seed, leg_dir)
            results.append((s, quality, mem))
            status[s] = "ok"
        except (TrainingDivergedError, IntegrationDivergedError) as exc:
            status[s] = f"diverged: {exc}"
    rows = []
    if len(results) >= 2:
        for s, q, m, front in pareto_sweep(results):
            rows.append((s, q, m, int(front), status[s]))
    for s in sigmas:
        if status[s] != "ok":
            rows.append((s, "nan", "nan", 0, status[s]))
    rows.sort(key=lambda r: float(r[0]))
    _write_csv(
        out / "sweep.csv",
        ["sigma_tn", "quality_w2", "memorization", "on_frontier", "status"],
        rows,
        cfg["seed"],
    )
    return 0


def cmd_mi(cfg: ExperimentConfig, out: Path) -> int:
    grid = np.linspace(cfg["mi.sigma_min"], cfg["mi.sigma_max"], cfg["mi.points"])
    Sigma = np.eye(cfg["mi.dim"])
    rows = []
    for s in grid:
        res = mi_single_point(Sigma, float(s), cfg["mi.m"])
        rows.append((float(s), res.mi_ambient, res.mi_ddpm, mi_dataset_bound(cfg["mi.dim"], float(s), cfg["mi.m"])))
    _write_csv(out / "mi.csv", ["sigma_tn", "mi_ambient", "mi_ddpm", "bound"], rows, cfg["seed"])
    return 0


def cmd_subpop(cfg: ExperimentConfig, out: Path) -> int:
    n = cfg["subpop.n"]
    prior = FrequencyPrior(pi=tuple(1.0 / j for j in range(1, cfg["subpop.zipf_k"] + 1)), N=cfg["subpop.N"])
    tau_rows = []
    for ell in range(1, n + 1):
        rep = tau_report(ell, n, prior, draws=cfg["subpop.draws"], seed=cfg["seed"])
        tau_rows.append((ell, rep.value, rep.method, "" if rep.cross_check is None else rep.cross_check))
    _write_csv(out / "subpop_tau.csv", ["ell", "tau", "method", "quadrature"], tau_rows, cfg["seed"])

    intervals = [(0.0, 1.0), (0.0, 1.0 / n), (1.0 / (2 * n), 1.0 / n), (1.0 / (3 * n), 2.0 / n)]
    weight_rows = [(a, b, weight(prior, (a, b), draws=cfg["subpop.draws"], seed=cfg["seed"])) for a, b in intervals]
    t1, lower, upper = tau1_bounds_check(prior, n, draws=cfg["subpop.draws"], seed=cfg["seed"])
    weight_rows.append(("tau1", t1, f"lower={lower} upper={upper}"))
    _write_csv(out / "subpop_weight.csv", ["lo", "hi", "weight"], weight_rows, cfg["seed"])

    instance = MixtureInstance(
        supports=((0, 1), (2,), (3, 4)),
        prior=FrequencyPrior(pi=(0.2, 1.0), N=3),
        dataset=(0, 2),
        loss={0: 0.7, 1: 0.3, 2: 1.1, 3: 0.25, 4: 0.5},
    )
    lhs, rhs, gap = error_decomposition_check(instance)
    _write_csv(out / "subpop_decomp.csv", ["lhs", "rhs", "gap"], [(lhs, rhs, gap)], cfg["seed"])
    return 0


def cmd_gmm(cfg: ExperimentConfig, out: Path) -> int:
    mu1 = np.zeros(2)
    mu2 = np.array([cfg["gmm.gap"], 0.0])
    eps = cfg["gmm.epsilon"]
    rows = []
    for s in np.linspace(0.0, 0.99, cfg["gmm.points"]):
        rows.append((float(s), tv_at_noise(mu1, mu2, float(s)), merge_and_separation_status(mu1, mu2, float(s), eps)))
    _write_csv(out / "gmm.csv", ["sigma_t", "tv", "status"], rows, cfg["seed"])
    return 0


_COMMANDS = {
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "mi": cmd_mi,
    "subpop": cmd_subpop,
    "gmm": cmd_gmm,
}


def main(argv=None) -> int:
    parser = _Parser(prog="scorelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", required=True, help="output directory")
        if name == "sample":
            p.add_argument("--steps", type=int, default=None, help="integration steps")
            p.add_argument("--stop-t", type=float, default=None, dest="stop_t", help="stop time")
            p.add_argument("--record", action="store_true", help="record thinned trajectories")
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.override_seed(args.seed)
        out = Path(args.out)
        _prepare_out(cfg, out)
        if args.command == "sample":
            return cmd_sample(cfg, out, args)
        return _COMMANDS[args.command](cfg, out)
    except Exception as exc:  # noqa: BLE001 - boundary: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
