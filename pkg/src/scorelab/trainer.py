r"""Denoiser training: plain objective, noisy-data objective, hybrid loop.

The hybrid loop splits diffusion time at a nature level t_n.  The training
set is noised once at t_n; batches are drawn uniformly from the union of
the clean and noisy sets.  Noisy draws get a time in (t_n, T], additional
bridge noise and the noisy-target loss

    || a h(x_t, t) + b x_t - x_{t_n} ||^2,

whose minimizer is the same posterior-mean denoiser E[x_0|x_t] the plain
loss ||h(x_t, t) - x_0||^2 learns; clean draws get a time in [0, t_n] and
the plain loss.  The boundary time t = t_n belongs to the clean side; a
noisy draw that lands exactly on t_n (possible only when t_n = T)
contributes the continuous limit a -> 0, b -> 1 of the noisy loss, which
is identically zero.

Gradients are exact (hand backprop), reduced over the batch in ascending
slot order; the optimizer is Adam.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import rng
from .network import HIDDEN, N_FREQ, DenoiserNet
from .samples import SampleSet, noise_sample_set
from .schedule import NoiseSchedule
from .scores import ambient_denoiser_coeffs

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "Adam",
    "loss_ddpm",
    "loss_ambient",
    "hybrid_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

_MAGIC = b"SCORELAB"
_CKPT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"training loss became non-finite at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    t_n: float
    batch: int = 64
    iterations: int = 2000
    learning_rate: float = 1e-3
    seed: int = 0
    loss_mode: str = "hybrid"  # ddpm | ambient | hybrid
    lr_decay: str = "none"  # none | linear (anneal to 0 over the run)

    def __post_init__(self):
        if not 0.0 <= self.t_n <= 1.0:
            raise ValueError("t_n must lie in [0, t_max]")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.loss_mode not in ("ddpm", "ambient", "hybrid"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.lr_decay not in ("none", "linear"):
            raise ValueError(f"unknown lr decay {self.lr_decay!r}")


class Adam:
    """Adam with bias correction; betas (0.9, 0.999), eps 1e-8."""

    def __init__(self, n_params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def update(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- losses -----------------------------------------------------------------


def _batch_loss_grad(net, x_t, sigmas, a, b, target):
    """Per-sample losses ||a h + b x_t - target||^2 and the exact gradient
    of their sum.

    a, b are per-sample scalars; the batch gradient is the sum over slots
    (callers divide by the batch size for a mean loss).
    """
    cache = {}
    h = net.forward(x_t, sigmas, _cache=cache)
    r = a[:, None] * h + b[:, None] * x_t - target
    per_sample = np.sum(r * r, axis=1)
    grad = net.backward(cache, 2.0 * a[:, None] * r)
    return per_sample, grad


def loss_ddpm(net, x0, t, eps, sched: NoiseSchedule):
    """Plain denoising loss ||h(x_t, t) - x_0||^2 at one draw, with gradient."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    sigma = sched.sigma(t)
    x_t = sched.alpha(t) * x0 + sigma * eps
    one, zero = np.ones(x0.shape[0]), np.zeros(x0.shape[0])
    per, grad = _batch_loss_grad(net, x_t, np.full(x0.shape[0], sigma), one, zero, x0)
    return float(per.sum()), grad


def loss_ambient(net, x_tn, t, t_n, eps, sched: NoiseSchedule):
    """Noisy-target loss at one draw, with gradient; requires t > t_n."""
    if not t > t_n:
        raise ValueError("ambient loss requires t > t_n")
    x_tn = np.atleast_2d(np.asarray(x_tn, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    c1, c2 = sched.bridge_coeffs(t, t_n)
    x_t = c1 * x_tn + c2 * eps
    a, b = ambient_denoiser_coeffs(t, t_n, sched)
    B = x_tn.shape[0]
    per, grad = _batch_loss_grad(
        net, x_t, np.full(B, sched.sigma(t)), np.full(B, a), np.full(B, b), x_tn
    )
    return float(per.sum()), grad


# -- hybrid step --------------------------------------------------------------


def _ambient_coeff_arrays(s_t2, s_n2):
    """Vectorized (a, b) with the t == t_n limit (a=0, b=1) built in."""
    gap = s_t2 - s_n2
    at_floor = gap <= 0.0
    denom = np.where(at_floor, 1.0, s_t2)
    a = np.where(at_floor, 0.0, gap / (denom * np.sqrt(1.0 - s_n2)))
    b = np.where(at_floor, 1.0, (s_n2 / denom) * np.sqrt((1.0 - s_t2) / (1.0 - s_n2)))
    return a, b


def hybrid_step(
    net: DenoiserNet,
    clean: SampleSet,
    noisy: SampleSet,
    cfg: TrainConfig,
    gen: np.random.Generator,
    opt: Adam,
    sched: NoiseSchedule,
    stats: dict | None = None,
) -> float:
    """One optimizer update on a batch drawn uniformly from S union S_{t_n}.

    Returns the mean batch loss.  Membership decides the branch; when
    sigma_{t_n} = 0 the two sets coincide, so every draw is a member of the
    noisy set and takes the noisy branch (which then equals the plain loss).
    """
    if clean.n == 0 or noisy.n == 0:
        raise ValueError("empty sample sets")
    if clean.n != noisy.n:
        raise ValueError("clean and noisy sets must have equal size")
    n, d = clean.n, clean.dim
    t_n = float(noisy.noised_at)
    s_n2 = sched.sigma(t_n) ** 2
    T = sched.t_max

    idx = gen.integers(0, 2 * n, size=cfg.batch)
    u = gen.random(cfg.batch)
    eps = gen.standard_normal((cfg.batch, d))

    is_noisy = (idx >= n) | (s_n2 == 0.0)
    t = np.where(is_noisy, t_n + u * (T - t_n), u * t_n)
    sigmas = np.asarray(sched.sigma(t))
    s_t2 = sigmas**2

    base = np.where(is_noisy[:, None], noisy.points[idx % n], clean.points[idx % n])
    c1 = np.sqrt((1.0 - s_t2) / (1.0 - s_n2))
    c2 = np.sqrt(np.maximum(s_t2 - s_n2, 0.0) / (1.0 - s_n2))
    # clean branch: x_t = alpha_t x0 + sigma_t eps; noisy branch: bridge
    scale1 = np.where(is_noisy, c1, np.sqrt(1.0 - s_t2))
    scale2 = np.where(is_noisy, c2, sigmas)
    x_t = scale1[:, None] * base + scale2[:, None] * eps

    a_n, b_n = _ambient_coeff_arrays(s_t2, s_n2)
    a = np.where(is_noisy, a_n, 1.0)
    b = np.where(is_noisy, b_n, 0.0)

    per, grad_sum = _batch_loss_grad(net, x_t, sigmas, a, b, base)
    loss = float(per.sum()) / cfg.batch
    net.params = opt.update(net.params, grad_sum / cfg.batch)

    if stats is not None:
        stats["clean"] = stats.get("clean", 0) + int(np.sum(~is_noisy))
        stats["noisy"] = stats.get("noisy", 0) + int(np.sum(is_noisy))
        stats["clean_loss"] = stats.get("clean_loss", 0.0) + float(per[~is_noisy].sum())
        stats["noisy_loss"] = stats.get("noisy_loss", 0.0) + float(per[is_noisy].sum())
    return loss


# -- full runs ----------------------------------------------------------------


@dataclass
class TrainResult:
    net: DenoiserNet
    losses: np.ndarray  # mean batch loss per iteration
    clean_losses: np.ndarray  # mean clean-branch loss per iteration (nan if none)
    mean: np.ndarray  # data normalizer: x_model = (x - mean) / scale
    scale: float
    noisy_set: SampleSet | None


def train(data: SampleSet, cfg: TrainConfig, sched: NoiseSchedule) -> TrainResult:
    """Run the configured training loop and return the final network.

    Data is centered and scaled to unit coordinate RMS before training;
    the normalizer travels with the network in checkpoints.  The noisy set
    is constructed exactly once, before the loop.
    """
    if data.n < 2:
        raise ValueError("need at least 2 training points")
    mean = data.points.mean(axis=0)
    centered = data.points - mean
    scale = float(np.sqrt(np.mean(centered**2))) or 1.0
    clean = SampleSet(centered / scale)

    net = DenoiserNet.initialized(clean.dim, rng.component_seed("net-init", cfg.seed))
    opt = Adam(net.n_params, learning_rate=cfg.learning_rate)
    gen = rng.stream("train-batches", cfg.seed)

    noisy = None
    if cfg.loss_mode in ("ambient", "hybrid"):
        noisy = noise_sample_set(clean, cfg.t_n, rng.component_seed("nature-noise", cfg.seed), sched)

    losses = np.empty(cfg.iterations)
    clean_losses = np.full(cfg.iterations, np.nan)
    T = sched.t_max
    for it in range(cfg.iterations):
        if cfg.lr_decay == "linear":
            opt.lr = cfg.learning_rate * (1.0 - it / cfg.iterations)
        if cfg.loss_mode == "hybrid":
            losses[it] = hybrid_step(net, clean, noisy, cfg, gen, opt, sched)
            clean_losses[it] = _clean_branch_loss(net, clean, cfg, sched)
        elif cfg.loss_mode == "ddpm":
            idx = gen.integers(0, clean.n, size=cfg.batch)
            t = gen.random(cfg.batch) * T
            eps = gen.standard_normal((cfg.batch, clean.dim))
            losses[it], grad = _ddpm_batch(net, clean.points[idx], t, eps, sched, cfg.batch)
            net.params = opt.update(net.params, grad)
            clean_losses[it] = losses[it]
        else:  # ambient
            idx = gen.integers(0, noisy.n, size=cfg.batch)
            t = cfg.t_n + gen.random(cfg.batch) * (T - cfg.t_n)
            eps = gen.standard_normal((cfg.batch, clean.dim))
            losses[it] = _ambient_batch(net, noisy, idx, t, eps, sched, cfg, opt)
        if not np.isfinite(losses[it]):
            raise TrainingDivergedError(it)
    return TrainResult(net=net, losses=losses, clean_losses=clean_losses, mean=mean, scale=scale, noisy_set=noisy)


def _ddpm_batch(net, x0, t, eps, sched, batch):
    sigmas = np.asarray(sched.sigma(t))
    x_t = np.sqrt(1.0 - sigmas**2)[:, None] * x0 + sigmas[:, None] * eps
    per, grad = _batch_loss_grad(net, x_t, sigmas, np.ones(batch), np.zeros(batch), x0)
    return float(per.sum()) / batch, grad / batch


def _ambient_batch(net, noisy, idx, t, eps, sched, cfg, opt):
    x_tn = noisy.points[idx]
    s_t2 = np.asarray(sched.sigma(t)) ** 2
    s_n2 = sched.sigma(cfg.t_n) ** 2
    c1 = np.sqrt((1.0 - s_t2) / (1.0 - s_n2))
    c2 = np.sqrt(np.maximum(s_t2 - s_n2, 0.0) / (1.0 - s_n2))
    x_t = c1[:, None] * x_tn + c2[:, None] * eps
    a, b = _ambient_coeff_arrays(s_t2, s_n2)
    per, grad = _batch_loss_grad(net, x_t, np.sqrt(s_t2), a, b, x_tn)
    net.params = opt.update(net.params, grad / cfg.batch)
    return float(per.sum()) / cfg.batch


def _clean_branch_loss(net, clean, cfg, sched):
    """Diagnostic: plain loss over the whole clean set at a fixed mid time.

    Uses a deterministic probe (no RNG draws) so it never perturbs the
    training stream.
    """
    t = 0.5 * max(cfg.t_n, sched.t_min)
    sigma = sched.sigma(t)
    x_t = sched.alpha(t) * clean.points  # noiseless probe at the posterior mean input
    h = net.forward(x_t, np.full(clean.n, sigma))
    return float(np.mean(np.sum((h - clean.points) ** 2, axis=1)))


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, net: DenoiserNet, mean, scale):
    """Versioned binary container; parameters as little-endian float64."""
    mean = np.asarray(mean, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", _CKPT_VERSION, net.dim, HIDDEN, N_FREQ))
        fh.write(struct.pack("<I", mean.size))
        fh.write(mean.astype("<f8").tobytes())
        fh.write(struct.pack("<d", float(scale)))
        fh.write(struct.pack("<Q", net.n_params))
        fh.write(net.params.astype("<f8").tobytes())


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; bit-exact round trip."""
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a scorelab checkpoint")
        version, dim, hidden, n_freq = struct.unpack("<IIII", fh.read(16))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        if hidden != HIDDEN or n_freq != N_FREQ:
            raise ValueError(f"{path}: architecture mismatch")
        (mean_size,) = struct.unpack("<I", fh.read(4))
        mean = np.frombuffer(fh.read(8 * mean_size), dtype="<f8").copy()
        (scale,) = struct.unpack("<d", fh.read(8))
        (n_params,) = struct.unpack("<Q", fh.read(8))
        params = np.frombuffer(fh.read(8 * n_params), dtype="<f8").copy()
    net = DenoiserNet(dim, params)
    return net, mean, scale
