"""Adversarial training loop with an optional distribution-fitting penalty."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import DEFAULT_STD_EPS, Node, Tape
from .fitting import PenaltyMode, RunningStats, StatsSnapshot, penalty, running_update, snapshot
from .mixture import MixtureSpec, closed_form_stats, dataset_pass_stats, sample
from .nn import AdamState, MlpSpec, Params, adam_step, discriminator_spec, forward, generator_spec, init_params

LOG_CLAMP = 1e-7


class TrainingDiverged(FloatingPointError):
    def __init__(self, iteration: int, what: str, seed: Optional[int] = None):
        where = f"seed {seed}, " if seed is not None else ""
        super().__init__(f"non-finite {what} at {where}iteration {iteration}")
        self.iteration = iteration
        self.what = what
        self.seed = seed

    def __reduce__(self):
        return (type(self), (self.iteration, self.what, self.seed))


@dataclass(frozen=True)
class TrainConfig:
    generator: MlpSpec = field(default_factory=generator_spec)
    discriminator: MlpSpec = field(default_factory=discriminator_spec)
    noise_dim: int = 256
    lr_g: float = 1e-3
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 512
    iterations: int = 5000
    penalty: Literal["none", "gdf", "ldf"] = "none"
    penalty_weight: float = 1.0
    # where the GDF target comes from
    target_stats: Literal["closed_form", "dataset_pass"] = "closed_form"
    dataset_size: int = 100_000
    std_eps: float = DEFAULT_STD_EPS
    g_loss: Literal["non_saturating", "saturating"] = "non_saturating"
    d_steps_per_g_step: int = 1
    seed: int = 0
    snapshot_every: int = 500
    dump_size: int = 512

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not (self.lr_g > 0 and self.lr_d > 0):
            raise ValueError("learning rates must be positive")
        if self.d_steps_per_g_step < 1:
            raise ValueError("d_steps_per_g_step must be at least 1")
        if self.snapshot_every < 1 or self.dump_size < 1:
            raise ValueError("snapshot_every and dump_size must be positive")
        if self.generator.layer_sizes[0] != self.noise_dim:
            raise ValueError("generator input size must equal noise_dim")
        if self.generator.layer_sizes[-1] != self.discriminator.layer_sizes[0]:
            raise ValueError("generator output must feed the discriminator input")
        if self.penalty not in ("none", "gdf", "ldf"):
            raise ValueError(f"unknown penalty {self.penalty!r}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["generator"] = self.generator.to_dict()
        d["discriminator"] = self.discriminator.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        for key in ("generator", "discriminator"):
            if key in d and isinstance(d[key], dict):
                d[key] = MlpSpec.from_dict(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Snapshot:
    iteration: int
    samples: np.ndarray
    loss_d: float
    loss_g: float
    penalty: float
    d_real_mean: float
    d_fake_mean: float


@dataclass
class RunLog:
    config: TrainConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    target: Optional[StatsSnapshot] = None
    accumulator: Optional[StatsSnapshot] = None
    final_generated: Optional[StatsSnapshot] = None
    wall_clock_s: float = 0.0
    generator: Optional[Params] = None
    discriminator: Optional[Params] = None


def _clamped_log(x: Node) -> Node:
    return ad.log(ad.clip(x, LOG_CLAMP, 1.0 - LOG_CLAMP))


def d_loss(d_real: Node, d_fake: Node) -> Node:
    """``-mean(log D(x)) - mean(log(1 - D(G(z))))`` with outputs clamped."""
    real = ad.mean_all(_clamped_log(d_real))
    fake = ad.mean_all(ad.log(ad.one_minus(ad.clip(d_fake, LOG_CLAMP, 1.0 - LOG_CLAMP))))
    return ad.neg(ad.add(real, fake))


def adversarial_g_loss(d_fake: Node, kind: str = "non_saturating") -> Node:
    if kind == "non_saturating":
        return ad.neg(ad.mean_all(_clamped_log(d_fake)))
    if kind == "saturating":
        return ad.mean_all(ad.log(ad.one_minus(ad.clip(d_fake, LOG_CLAMP, 1.0 - LOG_CLAMP))))
    raise ValueError(f"unknown generator loss {kind!r}")


def g_loss(d_fake: Node, generated: Node, penalty_mode: PenaltyMode,
           kind: str = "non_saturating", epsilon: float = DEFAULT_STD_EPS) -> tuple[Node, Node]:
    """Adversarial term plus weighted penalty; returns ``(total, penalty)``."""
    adv = adversarial_g_loss(d_fake, kind)
    pen = penalty(generated, penalty_mode, epsilon)
    if penalty_mode.kind == "none":
        return adv, pen
    return ad.add(adv, ad.scale(pen, penalty_mode.weight)), pen


def gdf_target(config: TrainConfig, spec: MixtureSpec) -> StatsSnapshot:
    if config.target_stats == "closed_form":
        return closed_form_stats(spec)
    # separate stream so the training draws are unaffected by this choice
    rng = np.random.default_rng([config.seed, 1])
    return dataset_pass_stats(sample(spec, config.dataset_size, rng).samples)


def make_penalty_mode(config: TrainConfig, spec: MixtureSpec) -> PenaltyMode:
    if config.penalty == "gdf":
        return PenaltyMode.gdf(gdf_target(config, spec), config.penalty_weight)
    if config.penalty == "ldf":
        return PenaltyMode.ldf(config.discriminator.layer_sizes[0], config.penalty_weight)
    return PenaltyMode("none", config.penalty_weight)


def generate(spec: MlpSpec, params: Params, noise: np.ndarray) -> np.ndarray:
    with Tape():
        return forward(spec, params.frozen(), ad.constant(noise)).value


def train(config: TrainConfig, spec: MixtureSpec) -> RunLog:
    """Run the alternating D/G loop and return the logged snapshots.

    Per iteration: draw a real batch (folded into the LDF accumulator first),
    take ``d_steps_per_g_step`` discriminator steps, then one generator step
    on fresh noise.  All randomness comes from one PCG64 stream seeded by
    ``config.seed``.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    g_params = init_params(config.generator, rng)
    d_params = init_params(config.discriminator, rng)
    g_opt = AdamState.for_params(g_params, config.lr_g, config.beta1, config.beta2, config.adam_eps)
    d_opt = AdamState.for_params(d_params, config.lr_d, config.beta1, config.beta2, config.adam_eps)
    mode = make_penalty_mode(config, spec)
    dump_noise = rng.standard_normal((config.dump_size, config.noise_dim))

    log = RunLog(config, target=mode.target)
    b = config.batch_size
    for it in range(1, config.iterations + 1):
        for _ in range(config.d_steps_per_g_step):
            real = sample(spec, b, rng).samples
            if mode.kind == "ldf":
                running_update(mode.accumulator, real)
            fake = generate(config.generator, g_params, rng.standard_normal((b, config.noise_dim)))
            with Tape() as tape:
                d_real = forward(config.discriminator, d_params, ad.constant(real))
                d_fake = forward(config.discriminator, d_params, ad.constant(fake))
                ld = d_loss(d_real, d_fake)
                backward_checked(tape, ld, it, "discriminator loss", config.seed)
            _step(d_opt, d_params, it, config.seed)

        with Tape() as tape:
            z = ad.constant(rng.standard_normal((b, config.noise_dim)))
            generated = forward(config.generator, g_params, z)
            d_gen = forward(config.discriminator, d_params.frozen(), generated)
            lg, pen = g_loss(d_gen, generated, mode, config.g_loss, config.std_eps)
            backward_checked(tape, lg, it, "generator loss", config.seed)
        _step(g_opt, g_params, it, config.seed)

        if it % config.snapshot_every == 0 or it == config.iterations or it == 1:
            log.snapshots.append(Snapshot(
                iteration=it,
                samples=generate(config.generator, g_params, dump_noise),
                loss_d=float(ld.value[0, 0]),
                loss_g=float(lg.value[0, 0]),
                penalty=float(pen.value[0, 0]),
                d_real_mean=float(d_real.value.mean()),
                d_fake_mean=float(d_fake.value.mean()),
            ))
            if not np.all(np.isfinite(log.snapshots[-1].samples)):
                raise TrainingDiverged(it, "generated samples", config.seed)

    if mode.kind == "ldf":
        log.accumulator = snapshot(mode.accumulator)
    log.final_generated = dataset_pass_stats(log.snapshots[-1].samples)
    log.generator = g_params
    log.discriminator = d_params
    log.wall_clock_s = time.perf_counter() - start
    return log


def backward_checked(tape: Tape, loss: Node, iteration: int, what: str, seed: int) -> None:
    if not np.isfinite(loss.value[0, 0]):
        raise TrainingDiverged(iteration, what, seed)
    ad.backward(tape, loss)


def _step(state: AdamState, params: Params, iteration: int, seed: int) -> None:
    try:
        adam_step(state, params)
    except FloatingPointError as exc:
        raise TrainingDiverged(iteration, str(exc).removeprefix("non-finite "), seed) from None
