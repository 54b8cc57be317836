"""Two-phase training: conditional GAN warm-up, then distillation.

Phase one trains generator and discriminator adversarially on the real
data. Phase two freezes the discriminator, samples a classifier from the
model pool each step, and updates the generator on the combined objective
(adversarial term plus weighted distribution-matching term). The whole
procedure is deterministic given the schedule seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from .checkpoint import CheckpointBundle, bundle_module
from .data import LabeledImageDataset
from .errors import DegenerateLogits, NonFiniteLoss, ShapeMismatch
from .losses import DistillScalars, combine_total_loss, skd_loss
from .networks import (
    ClassifierSpec,
    ConditionalDiscriminator,
    ConditionalGenerator,
    DiscriminatorSpec,
    GeneratorSpec,
    ModelPool,
    forward_logits,
    init_gan_weights,
    sample_model,
)
from .seeding import derive_seed, make_generator

# Probabilities are clamped away from {0, 1} before the adversarial logs.
SCORE_EPS = 1e-7
ADAM_BETAS = (0.5, 0.999)


@dataclass
class TrainSchedule:
    gan_steps: int = 2000
    distill_steps: int = 2000
    batch_size: int = 64
    lr_generator: float = 2e-4
    lr_discriminator: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if self.gan_steps < 0 or self.distill_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ValueError("learning rates must be > 0")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    l_cgan: float
    l_skd: float
    l_total: float
    arch_id: str


@dataclass
class MetricsTrace:
    """Append-only per-step loss log with a tab-separated file form."""

    records: list[TraceRecord] = field(default_factory=list)

    HEADER = "# step\tl_cgan\tl_skd\tl_total\tarch_id"

    def append(self, step: int, l_cgan: float, l_skd: float, l_total: float, arch_id: str) -> None:
        if self.records and step <= self.records[-1].step:
            raise ValueError(f"step {step} does not increase past {self.records[-1].step}")
        self.records.append(TraceRecord(step, l_cgan, l_skd, l_total, arch_id))

    def __len__(self) -> int:
        return len(self.records)

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.HEADER + "\n")
            for r in self.records:
                f.write(f"{r.step}\t{r.l_cgan:.17g}\t{r.l_skd:.17g}\t{r.l_total:.17g}\t{r.arch_id}\n")

    @classmethod
    def read(cls, path) -> "MetricsTrace":
        trace = cls()
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                step, l_cgan, l_skd, l_total, arch_id = line.split("\t")
                trace.append(int(step), float(l_cgan), float(l_skd), float(l_total), arch_id)
        return trace


@dataclass
class DistillationConfig:
    """Everything run_distillation needs besides the dataset itself."""

    generator: GeneratorSpec
    discriminator: DiscriminatorSpec
    pool: list[ClassifierSpec]
    scalars: DistillScalars
    schedule: TrainSchedule
    refresh_interval: int = 100
    standardize: bool = True


def _clamped_scores(disc, images, labels) -> torch.Tensor:
    return disc(images, labels).clamp(SCORE_EPS, 1.0 - SCORE_EPS)


def cgan_discriminator_step(
    disc: ConditionalDiscriminator,
    gen: ConditionalGenerator,
    real_images: torch.Tensor,
    labels: torch.Tensor,
    rng: torch.Generator,
    optimizer: torch.optim.Optimizer,
) -> float:
    """One minimax discriminator update; returns the loss before the step."""
    if len(real_images) != len(labels):
        raise ShapeMismatch(f"{len(real_images)} images vs {len(labels)} labels")
    noise = torch.randn(len(labels), gen.spec.noise_dim, generator=rng)
    with torch.no_grad():
        fake = gen(noise, labels)
    real_p = _clamped_scores(disc, real_images, labels)
    fake_p = _clamped_scores(disc, fake, labels)
    loss = -(torch.log(real_p).mean() + torch.log(1.0 - fake_p).mean())
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def cgan_generator_step(
    disc: ConditionalDiscriminator,
    gen: ConditionalGenerator,
    labels: torch.Tensor,
    rng: torch.Generator,
    optimizer: torch.optim.Optimizer,
) -> float:
    """One non-saturating generator update against a frozen discriminator."""
    noise = torch.randn(len(labels), gen.spec.noise_dim, generator=rng)
    frozen = [p for p in disc.parameters() if p.requires_grad]
    for p in frozen:
        p.requires_grad_(False)
    try:
        fake = gen(noise, labels)
        p_fake = _clamped_scores(disc, fake, labels)
        loss = -torch.log(p_fake).mean()
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    finally:
        for p in frozen:
            p.requires_grad_(True)
    return float(loss.detach())


def distill_step(
    gen: ConditionalGenerator,
    disc: ConditionalDiscriminator,
    pool: ModelPool,
    original_images: torch.Tensor,
    labels: torch.Tensor,
    scalars: DistillScalars,
    rng: torch.Generator,
    optimizer: torch.optim.Optimizer,
    standardize: bool = True,
) -> tuple[float, float, float, str]:
    """One generator update on the combined objective.

    The synthetic batch reuses the original batch's labels position by
    position. Original logits are a constant teacher signal: no gradient
    reaches the classifier or the original images. Returns
    (l_total, l_cgan, l_skd, architecture_id) as plain floats, where
    l_total is recombined from the logged floats so the composition
    identity holds exactly on the trace.
    """
    if len(original_images) != len(labels):
        raise ShapeMismatch(f"{len(original_images)} images vs {len(labels)} labels")
    # Noise is drawn before the pool is consulted so that, with
    # lambda_skd = 0, the update matches cgan_generator_step exactly.
    noise = torch.randn(len(labels), gen.spec.noise_dim, generator=rng)
    model = sample_model(pool, rng)
    arch_id = model.spec.architecture_id

    synthetic = gen(noise, labels)
    with torch.no_grad():
        logits_original = forward_logits(model, original_images)
    logits_synthetic = forward_logits(model, synthetic)
    try:
        l_skd = skd_loss(logits_original, logits_synthetic, scalars.tau, standardize=standardize)
    except DegenerateLogits as e:
        raise DegenerateLogits(f"[architecture {arch_id}] {e}") from e

    p_fake = _clamped_scores(disc, synthetic, labels)
    l_cgan = -torch.log(p_fake).mean()
    l_total = combine_total_loss(l_cgan, l_skd, scalars)

    optimizer.zero_grad()
    l_total.backward()
    optimizer.step()

    l_cgan_f, l_skd_f = float(l_cgan.detach()), float(l_skd.detach())
    return combine_total_loss(l_cgan_f, l_skd_f, scalars), l_cgan_f, l_skd_f, arch_id


def _check_finite(step: int, **losses: float) -> None:
    for name, value in losses.items():
        if not math.isfinite(value):
            raise NonFiniteLoss(f"step {step}: {name} = {value}")


def run_distillation(
    dataset: LabeledImageDataset, config: DistillationConfig
) -> tuple[CheckpointBundle, MetricsTrace]:
    """Run both phases and return the generator checkpoint plus the full trace."""
    schedule = config.schedule
    base = schedule.seed
    noise_rng = make_generator(derive_seed(base, "noise"))
    data_rng = make_generator(derive_seed(base, "data"))
    distill_rng = make_generator(derive_seed(base, "distill"))

    gen = ConditionalGenerator(config.generator)
    init_gan_weights(gen, make_generator(derive_seed(base, "generator-init")))
    disc = ConditionalDiscriminator(config.discriminator)
    init_gan_weights(disc, make_generator(derive_seed(base, "discriminator-init")))
    gen.train()
    disc.train()

    opt_g = torch.optim.Adam(gen.parameters(), lr=schedule.lr_generator, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(disc.parameters(), lr=schedule.lr_discriminator, betas=ADAM_BETAS)

    def draw_batch() -> tuple[torch.Tensor, torch.Tensor]:
        idx = torch.randint(len(dataset), (schedule.batch_size,), generator=data_rng)
        return dataset.images[idx], dataset.labels[idx]

    trace = MetricsTrace()
    step = 0
    for _ in range(schedule.gan_steps):
        step += 1
        real, labels = draw_batch()
        d_loss = cgan_discriminator_step(disc, gen, real, labels, noise_rng, opt_d)
        g_loss = cgan_generator_step(disc, gen, labels, noise_rng, opt_g)
        _check_finite(step, d_loss=d_loss, g_loss=g_loss)
        trace.append(step, g_loss, 0.0, combine_total_loss(g_loss, 0.0, config.scalars), "-")

    if schedule.distill_steps > 0:
        for p in disc.parameters():
            p.requires_grad_(False)
        pool = ModelPool(
            config.pool,
            refresh_interval=config.refresh_interval,
            seed=derive_seed(base, "pool"),
        )
        for _ in range(schedule.distill_steps):
            step += 1
            real, labels = draw_batch()
            l_total, l_cgan, l_skd, arch_id = distill_step(
                gen,
                disc,
                pool,
                real,
                labels,
                config.scalars,
                distill_rng,
                opt_g,
                standardize=config.standardize,
            )
            _check_finite(step, l_total=l_total, l_cgan=l_cgan, l_skd=l_skd)
            trace.append(step, l_cgan, l_skd, l_total, arch_id)

    gen.eval()
    rng_state = bytes(noise_rng.get_state().numpy().tobytes())
    return bundle_module(gen, step=step, rng_state=rng_state), trace
