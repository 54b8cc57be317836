"""Conditional generator/discriminator and the classifier architectures.

All modules carry their construction spec on a ``.spec`` attribute so
checkpoints and shape checks can recover it. Supported canvas sizes are
28x28 and 32x32 with 1 or 3 channels, which covers the three benchmark
datasets this toolkit targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .errors import EmptyPool, LabelOutOfRange, ShapeMismatch, UnknownArchitecture
from .seeding import derive_seed, make_generator

ARCHITECTURES = ("ConvNet3", "ResNet10", "ResNet18", "AlexNet", "VGG11")

_SIZES = (28, 32)


def _check_image_shape(image_shape) -> tuple[int, int, int]:
    c, h, w = image_shape
    if c not in (1, 3) or h != w or h not in _SIZES:
        raise ValueError(f"unsupported image shape {tuple(image_shape)}; need (1|3, 28|32, 28|32)")
    return int(c), int(h), int(w)


def _check_labels(labels: torch.Tensor, num_classes: int) -> torch.Tensor:
    labels = torch.as_tensor(labels)
    if labels.ndim != 1:
        raise ShapeMismatch(f"labels must be a 1-D vector, got shape {tuple(labels.shape)}")
    if labels.numel() > 0 and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelOutOfRange(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{int(labels.min())}, {int(labels.max())}]"
        )
    return labels.long()


def _scaled(base: int, width_multiplier: float) -> int:
    return max(1, int(round(base * width_multiplier)))


@dataclass(frozen=True)
class GeneratorSpec:
    noise_dim: int = 100
    num_classes: int = 10
    image_shape: tuple[int, int, int] = (1, 28, 28)
    width_multiplier: float = 1.0

    def __post_init__(self):
        if self.noise_dim < 1 or self.num_classes < 2 or self.width_multiplier <= 0:
            raise ValueError(f"invalid generator spec: {self}")
        _check_image_shape(self.image_shape)


@dataclass(frozen=True)
class DiscriminatorSpec:
    num_classes: int = 10
    image_shape: tuple[int, int, int] = (1, 28, 28)
    width_multiplier: float = 1.0

    def __post_init__(self):
        if self.num_classes < 2 or self.width_multiplier <= 0:
            raise ValueError(f"invalid discriminator spec: {self}")
        _check_image_shape(self.image_shape)


@dataclass(frozen=True)
class ClassifierSpec:
    architecture_id: str
    num_classes: int = 10
    image_shape: tuple[int, int, int] = (1, 28, 28)
    width_multiplier: float = 1.0

    def __post_init__(self):
        if self.architecture_id not in ARCHITECTURES:
            raise UnknownArchitecture(
                f"unknown architecture '{self.architecture_id}'; expected one of {ARCHITECTURES}"
            )
        if self.num_classes < 2 or self.width_multiplier <= 0:
            raise ValueError(f"invalid classifier spec: {self}")
        _check_image_shape(self.image_shape)


class ConditionalGenerator(nn.Module):
    """DCGAN-style generator conditioned by one-hot labels at the input.

    Noise and one-hot label are concatenated, projected to a 4x4 feature
    map, and upsampled by transposed convolutions to the target size.
    Tanh bounds all pixels to [-1, 1].
    """

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        c, h, _ = _check_image_shape(spec.image_shape)
        wm = spec.width_multiplier
        c128, c64, c32 = _scaled(128, wm), _scaled(64, wm), _scaled(32, wm)
        self._base_channels = c128
        self.project = nn.Linear(spec.noise_dim + spec.num_classes, c128 * 4 * 4)
        head = [nn.BatchNorm2d(c128), nn.ReLU(inplace=True)]
        if h == 28:
            # 4 -> 7 -> 14 -> 28
            first = nn.ConvTranspose2d(c128, c64, 4, stride=1, padding=0, bias=False)
        else:
            # 4 -> 8 -> 16 -> 32
            first = nn.ConvTranspose2d(c128, c64, 4, stride=2, padding=1, bias=False)
        self.upsample = nn.Sequential(
            *head,
            first,
            nn.BatchNorm2d(c64),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(c64, c32, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c32),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(c32, c, 4, stride=2, padding=1),
            nn.Tanh(),
        )

    def forward(self, noise: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        labels = _check_labels(labels, self.spec.num_classes)
        if noise.ndim != 2 or noise.shape[1] != self.spec.noise_dim:
            raise ShapeMismatch(
                f"noise must be B x {self.spec.noise_dim}, got {tuple(noise.shape)}"
            )
        if noise.shape[0] != labels.shape[0]:
            raise ShapeMismatch(f"{noise.shape[0]} noise rows vs {labels.shape[0]} labels")
        onehot = F.one_hot(labels, self.spec.num_classes).to(noise.dtype)
        x = self.project(torch.cat([noise, onehot], dim=1))
        x = x.view(-1, self._base_channels, 4, 4)
        return self.upsample(x)


class ConditionalDiscriminator(nn.Module):
    """Convolutional real/fake scorer conditioned on the class label.

    The label enters twice: as one-hot planes concatenated to the image
    so every conv layer can test image/label consistency, and as a learned
    embedding concatenated to the flattened features. Feature-level
    conditioning alone proved too weak to bind classes to images at small
    scale; the input planes carry the coupling.
    """

    LABEL_EMBED_DIM = 64

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        c, h, _ = _check_image_shape(spec.image_shape)
        wm = spec.width_multiplier
        c32, c64, c128 = _scaled(32, wm), _scaled(64, wm), _scaled(128, wm)
        self.features = nn.Sequential(
            nn.Conv2d(c + spec.num_classes, c32, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(c32, c64, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c64),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(c64, c128, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c128),
            nn.LeakyReLU(0.2, inplace=True),
        )
        side = h // 8  # 28 -> 3, 32 -> 4
        self.label_embed = nn.Embedding(spec.num_classes, self.LABEL_EMBED_DIM)
        # Hidden layer so the score can couple features with the label; a
        # single linear head would be additively separable in the two.
        hidden = _scaled(256, wm)
        self.head = nn.Sequential(
            nn.Linear(c128 * side * side + self.LABEL_EMBED_DIM, hidden),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Linear(hidden, 1),
        )

    def forward(self, images: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        labels = _check_labels(labels, self.spec.num_classes)
        _check_batch_images(images, self.spec.image_shape)
        if images.shape[0] != labels.shape[0]:
            raise ShapeMismatch(f"{images.shape[0]} images vs {labels.shape[0]} labels")
        onehot = F.one_hot(labels, self.spec.num_classes).to(images.dtype)
        planes = onehot[:, :, None, None].expand(-1, -1, images.shape[2], images.shape[3])
        feats = self.features(torch.cat([images, planes], dim=1)).flatten(1)
        joint = torch.cat([feats, self.label_embed(labels)], dim=1)
        return torch.sigmoid(self.head(joint)).squeeze(1)


def _check_batch_images(images: torch.Tensor, image_shape) -> None:
    if images.ndim != 4 or tuple(images.shape[1:]) != tuple(image_shape):
        raise ShapeMismatch(
            f"expected image batch B x {tuple(image_shape)}, got {tuple(images.shape)}"
        )


class ConvNet3(nn.Module):
    """Three conv blocks (3x3 conv, instance norm, ReLU, 2x2 avg pool) + linear head."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        c, h, _ = _check_image_shape(spec.image_shape)
        w = _scaled(128, spec.width_multiplier)
        layers = []
        in_ch = c
        for _ in range(3):
            layers += [
                nn.Conv2d(in_ch, w, 3, padding=1),
                nn.InstanceNorm2d(w, affine=True),
                nn.ReLU(inplace=True),
                nn.AvgPool2d(2),
            ]
            in_ch = w
        self.features = nn.Sequential(*layers)
        side = h // 8
        self.head = nn.Linear(w * side * side, spec.num_classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(images).flatten(1))


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)), inplace=True)
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x), inplace=True)


class ResNet(nn.Module):
    """Small-image residual net: 3x3 stem, four basic-block stages, avg pool."""

    def __init__(self, spec: ClassifierSpec, blocks_per_stage: tuple[int, int, int, int]):
        super().__init__()
        self.spec = spec
        c, _, _ = _check_image_shape(spec.image_shape)
        wm = spec.width_multiplier
        widths = [_scaled(b, wm) for b in (64, 128, 256, 512)]
        self.stem = nn.Sequential(
            nn.Conv2d(c, widths[0], 3, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(widths[0]),
            nn.ReLU(inplace=True),
        )
        stages = []
        in_ch = widths[0]
        for width, n_blocks, stride in zip(widths, blocks_per_stage, (1, 2, 2, 2)):
            for i in range(n_blocks):
                stages.append(BasicBlock(in_ch, width, stride if i == 0 else 1))
                in_ch = width
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(in_ch, spec.num_classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = self.stages(self.stem(images))
        return self.head(self.pool(x).flatten(1))


class AlexNetStyle(nn.Module):
    """Compact AlexNet-like stack for 28/32-pixel inputs (desk-scale variant)."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        c, h, _ = _check_image_shape(spec.image_shape)
        wm = spec.width_multiplier
        c64, c192, c384, c256 = (_scaled(b, wm) for b in (64, 192, 384, 256))
        self.features = nn.Sequential(
            nn.Conv2d(c, c64, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c64, c192, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c192, c384, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c384, c256, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c256, c256, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        side = h // 8
        hidden = _scaled(512, wm)
        self.head = nn.Sequential(
            nn.Linear(c256 * side * side, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, spec.num_classes),
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(images).flatten(1))


class VGG11Style(nn.Module):
    """VGG11-like conv stack with batch norm and a global-pool head (desk-scale)."""

    CFG = (64, "M", 128, "M", 256, 256, "M", 512, 512, "M")

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        c, _, _ = _check_image_shape(spec.image_shape)
        wm = spec.width_multiplier
        layers: list[nn.Module] = []
        in_ch = c
        for item in self.CFG:
            if item == "M":
                layers.append(nn.MaxPool2d(2))
            else:
                out_ch = _scaled(int(item), wm)
                layers += [
                    nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
                    nn.BatchNorm2d(out_ch),
                    nn.ReLU(inplace=True),
                ]
                in_ch = out_ch
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(in_ch, spec.num_classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.pool(self.features(images)).flatten(1))


def build_classifier(spec: ClassifierSpec) -> nn.Module:
    if spec.architecture_id == "ConvNet3":
        return ConvNet3(spec)
    if spec.architecture_id == "ResNet10":
        return ResNet(spec, (1, 1, 1, 1))
    if spec.architecture_id == "ResNet18":
        return ResNet(spec, (2, 2, 2, 2))
    if spec.architecture_id == "AlexNet":
        return AlexNetStyle(spec)
    if spec.architecture_id == "VGG11":
        return VGG11Style(spec)
    raise UnknownArchitecture(spec.architecture_id)


def init_gan_weights(module: nn.Module, rng: torch.Generator) -> None:
    """DCGAN-convention init: conv/linear/embedding ~ N(0, 0.02), norms ~ N(1, 0.02)."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear, nn.Embedding)):
                m.weight.normal_(0.0, 0.02, generator=rng)
                if getattr(m, "bias", None) is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)) and m.affine:
                m.weight.normal_(1.0, 0.02, generator=rng)
                m.bias.zero_()


def init_classifier_weights(module: nn.Module, rng: torch.Generator) -> None:
    """Kaiming fan-in init for conv/linear weights; norm layers reset to identity."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                fan_in = m.weight.shape[1] * (
                    m.weight.shape[2] * m.weight.shape[3] if m.weight.ndim == 4 else 1
                )
                m.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=rng)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)) and m.affine:
                m.weight.fill_(1.0)
                m.bias.zero_()
                if isinstance(m, nn.BatchNorm2d):
                    m.running_mean.zero_()
                    m.running_var.fill_(1.0)
                    m.num_batches_tracked.zero_()


def generate_batch(
    generator: ConditionalGenerator, noise: torch.Tensor, labels: torch.Tensor
) -> torch.Tensor:
    """Synthesize one image batch from noise and labels; pixels land in [-1, 1]."""
    return generator(noise, labels)


def forward_logits(classifier: nn.Module, images: torch.Tensor) -> torch.Tensor:
    """Raw pre-softmax activations for an image batch; shape must match the spec."""
    _check_batch_images(images, classifier.spec.image_shape)
    return classifier(images)


def discriminator_score(
    discriminator: ConditionalDiscriminator, images: torch.Tensor, labels: torch.Tensor
) -> torch.Tensor:
    """Per-sample real-vs-fake probabilities in (0, 1), conditional on labels."""
    return discriminator(images, labels)


@dataclass
class ModelPool:
    """Instantiated classifiers sampled uniformly, re-initialized periodically.

    One draw corresponds to one distillation step; every ``refresh_interval``
    draws all member models get fresh parameters from the pool's own seeded
    stream. Pool parameters never require grad: they act as fixed feature
    extractors whose gradients flow only into the images.
    """

    specs: list[ClassifierSpec]
    refresh_interval: int = 100
    seed: int = 0
    models: list[nn.Module] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.specs:
            raise EmptyPool("model pool needs at least one classifier spec")
        if self.refresh_interval < 1:
            raise ValueError(f"refresh_interval must be >= 1, got {self.refresh_interval}")
        self._init_rng = make_generator(derive_seed(self.seed, "pool-init"))
        self._draws = 0
        self.models = [build_classifier(s) for s in self.specs]
        self._reinitialize()

    def _reinitialize(self) -> None:
        for model in self.models:
            init_classifier_weights(model, self._init_rng)
            model.train()
            for p in model.parameters():
                p.requires_grad_(False)

    def sample(self, rng: torch.Generator) -> nn.Module:
        if self._draws > 0 and self._draws % self.refresh_interval == 0:
            self._reinitialize()
        idx = int(torch.randint(len(self.models), (1,), generator=rng))
        self._draws += 1
        return self.models[idx]


def sample_model(pool: ModelPool, rng: torch.Generator) -> nn.Module:
    """Draw one classifier from the pool, uniformly at random."""
    return pool.sample(rng)
