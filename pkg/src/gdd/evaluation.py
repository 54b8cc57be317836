"""Train fresh classifiers on synthetic data and report test accuracy.

Independent trials share nothing but the closure they run, so they could
execute in parallel; the report aggregation is the only join point.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np
import torch

from .data import LabeledImageDataset, SyntheticExport, export_synthetic
from .errors import EmptyDataset, InvalidBudget, ShapeMismatch
from .networks import ClassifierSpec, build_classifier, init_classifier_weights
from .seeding import derive_seed, make_generator

EVAL_LR = 1e-3
EVAL_EPOCHS = 300
EVAL_BATCH = 64


@dataclass
class TrialReport:
    """Per-trial accuracies with their mean and sample standard deviation."""

    accuracies: list[float]
    mean: float
    std: float
    architecture_id: str = ""
    ipc: int = 0
    single_trial: bool = False

    @classmethod
    def from_accuracies(cls, accuracies, architecture_id: str = "", ipc: int = 0) -> "TrialReport":
        accs = [float(a) for a in accuracies]
        if not accs:
            raise EmptyDataset("a trial report needs at least one accuracy")
        mean = statistics.fmean(accs)
        std = statistics.stdev(accs) if len(accs) > 1 else 0.0
        return cls(accs, mean, std, architecture_id, ipc, single_trial=len(accs) == 1)


def train_classifier_on_synthetic(
    synthetic: SyntheticExport,
    arch: ClassifierSpec,
    epochs: int = EVAL_EPOCHS,
    seed: int = 0,
    lr: float = EVAL_LR,
    batch_size: int = EVAL_BATCH,
) -> torch.nn.Module:
    """Train a freshly initialized classifier on synthetic data only."""
    if epochs <= 0:
        raise InvalidBudget(f"epochs must be > 0, got {epochs}")
    if len(synthetic.labels) == 0:
        raise EmptyDataset("synthetic dataset is empty")
    if tuple(synthetic.images.shape[1:]) != tuple(arch.image_shape):
        raise ShapeMismatch(
            f"synthetic images {tuple(synthetic.images.shape[1:])} vs "
            f"classifier spec {tuple(arch.image_shape)}"
        )
    model = build_classifier(arch)
    init_classifier_weights(model, make_generator(derive_seed(seed, "eval-init")))
    model.train()
    data_rng = make_generator(derive_seed(seed, "eval-batches"))
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    images, labels = synthetic.images, synthetic.labels
    n = len(labels)
    for _ in range(epochs):
        order = torch.randperm(n, generator=data_rng)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            logits = model(images[idx])
            loss = torch.nn.functional.cross_entropy(logits, labels[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    model.eval()
    return model


def evaluate_accuracy(classifier: torch.nn.Module, test: LabeledImageDataset) -> float:
    """Fraction of argmax-correct predictions; argmax ties go to the lowest class."""
    if len(test) == 0:
        raise EmptyDataset("test set is empty")
    classifier.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(test), 256):
            logits = classifier(test.images[start : start + 256]).numpy()
            preds = np.argmax(logits, axis=1)  # np.argmax returns the first maximum
            correct += int((preds == test.labels[start : start + 256].numpy()).sum())
    return correct / len(test)


def run_trials(closure, n_trials: int = 5, base_seed: int = 0, architecture_id: str = "", ipc: int = 0) -> TrialReport:
    """Run ``closure(seed)`` for seeds base_seed .. base_seed + n - 1 and aggregate."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    accuracies = []
    for i in range(n_trials):
        seed = base_seed + i
        try:
            accuracies.append(float(closure(seed)))
        except Exception as e:
            raise RuntimeError(f"trial {i} (seed {seed}) failed: {e}") from e
    return TrialReport.from_accuracies(accuracies, architecture_id, ipc)


def cross_architecture_eval(
    checkpoint,
    archs: list[str],
    ipc: int,
    test: LabeledImageDataset,
    epochs: int = EVAL_EPOCHS,
    seeds: list[int] = (0,),
    width_multiplier: float = 1.0,
) -> dict[str, TrialReport]:
    """Evaluate one generator checkpoint across classifier architectures.

    One synthetic export per seed; every architecture trains and evaluates
    on each export with the matching seed.
    """
    if not archs:
        raise ValueError("archs must be nonempty")
    exports = [export_synthetic(checkpoint, ipc, seed) for seed in seeds]
    matrix: dict[str, TrialReport] = {}
    for arch_id in archs:
        spec = ClassifierSpec(
            architecture_id=arch_id,
            num_classes=10,
            image_shape=test.image_shape,
            width_multiplier=width_multiplier,
        )
        accs = []
        for seed, export in zip(seeds, exports):
            model = train_classifier_on_synthetic(export, spec, epochs=epochs, seed=seed)
            accs.append(evaluate_accuracy(model, test))
        matrix[arch_id] = TrialReport.from_accuracies(accs, arch_id, ipc)
    return matrix
