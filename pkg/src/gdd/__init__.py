"""Generative dataset distillation with standardized-logit distribution matching.

A conditional GAN compresses a labeled image dataset into its generator;
alignment between synthetic and original data comes from matching the
softmax distributions of per-sample standardized classifier logits,
through classifiers drawn at random from a model pool.
"""

from .checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint
from .data import (
    LabeledImageDataset,
    SyntheticExport,
    export_synthetic,
    load_benchmark,
    load_cifar10_binary,
    load_idx_dataset,
    read_synthetic,
    subset,
    write_synthetic,
)
from .evaluation import (
    TrialReport,
    cross_architecture_eval,
    evaluate_accuracy,
    run_trials,
    train_classifier_on_synthetic,
)
from .losses import (
    DistillScalars,
    combine_total_loss,
    finite_difference_gradient_check,
    kl_divergence_rows,
    scale_logits,
    skd_loss,
    softmax_rows,
    standardize_logits,
)
from .networks import (
    ClassifierSpec,
    ConditionalDiscriminator,
    ConditionalGenerator,
    DiscriminatorSpec,
    GeneratorSpec,
    ModelPool,
    build_classifier,
    discriminator_score,
    forward_logits,
    generate_batch,
    sample_model,
)
from .training import (
    DistillationConfig,
    MetricsTrace,
    TrainSchedule,
    cgan_discriminator_step,
    cgan_generator_step,
    distill_step,
    run_distillation,
)

__version__ = "0.1.0"
