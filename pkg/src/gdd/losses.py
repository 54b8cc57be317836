"""Differentiable loss kernel for standardized-logit distribution matching.

Everything here is a pure function of its tensor inputs: no state, no RNG,
safe to call from any number of workers. Logit batches are B x K tensors
(B samples, K classes); probability batches are row-stochastic B x K.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import (
    DegenerateLogits,
    InvalidTemperature,
    NonFiniteLoss,
    ShapeMismatch,
)

# Below this population std a logit row counts as constant.
MIN_ROW_STD = 1e-12
# Floor for log arguments inside the KL; softmax outputs are strictly
# positive in exact arithmetic, the clamp preserves that under floats.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DistillScalars:
    """Scalar knobs of the combined objective: temperature and SKD weight."""

    tau: float
    lambda_skd: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidTemperature(f"tau must be > 0, got {self.tau}")
        if self.lambda_skd < 0:
            raise ValueError(f"lambda_skd must be >= 0, got {self.lambda_skd}")


def _as_logit_batch(x: torch.Tensor, name: str = "logits") -> torch.Tensor:
    if not isinstance(x, torch.Tensor):
        x = torch.as_tensor(x, dtype=torch.get_default_dtype())
    if x.ndim == 1:
        x = x.unsqueeze(0)
    if x.ndim != 2:
        raise ShapeMismatch(f"{name} must be a B x K matrix, got shape {tuple(x.shape)}")
    if x.shape[1] < 2:
        raise ShapeMismatch(f"{name} needs at least 2 classes, got {x.shape[1]}")
    if not torch.isfinite(x.detach()).all():
        raise NonFiniteLoss(f"{name} contains NaN or Inf entries")
    return x


def standardize_logits(logits: torch.Tensor, tau: float) -> torch.Tensor:
    """Per-row z-score of the logits, scaled by the reference temperature.

    Row i of the output is (row_i - mean(row_i)) / (popstd(row_i) * tau),
    using the population standard deviation (divide by K). Output rows have
    mean 0 and population std 1/tau, which makes the result invariant to
    any per-row affine map a*x + b with a > 0.
    """
    if tau <= 0:
        raise InvalidTemperature(f"tau must be > 0, got {tau}")
    x = _as_logit_batch(logits)
    mean = x.mean(dim=1, keepdim=True)
    std = x.std(dim=1, keepdim=True, correction=0)
    bad = (std.detach() < MIN_ROW_STD).flatten()
    if bad.any():
        rows = bad.nonzero().flatten().tolist()
        raise DegenerateLogits(f"constant logit row(s) {rows}: population std < {MIN_ROW_STD}")
    return (x - mean) / (std * tau)


def scale_logits(logits: torch.Tensor, tau: float) -> torch.Tensor:
    """Plain temperature division x / tau, the no-standardization ablation."""
    if tau <= 0:
        raise InvalidTemperature(f"tau must be > 0, got {tau}")
    return _as_logit_batch(logits) / tau


def softmax_rows(logits: torch.Tensor) -> torch.Tensor:
    """Row-wise softmax with max-subtraction so large logits cannot overflow."""
    x = _as_logit_batch(logits)
    shifted = x - x.max(dim=1, keepdim=True).values
    e = torch.exp(shifted)
    return e / e.sum(dim=1, keepdim=True)


def kl_divergence_rows(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """Mean over rows of sum_k p_k * ln(p_k / q_k).

    Uses the convention 0 * ln(0 / q) = 0 and clamps log arguments at
    PROB_FLOOR. The first argument is the reference (numerator)
    distribution; KL is not symmetric.
    """
    if not isinstance(p, torch.Tensor):
        p = torch.as_tensor(p, dtype=torch.get_default_dtype())
    if not isinstance(q, torch.Tensor):
        q = torch.as_tensor(q, dtype=p.dtype)
    if p.ndim == 1:
        p = p.unsqueeze(0)
    if q.ndim == 1:
        q = q.unsqueeze(0)
    if p.shape != q.shape:
        raise ShapeMismatch(f"p has shape {tuple(p.shape)} but q has shape {tuple(q.shape)}")
    # p multiplies the clamped log, so rows with p_k == 0 contribute exactly 0.
    log_ratio = torch.log(p.clamp_min(PROB_FLOOR)) - torch.log(q.clamp_min(PROB_FLOOR))
    per_row = (p * log_ratio).sum(dim=1)
    return per_row.mean()


def skd_loss(
    logits_original: torch.Tensor,
    logits_synthetic: torch.Tensor,
    tau: float,
    standardize: bool = True,
) -> torch.Tensor:
    """Distribution-matching loss between original and synthetic logits.

    Both batches are standardized (or plainly divided by tau when
    ``standardize`` is False, the ablation path), pushed through softmax,
    and compared with KL where the original distribution is the numerator.
    The tau**2 factor of the combined objective is NOT applied here; it
    lives in :func:`combine_total_loss` only.
    """
    if torch.as_tensor(logits_original).shape != torch.as_tensor(logits_synthetic).shape:
        raise ShapeMismatch(
            f"original {tuple(torch.as_tensor(logits_original).shape)} vs "
            f"synthetic {tuple(torch.as_tensor(logits_synthetic).shape)}"
        )
    transform = standardize_logits if standardize else scale_logits
    p = softmax_rows(transform(logits_original, tau))
    q = softmax_rows(transform(logits_synthetic, tau))
    return kl_divergence_rows(p, q)


def combine_total_loss(l_cgan, l_skd, scalars: DistillScalars):
    """Total objective: l_cgan + lambda_skd * tau**2 * l_skd.

    Works on plain floats and on tensors (the training loop backpropagates
    through the tensor form). The tau**2 factor appears exactly once, here.
    """
    if float(torch.as_tensor(l_skd).detach()) < 0:
        raise ValueError(f"l_skd must be >= 0, got {l_skd}")
    return l_cgan + scalars.lambda_skd * (scalars.tau**2) * l_skd


def finite_difference_gradient_check(
    loss_fn,
    point: torch.Tensor,
    epsilon: float = 1e-4,
) -> float:
    """Compare the automatic gradient of ``loss_fn`` against central differences.

    ``loss_fn`` maps a B x K tensor to a scalar. Runs in float64: the
    central-difference truncation error is O(epsilon**2), far below the
    float32 noise floor. Returns the maximum relative error over entries
    whose analytic gradient exceeds 1e-8 in magnitude (0.0 if none do).
    """
    if not (1e-6 <= epsilon <= 1e-3):
        raise ValueError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    x = point.detach().to(torch.float64).clone().requires_grad_(True)
    loss = loss_fn(x)
    if not torch.isfinite(loss.detach()).all():
        raise NonFiniteLoss(f"loss_fn returned {float(loss)} at the base point")
    if loss.requires_grad:
        (analytic,) = torch.autograd.grad(loss, x, allow_unused=True)
        analytic = torch.zeros_like(x) if analytic is None else analytic
    else:
        analytic = torch.zeros_like(x)

    numeric = torch.zeros_like(x)
    flat = x.detach().clone().reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        for sign in (+1.0, -1.0):
            flat[i] = orig + sign * epsilon
            val = loss_fn(flat.reshape(x.shape))
            if not torch.isfinite(val.detach()).all():
                raise NonFiniteLoss(f"loss_fn returned {float(val)} at a perturbed point")
            numeric.reshape(-1)[i] += sign * float(val) / (2.0 * epsilon)
        flat[i] = orig

    mask = analytic.abs() > 1e-8
    if not mask.any():
        return 0.0
    rel = (numeric[mask] - analytic[mask]).abs() / analytic[mask].abs()
    return float(rel.max())
