"""Built-in property suite for the loss kernel, runnable from the CLI.

Checks the standardization postconditions, KL properties, the pinned
oracle values, the tau**2 placement, and the finite-difference gradient
agreement. Returns a list of (name, passed, detail) triples so the CLI can
print one line per check.
"""

from __future__ import annotations

import torch

from . import losses
from .seeding import make_generator

# Frozen high-precision oracle values (50-digit pipeline, rounded).
KL_PINNED = 0.143841036226  # KL([0.5, 0.5] || [0.25, 0.75])
KL_ZERO_CONVENTION = 0.69314718056  # KL([1, 0] || [0.5, 0.5])
SKD_PINNED_TAU1 = 1.6215438254  # skd([1, 2, 3], [3, 2, 1], tau=1)
SKD_PINNED_TAU2 = 0.471091411919  # same logits at tau=2; catches stray tau**2 factors


def run_selfcheck(n_random: int = 2000, n_grad_batches: int = 10, seed: int = 0):
    checks: list[tuple[str, bool, str]] = []
    rng = make_generator(seed)

    def record(name: str, passed: bool, detail: str = ""):
        checks.append((name, bool(passed), detail))

    # Standardization postconditions: mean 0, population std 1/tau.
    worst_mean, worst_std = 0.0, 0.0
    for _ in range(50):
        x = torch.randn(8, 10, generator=rng, dtype=torch.float64) * 5 + 2
        for tau in (1.0, 2.0, 4.0):
            z = losses.standardize_logits(x, tau)
            worst_mean = max(worst_mean, float(z.mean(dim=1).abs().max()))
            worst_std = max(worst_std, float((z.std(dim=1, correction=0) - 1 / tau).abs().max()))
    record("standardize/mean-zero", worst_mean <= 1e-9, f"max |mean| = {worst_mean:.3g}")
    record("standardize/std-1-over-tau", worst_std <= 1e-7, f"max dev = {worst_std:.3g}")

    # Affine invariance of the standardized logits.
    worst = 0.0
    for _ in range(50):
        x = torch.randn(4, 10, generator=rng, dtype=torch.float64)
        a = float(torch.rand(1, generator=rng)) * 9 + 0.5
        b = float(torch.randn(1, generator=rng)) * 10
        diff = (losses.standardize_logits(a * x + b, 2.0) - losses.standardize_logits(x, 2.0)).abs()
        worst = max(worst, float(diff.max()))
    record("standardize/affine-invariance", worst <= 1e-7, f"max dev = {worst:.3g}")

    # KL nonnegativity over random distribution pairs.
    min_kl = float("inf")
    for _ in range(n_random):
        p = losses.softmax_rows(torch.randn(1, 10, generator=rng, dtype=torch.float64) * 3)
        q = losses.softmax_rows(torch.randn(1, 10, generator=rng, dtype=torch.float64) * 3)
        min_kl = min(min_kl, float(losses.kl_divergence_rows(p, q)))
    record("kl/nonnegative", min_kl >= 0.0, f"min over {n_random} pairs = {min_kl:.3g}")

    # KL asymmetry: the original distribution belongs in the numerator.
    p = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
    q = torch.tensor([[0.25, 0.75]], dtype=torch.float64)
    forward = float(losses.kl_divergence_rows(p, q))
    backward = float(losses.kl_divergence_rows(q, p))
    record("kl/asymmetry", abs(forward - backward) > 1e-3, f"|forward - backward| = {abs(forward - backward):.3g}")
    record("kl/pinned-value", abs(forward - KL_PINNED) <= 1e-5, f"KL(p,q) = {forward:.6f}")
    zero_conv = float(
        losses.kl_divergence_rows(
            torch.tensor([[1.0, 0.0]], dtype=torch.float64),
            torch.tensor([[0.5, 0.5]], dtype=torch.float64),
        )
    )
    record("kl/zero-times-log-zero", abs(zero_conv - KL_ZERO_CONVENTION) <= 1e-5, f"= {zero_conv:.6f}")

    # Pinned end-to-end skd values; tau**2 must NOT appear inside skd_loss.
    o = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
    s = torch.tensor([[3.0, 2.0, 1.0]], dtype=torch.float64)
    skd1 = float(losses.skd_loss(o, s, tau=1.0))
    skd2 = float(losses.skd_loss(o, s, tau=2.0))
    record("skd/pinned-tau1", abs(skd1 - SKD_PINNED_TAU1) <= 1e-5, f"= {skd1:.6f}")
    record("skd/pinned-tau2", abs(skd2 - SKD_PINNED_TAU2) <= 1e-5, f"= {skd2:.6f}")
    total = losses.combine_total_loss(1.0, 0.5, losses.DistillScalars(tau=2.0, lambda_skd=0.01))
    record("total/tau-squared-placement", abs(total - 1.02) <= 1e-12, f"= {total:.6f}")

    # Gradient agreement: autograd vs central differences on the skd chain.
    max_err = 0.0
    for _ in range(n_grad_batches):
        b = int(torch.randint(1, 9, (1,), generator=rng))
        target = torch.randn(b, 10, generator=rng, dtype=torch.float64)
        point = torch.randn(b, 10, generator=rng, dtype=torch.float64)
        err = losses.finite_difference_gradient_check(
            lambda x: losses.skd_loss(target, x, tau=2.0), point, epsilon=1e-4
        )
        max_err = max(max_err, err)
    record("gradient/max-relative-error", max_err <= 1e-3, f"= {max_err:.3g}")

    return checks
