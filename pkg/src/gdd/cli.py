"""Command-line entry point: distill, export, eval, cross-arch, selfcheck.

Exit codes are a stable contract: 0 success, 1 runtime failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as config_mod
from .checkpoint import checkpoint_digest, load_checkpoint
from .config import RunConfig, apply_overrides, image_shape_for, parse_config
from .data import export_synthetic, load_benchmark, read_synthetic, subset, write_synthetic
from .errors import ConfigError, GddError
from .evaluation import TrialReport, cross_architecture_eval, evaluate_accuracy, run_trials, train_classifier_on_synthetic
from .losses import DistillScalars
from .networks import ClassifierSpec, DiscriminatorSpec, GeneratorSpec
from .reporting import (
    plot_loss_curves,
    plot_trial_reports,
    reports_to_payload,
    save_image_grid,
    write_summary_json,
    write_trial_reports,
)
from .selfcheck import run_selfcheck
from .training import DistillationConfig, TrainSchedule, run_distillation

TABLE2_ARCHS = ("ConvNet3", "ResNet18", "AlexNet", "VGG11")


def _distillation_config(cfg: RunConfig) -> DistillationConfig:
    shape = image_shape_for(cfg)
    return DistillationConfig(
        generator=GeneratorSpec(
            noise_dim=cfg.noise_dim,
            num_classes=10,
            image_shape=shape,
            width_multiplier=cfg.width_multiplier,
        ),
        discriminator=DiscriminatorSpec(
            num_classes=10, image_shape=shape, width_multiplier=cfg.width_multiplier
        ),
        pool=[
            ClassifierSpec(
                architecture_id=a,
                num_classes=10,
                image_shape=shape,
                width_multiplier=cfg.pool_width_multiplier,
            )
            for a in cfg.pool_archs
        ],
        scalars=DistillScalars(tau=cfg.tau, lambda_skd=cfg.lambda_skd),
        schedule=TrainSchedule(
            gan_steps=cfg.gan_steps,
            distill_steps=cfg.distill_steps,
            batch_size=cfg.batch_size,
            lr_generator=cfg.lr_generator,
            lr_discriminator=cfg.lr_discriminator,
            seed=cfg.seed,
        ),
        refresh_interval=cfg.refresh_interval,
        standardize=not cfg.disable_standardization,
    )


def cmd_distill(args) -> int:
    cfg = parse_config(args.config)
    cfg = apply_overrides(
        cfg,
        seed=args.seed,
        out_dir=args.out,
        ipc=args.ipc,
        disable_standardization=True if args.disable_standardization else None,
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    train = load_benchmark(cfg.dataset, cfg.data_dir, split="train")
    if cfg.subset_per_class:
        train = subset(train, cfg.subset_per_class, cfg.seed)
    print(f"distilling {cfg.dataset} ({len(train)} images), "
          f"gan_steps={cfg.gan_steps} distill_steps={cfg.distill_steps} "
          f"tau={cfg.tau} lambda_skd={cfg.lambda_skd} seed={cfg.seed}")

    bundle, trace = run_distillation(train, _distillation_config(cfg))

    config_mod.write_resolved(out / "config.resolved", cfg)
    bundle.save(out / "generator.gdd1")
    trace.write(out / "trace.tsv")
    plot_loss_curves(trace, out / "loss_curves.png")
    if trace.records:
        last = trace.records[-1]
        print(f"final step {last.step}: l_cgan={last.l_cgan:.4f} "
              f"l_skd={last.l_skd:.4f} l_total={last.l_total:.4f}")
    print(f"wrote {out / 'generator.gdd1'}, {out / 'trace.tsv'}, "
          f"{out / 'loss_curves.png'}, {out / 'config.resolved'}")
    return 0


def cmd_export(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export = export_synthetic(args.checkpoint, args.ipc, args.seed)
    container = out / "synthetic.gdds"
    write_synthetic(container, export)
    save_image_grid(export.images, out / "grid.png", per_row=args.ipc if args.ipc <= 16 else 10)
    write_summary_json(
        out / "export.json",
        {
            "checkpoint": str(args.checkpoint),
            "checkpoint_digest": checkpoint_digest(args.checkpoint),
            "ipc": args.ipc,
            "seed": args.seed,
            "samples": int(len(export.labels)),
        },
    )
    print(f"wrote {container} ({len(export.labels)} samples), {out / 'grid.png'}")
    return 0


def _eval_reports(args, archs: list[str]) -> tuple[dict[str, TrialReport], Path]:
    cfg = parse_config(args.config) if args.config else config_mod.validate(RunConfig())
    cfg = apply_overrides(
        cfg,
        seed=args.seed,
        out_dir=args.out,
        dataset=config_mod.DATASET_NAMES.get(args.dataset.lower()) if args.dataset else None,
        data_dir=args.data_dir,
        trials=args.trials,
        eval_epochs=args.epochs,
        eval_width_multiplier=args.width,
        jobs=args.jobs,
    )
    test = load_benchmark(cfg.dataset, cfg.data_dir, split="test")
    synthetic = read_synthetic(args.synthetic)
    seeds = list(range(cfg.seed, cfg.seed + cfg.trials))

    reports: dict[str, TrialReport] = {}
    for arch in archs:
        spec = ClassifierSpec(
            architecture_id=arch,
            num_classes=10,
            image_shape=test.image_shape,
            width_multiplier=cfg.eval_width_multiplier,
        )

        def one_trial(seed: int) -> float:
            model = train_classifier_on_synthetic(synthetic, spec, epochs=cfg.eval_epochs, seed=seed)
            return evaluate_accuracy(model, test)

        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                accs = list(pool.map(one_trial, seeds))
            reports[arch] = TrialReport.from_accuracies(accs, arch, synthetic.ipc)
        else:
            reports[arch] = run_trials(
                one_trial, n_trials=cfg.trials, base_seed=cfg.seed,
                architecture_id=arch, ipc=synthetic.ipc,
            )
    return reports, Path(cfg.out_dir)


def cmd_eval(args) -> int:
    reports, out = _eval_reports(args, [args.arch])
    out.mkdir(parents=True, exist_ok=True)
    write_trial_reports(reports, out / "eval_report.tsv")
    plot_trial_reports(reports, out / "eval_report.png")
    write_summary_json(out / "eval_summary.json", reports_to_payload(reports))
    for arch, report in reports.items():
        print(f"{arch}: {report.mean:.4f} +/- {report.std:.4f} "
              f"({len(report.accuracies)} trial{'s' if len(report.accuracies) > 1 else ' [single]'})")
    return 0


def cmd_cross_arch(args) -> int:
    cfg = parse_config(args.config) if args.config else config_mod.validate(RunConfig())
    cfg = apply_overrides(
        cfg,
        seed=args.seed,
        out_dir=args.out,
        dataset=config_mod.DATASET_NAMES.get(args.dataset.lower()) if args.dataset else None,
        data_dir=args.data_dir,
        trials=args.trials,
        ipc=args.ipc,
        eval_epochs=args.epochs,
        eval_width_multiplier=args.width,
    )
    test = load_benchmark(cfg.dataset, cfg.data_dir, split="test")
    archs = [a.strip() for a in args.archs.split(",")] if args.archs else list(TABLE2_ARCHS)
    seeds = list(range(cfg.seed, cfg.seed + cfg.trials))
    matrix = cross_architecture_eval(
        args.checkpoint,
        archs,
        cfg.ipc,
        test,
        epochs=cfg.eval_epochs,
        seeds=seeds,
        width_multiplier=cfg.eval_width_multiplier,
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trial_reports(matrix, out / "cross_arch.tsv")
    plot_trial_reports(matrix, out / "cross_arch.png")
    write_summary_json(out / "cross_arch.json", reports_to_payload(matrix))
    for arch, report in matrix.items():
        print(f"{arch}: {report.mean:.4f} +/- {report.std:.4f}")
    return 0


def cmd_selfcheck(args) -> int:
    checks = run_selfcheck(n_random=10000, n_grad_batches=50, seed=0)
    failed = 0
    for name, passed, detail in checks:
        status = "ok" if passed else "FAIL"
        print(f"[{status}] {name}" + (f": {detail}" if detail else ""))
        failed += 0 if passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdd",
        description="Generative dataset distillation with standardized-logit matching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distill", help="train the generator on a dataset")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--ipc", type=int, default=None)
    p.add_argument("--disable-standardization", action="store_true",
                   help="replace standardization with plain division by tau")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("export", help="write a synthetic dataset from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ipc", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="train a classifier on synthetic data and test it")
    p.add_argument("--synthetic", required=True, help="GDDS container path")
    p.add_argument("--arch", default="ConvNet3")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--width", type=float, default=None, help="classifier width multiplier")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None, help="parallel trials")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cross-arch", help="evaluate a checkpoint across architectures")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ipc", type=int, default=None)
    p.add_argument("--archs", default=None, help="comma-separated architecture list")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cross_arch)

    p = sub.add_parser("selfcheck", help="run the loss-kernel property suite")
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (GddError, OSError, RuntimeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
