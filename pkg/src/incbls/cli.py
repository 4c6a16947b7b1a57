"""``incbls-bench``: run the incremental-input benchmark from the shell."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import ExperimentConfig, emit_report, run_experiment
from .errors import BlsError
from .incremental import BStrategy
from .model import Architecture


def _strategies(text: str) -> tuple[BStrategy, ...]:
    try:
        return tuple(BStrategy(s.strip()) for s in text.split(",") if s.strip())
    except ValueError as exc:
        choices = ",".join(s.value for s in BStrategy)
        raise argparse.ArgumentTypeError(f"{exc}; choose from {choices}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="incbls-bench",
        description="Compare B-block strategies for incremental BLS training on added inputs.",
    )
    d = p.add_argument_group("dataset")
    d.add_argument("--dataset", choices=("mnist", "synth"), default="synth")
    d.add_argument("--images")
    d.add_argument("--labels")
    d.add_argument("--test-images")
    d.add_argument("--test-labels")
    d.add_argument("--samples", type=int, default=6000, help="synthetic training samples")
    d.add_argument("--test-samples", type=int, default=2000, help="synthetic test samples")
    d.add_argument("--dim", type=int, default=50)
    d.add_argument("--classes", type=int, default=10)
    d.add_argument("--data-seed", type=int, default=7)
    d.add_argument("--separation", type=float, default=5.0, help="synthetic cluster spread")

    a = p.add_argument_group("architecture")
    a.add_argument("--feature-groups", type=int, default=10)
    a.add_argument("--feature-nodes", type=int, default=10)
    a.add_argument("--enh-groups", type=int, default=1)
    a.add_argument("--enh-nodes", type=int, default=400)
    a.add_argument("--shrink", type=float, default=0.8)
    a.add_argument("--lambda", dest="lam", type=float, default=1e-8)
    a.add_argument("--seed", type=int, default=0)

    e = p.add_argument_group("protocol")
    e.add_argument("--initial", type=int, default=2000)
    e.add_argument("--increment", type=int, default=2000)
    e.add_argument("--steps", type=int, default=2)
    e.add_argument("--strategies", type=_strategies, default=(BStrategy.EXISTING, BStrategy.AUTO))
    e.add_argument("--repeats", type=int, default=5)
    rank = e.add_mutually_exclusive_group()
    rank.add_argument(
        "--assume-full-rank", dest="assume_full_rank", action="store_true", default=None,
        help="never form C; treat it as zero (default when --lambda > 0)",
    )
    rank.add_argument(
        "--check-c", dest="assume_full_rank", action="store_false",
        help="always form C and dispatch on it (default when --lambda is 0)",
    )

    o = p.add_argument_group("output")
    o.add_argument("--out", help="write the report here instead of stdout")
    o.add_argument("--format", choices=("csv", "json", "table"), default="table")
    o.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    arch = Architecture(
        n_feature_groups=args.feature_groups,
        nodes_per_feature_group=args.feature_nodes,
        n_enhancement_groups=args.enh_groups,
        nodes_per_enhancement_group=args.enh_nodes,
        shrink_scale=args.shrink,
        lam=args.lam,
        seed=args.seed,
    )
    return ExperimentConfig(
        arch=arch,
        dataset=args.dataset,
        images=args.images,
        labels=args.labels,
        test_images=args.test_images,
        test_labels=args.test_labels,
        samples=args.samples,
        test_samples=args.test_samples,
        dim=args.dim,
        classes=args.classes,
        data_seed=args.data_seed,
        separation=args.separation,
        initial_samples=args.initial,
        increment_size=args.increment,
        num_increments=args.steps,
        strategies=args.strategies,
        repeats=args.repeats,
        assume_full_rank=args.assume_full_rank,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
        report = run_experiment(config)
        text = emit_report(report, args.format, args.out)
    except (BlsError, ValueError, OSError) as exc:
        print(f"incbls-bench: error: {exc}", file=sys.stderr)
        return 1
    if args.out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
