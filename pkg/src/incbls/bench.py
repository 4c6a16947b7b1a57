"""Incremental-input experiment: train, add batches, time each B strategy.

Every repeat trains one initial model and replays the same increments for
each strategy in turn, so strategies see identical data and random maps.
Reported times are medians over repeats; min and max are kept for JSON.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, load_idx, synth_classification
from .errors import ConfigError
from .incremental import BStrategy
from .model import Architecture, accuracy, increment_inputs, predict, train_initial

log = logging.getLogger(__name__)

SPEEDUP_KEYS = ("train_step", "train_accum", "test_step", "test_accum")


@dataclass
class ExperimentConfig:
    arch: Architecture = field(default_factory=Architecture)
    dataset: str = "synth"
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    samples: int = 6000
    test_samples: int = 2000
    dim: int = 50
    classes: int = 10
    data_seed: int = 7
    separation: float = 5.0
    initial_samples: int = 2000
    increment_size: int = 2000
    num_increments: int = 2
    strategies: tuple[BStrategy, ...] = (BStrategy.EXISTING, BStrategy.AUTO)
    repeats: int = 5
    # None: assume full rank exactly when the ridge term is positive, since a
    # ridge-built pseudoinverse leaves a nonzero C that says nothing about rank.
    assume_full_rank: bool | None = None

    @property
    def full_rank_assumed(self) -> bool:
        if self.assume_full_rank is None:
            return self.arch.lam > 0
        return self.assume_full_rank

    def validate(self, n_available: int | None = None) -> None:
        if self.dataset not in ("synth", "mnist"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "mnist" and not all(
            (self.images, self.labels, self.test_images, self.test_labels)
        ):
            raise ConfigError("mnist needs --images, --labels, --test-images and --test-labels")
        if self.initial_samples < 1 or self.increment_size < 1:
            raise ConfigError("initial and increment sizes must be positive")
        if self.num_increments < 0 or self.repeats < 1:
            raise ConfigError("steps must be >= 0 and repeats >= 1")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategies")
        needed = self.initial_samples + self.increment_size * self.num_increments
        if n_available is not None and needed > n_available:
            raise ConfigError(f"protocol needs {needed} training samples, dataset has {n_available}")


def load_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    config.validate()
    if config.dataset == "mnist":
        train = load_idx(config.images, config.labels)
        test = load_idx(config.test_images, config.test_labels)
        c = max(train.c, test.c)
        return Dataset(train.X, train.labels, c), Dataset(test.X, test.labels, c)
    full = synth_classification(
        config.data_seed,
        config.samples + config.test_samples,
        config.dim,
        config.classes,
        separation=config.separation,
    )
    return full.slice(0, config.samples), full.slice(config.samples, len(full))


@dataclass
class StepRecord:
    step: int
    patterns_before: int
    patterns_after: int
    strategy: str
    strategy_used: str
    accuracy: float
    train_s: float
    train_min_s: float
    train_max_s: float
    accum_train_s: float
    test_s: float
    test_min_s: float
    test_max_s: float
    accum_test_s: float
    phases: dict[str, float] = field(default_factory=dict)
    mismatches_vs_existing: int | None = None
    speedups: dict[str, float] | None = None


@dataclass
class RunReport:
    structure: tuple[int, int]
    records: list[StepRecord]
    config: dict

    @property
    def strategies(self) -> list[str]:
        seen: list[str] = []
        for r in self.records:
            if r.strategy not in seen:
                seen.append(r.strategy)
        return seen

    @property
    def steps(self) -> list[int]:
        return sorted({r.step for r in self.records})

    def record(self, step: int, strategy: str) -> StepRecord:
        for r in self.records:
            if r.step == step and r.strategy == strategy:
                return r
        raise KeyError((step, strategy))

    def speedup(self, step: int, strategy: str, key: str = "train_step") -> float | None:
        sp = self.record(step, strategy).speedups
        return None if sp is None else sp[key]


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def run_experiment(
    config: ExperimentConfig, data: tuple[Dataset, Dataset] | None = None
) -> RunReport:
    train, test = data if data is not None else load_datasets(config)
    config.validate(len(train))
    strategies = [BStrategy(s) for s in config.strategies]
    c = max(train.c, test.c)
    l0, q, steps = config.initial_samples, config.increment_size, config.num_increments
    X0, Y0 = train.X[:l0], train.slice(0, l0).Y
    if Y0.shape[1] < c:
        Y0 = np.hstack([Y0, np.zeros((l0, c - Y0.shape[1]))])
    increments = []
    for s in range(steps):
        part = train.slice(l0 + s * q, l0 + (s + 1) * q)
        Ya = np.zeros((q, c))
        Ya[np.arange(q), part.labels] = 1.0
        increments.append((part.X, Ya))

    # times[strategy][step] -> list over repeats; step 0 is shared.
    init_train, init_test = [], []
    train_t = {s: [[] for _ in range(steps)] for s in strategies}
    test_t = {s: [[] for _ in range(steps)] for s in strategies}
    phase_t = {s: [[] for _ in range(steps)] for s in strategies}
    acc = {s: [0.0] * steps for s in strategies}
    used = {s: [""] * steps for s in strategies}
    preds = {s: [None] * steps for s in strategies}
    acc0 = 0.0

    for rep in range(config.repeats):
        model0, t = _timed(train_initial, config.arch, X0, Y0)
        init_train.append(t)
        (pred0, _), t = _timed(predict, model0, test.X)
        init_test.append(t)
        if rep == 0:
            acc0 = accuracy(pred0, test.labels)
            log.info("initial model: %d samples, accuracy %.4f", l0, acc0)
        for strat in strategies:
            model = model0
            for s, (Xa, Ya) in enumerate(increments):
                (model, outcome), t_train = _timed(
                    increment_inputs, model, Xa, Ya, strat, config.full_rank_assumed
                )
                train_t[strat][s].append(t_train)
                phase_t[strat][s].append(outcome.timings)
                (pred, _), t = _timed(predict, model, test.X)
                test_t[strat][s].append(t)
                if rep == 0:
                    acc[strat][s] = accuracy(pred, test.labels)
                    used[strat][s] = outcome.strategy_used.value
                    preds[strat][s] = pred
                    log.info(
                        "%s step %d: %s, accuracy %.4f, %.3fs",
                        strat.value, s + 1, outcome.strategy_used.value, acc[strat][s], t_train,
                    )
            del model

    med = lambda xs: float(np.median(xs))
    records: list[StepRecord] = []
    has_existing = BStrategy.EXISTING in strategies
    for strat in strategies:
        accum_train = med(init_train)
        accum_test = med(init_test)
        records.append(
            StepRecord(
                step=0, patterns_before=0, patterns_after=l0, strategy=strat.value,
                strategy_used="initial", accuracy=acc0,
                train_s=accum_train, train_min_s=min(init_train), train_max_s=max(init_train),
                accum_train_s=accum_train,
                test_s=accum_test, test_min_s=min(init_test), test_max_s=max(init_test),
                accum_test_s=accum_test,
                mismatches_vs_existing=0 if has_existing else None,
            )
        )
        for s in range(steps):
            tr, te = train_t[strat][s], test_t[strat][s]
            accum_train += med(tr)
            accum_test += med(te)
            phases = {
                name: med([p.get(name, 0.0) for p in phase_t[strat][s]])
                for name in phase_t[strat][s][0]
            }
            mism = None
            if has_existing:
                mism = int(np.sum(preds[strat][s] != preds[BStrategy.EXISTING][s]))
            records.append(
                StepRecord(
                    step=s + 1, patterns_before=l0 + s * q, patterns_after=l0 + (s + 1) * q,
                    strategy=strat.value, strategy_used=used[strat][s], accuracy=acc[strat][s],
                    train_s=med(tr), train_min_s=min(tr), train_max_s=max(tr),
                    accum_train_s=accum_train,
                    test_s=med(te), test_min_s=min(te), test_max_s=max(te),
                    accum_test_s=accum_test,
                    phases=phases, mismatches_vs_existing=mism,
                )
            )

    report = RunReport(config.arch.structure, records, _config_dict(config))
    if has_existing:
        for r in records:
            base = report.record(r.step, BStrategy.EXISTING.value)
            if r.step == 0:
                # The initial model is shared by every strategy.
                r.speedups = dict.fromkeys(SPEEDUP_KEYS, 1.0)
            else:
                r.speedups = {
                    "train_step": base.train_s / r.train_s,
                    "train_accum": base.accum_train_s / r.accum_train_s,
                    "test_step": base.test_s / r.test_s,
                    "test_accum": base.accum_test_s / r.accum_test_s,
                }
    return report


def _config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["strategies"] = [BStrategy(s).value for s in config.strategies]
    d["assume_full_rank"] = config.full_rank_assumed
    return d


CSV_FIELDS = (
    "step", "patterns_before", "patterns_after", "strategy", "strategy_used", "accuracy",
    "train_s", "accum_train_s", "test_s", "accum_test_s",
    "speedup_train_step", "speedup_train_accum", "speedup_test_step", "speedup_test_accum",
    "mismatches_vs_existing",
)


def _flat(r: StepRecord) -> dict:
    row = {k: getattr(r, k) for k in CSV_FIELDS if hasattr(r, k)}
    for key in SPEEDUP_KEYS:
        row[f"speedup_{key}"] = None if r.speedups is None else r.speedups[key]
    return row


def _patterns(r: StepRecord) -> str:
    if r.step == 0:
        return str(r.patterns_after)
    return f"{r.patterns_before} -({r.patterns_after - r.patterns_before})-> {r.patterns_after}"


def _table(report: RunReport) -> str:
    strategies = report.strategies
    existing = BStrategy.EXISTING.value
    others = [s for s in strategies if s != existing] if existing in strategies else strategies
    structure = f"({report.structure[0]},{report.structure[1]})"
    out = io.StringIO()
    for other in others:
        head = [
            "Number of Input Patterns", "Structure",
            "Acc Existing (%)" if existing in strategies else "", f"Acc {other} (%)",
            "Speedup Add. Train", "Speedup Accum. Train", "Speedup Add. Test", "Speedup Accum. Test",
        ]
        rows = []
        for step in report.steps:
            r = report.record(step, other)
            base = report.record(step, existing) if existing in strategies else None
            sp = r.speedups
            rows.append([
                _patterns(r), structure,
                f"{100 * base.accuracy:.2f}" if base else "", f"{100 * r.accuracy:.2f}",
                *(f"{sp[k]:.4f}" if sp else "-" for k in SPEEDUP_KEYS),
            ])
        widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(head)]
        line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        fmt = lambda cells: "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"
        out.write(f"Increment of input patterns: existing vs {other}\n")
        out.write("\n".join([line, fmt(head), line, *(fmt(r) for r in rows), line]) + "\n\n")
    return out.getvalue()


def emit_report(report: RunReport, fmt: str = "table", path=None) -> str:
    """Serialize ``report`` as ``csv``, ``json`` or ``table``; write to ``path`` if given."""
    if fmt == "json":
        text = json.dumps(
            {
                "structure": list(report.structure),
                "config": report.config,
                "records": [asdict(r) for r in report.records],
            },
            indent=2,
            sort_keys=True,
        ) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in report.records:
            writer.writerow(_flat(r))
        text = buf.getvalue()
    elif fmt in ("table", "pretty-table"):
        text = _table(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
