"""Experiment orchestration: training, attack batches, verification, reports.

Stage seeds are derived from the single experiment seed via
numpy.random.SeedSequence([base_seed, *tags]); the tag layout is fixed:
    (0,)            source training
    (1,)            trigger verification (proxies + candidate stream)
    (2, ai, k)      run k of attack ai
    (3, k)          independent model k
    (4,)            complement model for integrity runs
This derivation is documented here and must stay stable across versions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attacks as atk
from .config import AttackBlock, ExperimentConfig
from .data import Dataset, SplitSpec, load_csv, make_blobs, split
from .errors import InputError
from .nn import Model, ModelSpec, TrainConfig, accuracy, save_checkpoint, train
from .stats import (
    TransferabilityBound,
    Verdict,
    clopper_pearson_lower,
    lemma_bound,
    ownership_verdict,
    trigger_accuracy,
)
from .watermark import ProxyBall, VerifyConfig, relative_delta, save_trigger_set, verify_trigger_set

REPORT_HEADER = "role,attack,seed,clean_acc,trigger_acc,verdict"
PLOTDATA_HEADER = "ratio,clean_acc,trigger_acc"


def derive_seed(base: int, *tags: int) -> int:
    """Stable stage seed from the experiment seed and a tag tuple."""
    return int(np.random.SeedSequence([int(base), *map(int, tags)]).generate_state(1)[0])


@dataclass
class ReportRow:
    role: str  # source | surrogate | independent
    attack: str  # attack kind or "-"
    seed: int
    clean_acc: float
    trigger_acc: float
    verdict: str

    def to_csv(self) -> str:
        return ",".join(
            [self.role, self.attack, str(self.seed), repr(self.clean_acc),
             repr(self.trigger_acc), self.verdict]
        )


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    bound: TransferabilityBound
    baseline_accuracy: float
    baseline_kind: str
    acceptance_stats: dict
    prune_curve: list[tuple[float, float, float]] = field(default_factory=list)
    wall_clock: float = 0.0

    def aggregates(self) -> dict[tuple[str, str], tuple[float, float, int]]:
        """(role, attack) -> (mean trigger acc, std, count)."""
        groups: dict[tuple[str, str], list[float]] = {}
        for row in self.rows:
            groups.setdefault((row.role, row.attack), []).append(row.trigger_acc)
        return {
            key: (float(np.mean(v)), float(np.std(v)), len(v)) for key, v in groups.items()
        }


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    block = cfg.dataset
    if block.csv is not None:
        return load_csv(block.csv)
    gen = block.generator
    return make_blobs(gen.classes, gen.dim, gen.per_class, gen.spread, derive_seed(cfg.seed, 10))


def source_spec(cfg: ExperimentConfig, data: Dataset) -> ModelSpec:
    return ModelSpec(data.dim, cfg.source.hidden_layers, data.num_classes, cfg.source.activation)


def source_train_config(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    s = cfg.source
    return TrainConfig(s.epochs, s.learning_rate, s.momentum, s.weight_decay, s.batch_size, seed)


def attack_config(
    block: AttackBlock, base_spec: ModelSpec, data: Dataset, base_train: TrainConfig, seed: int
) -> atk.AttackConfig:
    spec = base_spec
    if block.hidden_layers is not None or block.activation is not None:
        spec = ModelSpec(
            base_spec.input_dim,
            block.hidden_layers if block.hidden_layers is not None else base_spec.hidden_layers,
            base_spec.num_classes,
            block.activation if block.activation is not None else base_spec.activation,
        )
    train_cfg = replace(
        base_train,
        seed=seed,
        **{
            k: getattr(block, k)
            for k in ("epochs", "learning_rate", "momentum", "weight_decay", "batch_size")
            if getattr(block, k) is not None
        },
    )
    return atk.AttackConfig(
        kind=block.kind,
        surrogate_spec=spec,
        surrogate_data=data,
        train=train_cfg,
        gamma=block.gamma,
        prune_ratio=block.prune_ratio,
    )


def train_independent(
    spec: ModelSpec, data: Dataset, subset_fraction: float, seed: int,
    train_cfg: TrainConfig | None = None,
) -> Model:
    """Train on a seeded random subset; fraction 1.0 shares the plain path."""
    if not (0.0 < subset_fraction <= 1.0):
        raise InputError("subset_fraction must be in (0, 1]")
    cfg = replace(train_cfg, seed=seed) if train_cfg is not None else TrainConfig(seed=seed)
    if subset_fraction < 1.0:
        size = int(subset_fraction * data.n)
        if size == 0:
            raise InputError("subset_fraction produces an empty training set")
        picker = np.random.default_rng([seed, 99])
        idx = np.sort(picker.choice(data.n, size=size, replace=False))
        data = data.subset(idx)
    return train(spec, data, cfg)


def make_ball(cfg: ExperimentConfig, source: Model, reference: Dataset) -> ProxyBall:
    b = cfg.ball
    delta = relative_delta(source, b.delta) if b.delta_mode == "relative" else b.delta
    return ProxyBall(
        source,
        delta,
        tau=b.tau,
        sigma=b.sigma,
        reference_data=reference if b.tau < 1.0 else None,
    )


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> ExperimentReport:
    """Full pipeline: source, trigger set, attacks, independents, verdicts."""
    start = time.monotonic()
    outdir = Path(output_dir if output_dir is not None else cfg.output_dir)
    ckpt_dir = outdir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    data = build_dataset(cfg)
    train_data, holdout = split(data, SplitSpec(cfg.dataset.holdout_fraction, derive_seed(cfg.seed, 11)))
    spec = source_spec(cfg, data)
    base_train = source_train_config(cfg, derive_seed(cfg.seed, 0))
    source = train(spec, train_data, base_train)
    save_checkpoint(source, ckpt_dir / "source.ckpt")

    ball = make_ball(cfg, source, train_data)
    vcfg = VerifyConfig(cfg.ball.m, cfg.ball.n, cfg.ball.max_candidates, derive_seed(cfg.seed, 1))
    trigger_set = verify_trigger_set(holdout, source, ball, vcfg)
    save_trigger_set(trigger_set, outdir / "trigger_set.json")

    p_hat = clopper_pearson_lower(vcfg.m, vcfg.m, cfg.ball.alpha)
    bound = TransferabilityBound(p_hat, cfg.ball.alpha, lemma_bound(trigger_set.n, cfg.ball.alpha))

    independents: list[Model] = []
    for k in range(cfg.independents.count):
        g = train_independent(
            spec, train_data, cfg.independents.subset_fraction, derive_seed(cfg.seed, 3, k),
            train_cfg=base_train,
        )
        independents.append(g)
        save_checkpoint(g, ckpt_dir / f"independent_{k}.ckpt")

    if independents:
        baseline = float(np.mean([trigger_accuracy(trigger_set, g) for g in independents]))
        baseline_kind = "independent-models"
    else:
        baseline = 1.0 / spec.num_classes
        baseline_kind = "chance"

    def verdict_of(tacc: float) -> str:
        if baseline >= p_hat:
            return Verdict.INCONCLUSIVE.value
        return ownership_verdict(tacc, baseline, p_hat)[0].value

    rows = [
        ReportRow(
            "source", "-", base_train.seed, accuracy(data, source),
            trigger_accuracy(trigger_set, source), verdict_of(trigger_accuracy(trigger_set, source)),
        )
    ]
    prune_curve: list[tuple[float, float, float]] = []
    for ai, block in enumerate(cfg.attacks):
        for k in range(cfg.repeats):
            seed = derive_seed(cfg.seed, 2, ai, k)
            acfg = attack_config(block, spec, train_data, base_train, seed)
            result = atk.run_attack(source, acfg)
            tacc = trigger_accuracy(trigger_set, result.surrogate)
            clean = accuracy(data, result.surrogate)
            rows.append(ReportRow("surrogate", block.kind, seed, clean, tacc, verdict_of(tacc)))
            name = f"surrogate_{block.kind}_{ai}_{k}"
            save_checkpoint(result.surrogate, ckpt_dir / f"{name}.ckpt")
            _write_attack_manifest(ckpt_dir / f"{name}.json", block, result)
            if block.kind == "prune":
                prune_curve.append((block.prune_ratio, clean, tacc))

    for k, g in enumerate(independents):
        tacc = trigger_accuracy(trigger_set, g)
        rows.append(
            ReportRow("independent", "-", derive_seed(cfg.seed, 3, k), accuracy(data, g), tacc,
                      verdict_of(tacc))
        )

    report = ExperimentReport(
        rows=rows,
        bound=bound,
        baseline_accuracy=baseline,
        baseline_kind=baseline_kind,
        acceptance_stats={
            "candidates_consumed": trigger_set.stats.candidates_consumed,
            "accepted": trigger_set.stats.accepted,
            "acceptance_rate": trigger_set.stats.acceptance_rate,
        },
        prune_curve=prune_curve,
        wall_clock=time.monotonic() - start,
    )
    emit_report(report, outdir)
    return report


def _write_attack_manifest(path: Path, block: AttackBlock, result: atk.AttackResult) -> None:
    import json

    manifest = {
        "kind": block.kind,
        "hyperparameters": {
            k: getattr(block, k)
            for k in ("gamma", "prune_ratio", "epochs", "learning_rate", "momentum",
                      "weight_decay", "batch_size")
            if getattr(block, k) is not None
        },
        "seed": result.attack_seed,
        "clean_accuracy": result.clean_accuracy,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="ascii")


def emit_report(report: ExperimentReport, output_dir) -> None:
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    lines = [REPORT_HEADER] + [row.to_csv() for row in report.rows]
    (outdir / "report.csv").write_text("\n".join(lines) + "\n", encoding="ascii")

    plot_lines = [PLOTDATA_HEADER] + [
        f"{repr(r)},{repr(c)},{repr(t)}" for r, c, t in report.prune_curve
    ]
    (outdir / "plotdata.csv").write_text("\n".join(plot_lines) + "\n", encoding="ascii")

    summary = ["experiment summary", "=" * 40]
    summary.append(f"p_hat (CP lower, alpha={report.bound.alpha}): {report.bound.p_hat:.6f}")
    summary.append(f"phi (set-level): {report.bound.phi:.6f}")
    summary.append(
        f"baseline trigger accuracy: {report.baseline_accuracy:.6f} ({report.baseline_kind})"
    )
    summary.append(f"acceptance: {report.acceptance_stats}")
    summary.append("")
    summary.append(f"{'group':<28}{'trigger acc (mean +/- std)':<28}{'runs':<6}")
    for (role, kind), (mean, std, count) in sorted(report.aggregates().items()):
        summary.append(f"{role + '/' + kind:<28}{mean:.4f} +/- {std:.4f}{'':<10}{count:<6}")
    summary.append("")
    summary.append(f"wall clock: {report.wall_clock:.2f}s")
    (outdir / "summary.txt").write_text("\n".join(summary) + "\n", encoding="ascii")
