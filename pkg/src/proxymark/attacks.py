"""Model stealing and watermark-removal procedures.

All attacks operate on a frozen source model and return a new surrogate;
the source parameters are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import AttackFailedError, InputError
from .nn import Model, ModelSpec, TrainConfig, accuracy, fit, forward, predict, unpack
from .errors import TrainingDivergedError

ATTACK_KINDS = ("soft_label", "hard_label", "rgt", "prune", "finetune")


@dataclass
class AttackConfig:
    kind: str
    surrogate_spec: ModelSpec
    surrogate_data: Dataset
    train: TrainConfig
    gamma: float | None = None
    prune_ratio: float | None = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InputError(f"unknown attack kind {self.kind!r}")
        if (self.gamma is not None) != (self.kind == "rgt"):
            raise InputError("gamma is required for rgt and forbidden otherwise")
        if self.gamma is not None and not (0.0 <= self.gamma <= 1.0):
            raise InputError("gamma must be in [0, 1]")
        if (self.prune_ratio is not None) != (self.kind == "prune"):
            raise InputError("prune_ratio is required for prune and forbidden otherwise")
        if self.prune_ratio is not None and not (0.0 <= self.prune_ratio < 1.0):
            raise InputError("prune_ratio must be in [0, 1)")


@dataclass
class AttackResult:
    surrogate: Model
    clean_accuracy: float
    loss_history: list[float]
    attack_seed: int
    relabeled_data: Dataset | None = None  # hard-label attack only


def _check_dims(f: Model, cfg: AttackConfig) -> None:
    if cfg.surrogate_spec.input_dim != f.spec.input_dim:
        raise InputError("surrogate input dimension must match the source")
    if cfg.surrogate_data.dim != f.spec.input_dim:
        raise InputError("surrogate data dimension must match the source")


def _run_fit(cfg: AttackConfig, labels, teacher, gamma) -> tuple[Model, list[float]]:
    try:
        return fit(
            cfg.surrogate_spec,
            cfg.surrogate_data.features,
            labels,
            cfg.train,
            teacher_probs=teacher,
            gamma=gamma,
        )
    except TrainingDivergedError as exc:
        raise AttackFailedError(str(exc)) from exc


def steal_soft(f: Model, cfg: AttackConfig) -> AttackResult:
    """Distill against the source's probability vectors (teacher frozen)."""
    if cfg.kind != "soft_label":
        raise InputError("config kind must be soft_label")
    _check_dims(f, cfg)
    teacher = forward(f, cfg.surrogate_data.features)
    surrogate, history = _run_fit(cfg, None, teacher, 1.0)
    return AttackResult(surrogate, accuracy(cfg.surrogate_data, surrogate), history, cfg.train.seed)


def steal_hard(f: Model, cfg: AttackConfig) -> AttackResult:
    """Train on the dataset relabeled with the source's argmax predictions."""
    if cfg.kind != "hard_label":
        raise InputError("config kind must be hard_label")
    _check_dims(f, cfg)
    relabeled = Dataset(
        cfg.surrogate_data.features,
        predict(f, cfg.surrogate_data.features),
        cfg.surrogate_spec.num_classes,
    )
    surrogate, history = _run_fit(
        AttackConfig("hard_label", cfg.surrogate_spec, relabeled, cfg.train),
        relabeled.labels,
        None,
        0.0,
    )
    return AttackResult(
        surrogate,
        accuracy(cfg.surrogate_data, surrogate),
        history,
        cfg.train.seed,
        relabeled_data=relabeled,
    )


def steal_rgt(f: Model, cfg: AttackConfig) -> AttackResult:
    """Distillation mixed with ground-truth cross-entropy, weighted by gamma.

    gamma=0 reduces bitwise to plain training and gamma=1 to the soft-label
    attack, because all three share the same fit() code path.
    """
    if cfg.kind != "rgt":
        raise InputError("config kind must be rgt")
    _check_dims(f, cfg)
    teacher = forward(f, cfg.surrogate_data.features)
    surrogate, history = _run_fit(cfg, cfg.surrogate_data.labels, teacher, cfg.gamma)
    return AttackResult(surrogate, accuracy(cfg.surrogate_data, surrogate), history, cfg.train.seed)


def neuron_activity(f: Model, calibration: Dataset) -> list[np.ndarray]:
    """Mean absolute post-activation per hidden neuron over the calibration set."""
    from .nn import _forward_cached  # reuse the cached pass

    _, _, post = _forward_cached(f, calibration.features)
    # post[0] is the input; post[1:] are hidden activations
    return [np.mean(np.abs(a), axis=0) for a in post[1:]]


def prune(f: Model, cfg: AttackConfig, calibration: Dataset | None = None) -> AttackResult:
    """Zero out the least active floor(ratio * width) neurons per hidden layer.

    Structural zeroing only, no retraining: a cut neuron loses its incoming
    column, bias, and outgoing row. Ties break by neuron index.
    """
    if cfg.kind != "prune":
        raise InputError("config kind must be prune")
    if cfg.surrogate_spec != f.spec:
        raise InputError("pruning keeps the source architecture")
    if calibration is None:
        calibration = cfg.surrogate_data
    ratio = cfg.prune_ratio
    theta = f.theta.copy()
    layers = unpack(f.spec, theta)
    activities = neuron_activity(f, calibration)
    for li, width in enumerate(f.spec.hidden_layers):
        k = int(ratio * width)
        if k == 0:
            continue
        order = np.argsort(activities[li], kind="stable")
        cut = order[:k]
        w_in, b_in = layers[li]
        w_in[:, cut] = 0.0
        b_in[cut] = 0.0
        w_out, _ = layers[li + 1]
        w_out[cut, :] = 0.0
    surrogate = Model(f.spec, theta)
    return AttackResult(surrogate, accuracy(cfg.surrogate_data, surrogate), [], cfg.train.seed)


def finetune(f: Model, cfg: AttackConfig) -> AttackResult:
    """Continue cross-entropy training of a copy of the source."""
    if cfg.kind != "finetune":
        raise InputError("config kind must be finetune")
    if cfg.surrogate_spec != f.spec:
        raise InputError("finetune keeps the source architecture")
    try:
        surrogate, history = fit(
            f.spec,
            cfg.surrogate_data.features,
            cfg.surrogate_data.labels,
            cfg.train,
            init=f.theta.copy(),
        )
    except TrainingDivergedError as exc:
        raise AttackFailedError(str(exc)) from exc
    return AttackResult(surrogate, accuracy(cfg.surrogate_data, surrogate), history, cfg.train.seed)


def run_attack(f: Model, cfg: AttackConfig) -> AttackResult:
    """Dispatch on the attack kind."""
    return {
        "soft_label": steal_soft,
        "hard_label": steal_hard,
        "rgt": steal_rgt,
        "prune": prune,
        "finetune": finetune,
    }[cfg.kind](f, cfg)
