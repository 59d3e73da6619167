"""Strict YAML experiment configuration.

Unknown keys are rejected so typos fail fast. Seeds for sub-stages are
derived from the single top-level seed (see harness.derive_seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .nn import ACTIVATIONS

DELTA_MODES = ("relative", "absolute")
ATTACK_KEYS = {
    "kind",
    "gamma",
    "prune_ratio",
    "hidden_layers",
    "activation",
    "epochs",
    "learning_rate",
    "momentum",
    "weight_decay",
    "batch_size",
}


@dataclass
class GeneratorBlock:
    classes: int = 4
    dim: int = 2
    per_class: int = 150
    spread: float = 0.6


@dataclass
class DatasetBlock:
    generator: GeneratorBlock | None = None
    csv: str | None = None
    holdout_fraction: float = 0.5


@dataclass
class SourceBlock:
    hidden_layers: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    epochs: int = 100
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 2048


@dataclass
class BallBlock:
    delta_mode: str = "relative"
    delta: float = 0.05
    tau: float = 1.0
    sigma: float | None = None
    m: int = 16
    n: int = 10
    max_candidates: int | None = None
    alpha: float = 0.05


@dataclass
class AttackBlock:
    kind: str
    gamma: float | None = None
    prune_ratio: float | None = None
    hidden_layers: tuple[int, ...] | None = None  # defaults to source architecture
    activation: str | None = None
    epochs: int | None = None
    learning_rate: float | None = None
    momentum: float | None = None
    weight_decay: float | None = None
    batch_size: int | None = None


@dataclass
class IndependentsBlock:
    count: int = 4
    subset_fraction: float = 0.5


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "proxymark-out"
    dataset: DatasetBlock = field(default_factory=DatasetBlock)
    source: SourceBlock = field(default_factory=SourceBlock)
    ball: BallBlock = field(default_factory=BallBlock)
    attacks: list[AttackBlock] = field(default_factory=list)
    independents: IndependentsBlock = field(default_factory=IndependentsBlock)
    repeats: int = 3


def _require_mapping(node, ctx):
    if not isinstance(node, dict):
        raise ConfigError(f"{ctx}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {sorted(unknown)}")


def _parse_dataset(node) -> DatasetBlock:
    node = _require_mapping(node, "dataset")
    _check_keys(node, {"generator", "csv", "split"}, "dataset")
    block = DatasetBlock()
    if "generator" in node and "csv" in node:
        raise ConfigError("dataset: give either generator or csv, not both")
    if "csv" in node:
        block.csv = str(node["csv"])
        if not Path(block.csv).exists():
            raise ConfigError(f"dataset.csv: file not found: {block.csv}")
    else:
        gen = _require_mapping(node.get("generator", {}), "dataset.generator")
        _check_keys(gen, {"classes", "dim", "per_class", "spread"}, "dataset.generator")
        block.generator = GeneratorBlock(
            classes=int(gen.get("classes", 4)),
            dim=int(gen.get("dim", 2)),
            per_class=int(gen.get("per_class", 150)),
            spread=float(gen.get("spread", 0.6)),
        )
    split = _require_mapping(node.get("split", {}), "dataset.split")
    _check_keys(split, {"holdout_fraction"}, "dataset.split")
    block.holdout_fraction = float(split.get("holdout_fraction", 0.5))
    return block


def _parse_source(node) -> SourceBlock:
    node = _require_mapping(node, "source")
    _check_keys(node, {"model", "train"}, "source")
    model = _require_mapping(node.get("model", {}), "source.model")
    _check_keys(model, {"hidden_layers", "activation"}, "source.model")
    train = _require_mapping(node.get("train", {}), "source.train")
    _check_keys(
        train,
        {"epochs", "learning_rate", "momentum", "weight_decay", "batch_size"},
        "source.train",
    )
    block = SourceBlock()
    if "hidden_layers" in model:
        block.hidden_layers = tuple(int(w) for w in model["hidden_layers"])
    if "activation" in model:
        if model["activation"] not in ACTIVATIONS:
            raise ConfigError(f"source.model.activation: unknown {model['activation']!r}")
        block.activation = model["activation"]
    for key in ("epochs", "batch_size"):
        if key in train:
            setattr(block, key, int(train[key]))
    for key in ("learning_rate", "momentum", "weight_decay"):
        if key in train:
            setattr(block, key, float(train[key]))
    return block


def _parse_ball(node) -> BallBlock:
    node = _require_mapping(node, "ball")
    _check_keys(
        node, {"delta_mode", "delta", "tau", "sigma", "m", "n", "max_candidates", "alpha"}, "ball"
    )
    block = BallBlock()
    if "delta_mode" in node:
        if node["delta_mode"] not in DELTA_MODES:
            raise ConfigError(f"ball.delta_mode must be one of {DELTA_MODES}")
        block.delta_mode = node["delta_mode"]
    for key in ("delta", "tau", "alpha"):
        if key in node:
            setattr(block, key, float(node[key]))
    if node.get("sigma") is not None:
        block.sigma = float(node["sigma"])
    for key in ("m", "n", "max_candidates"):
        if node.get(key) is not None:
            setattr(block, key, int(node[key]))
    return block


def _parse_attack(node, index: int) -> AttackBlock:
    ctx = f"attacks[{index}]"
    node = _require_mapping(node, ctx)
    _check_keys(node, ATTACK_KEYS, ctx)
    if "kind" not in node:
        raise ConfigError(f"{ctx}: missing kind")
    block = AttackBlock(kind=str(node["kind"]))
    if "gamma" in node:
        block.gamma = float(node["gamma"])
    if "prune_ratio" in node:
        block.prune_ratio = float(node["prune_ratio"])
    if "hidden_layers" in node:
        block.hidden_layers = tuple(int(w) for w in node["hidden_layers"])
    if "activation" in node:
        block.activation = str(node["activation"])
    for key in ("epochs", "batch_size"):
        if key in node:
            setattr(block, key, int(node[key]))
    for key in ("learning_rate", "momentum", "weight_decay"):
        if key in node:
            setattr(block, key, float(node[key]))
    return block


def _parse_independents(node) -> IndependentsBlock:
    node = _require_mapping(node, "independents")
    _check_keys(node, {"count", "subset_fraction"}, "independents")
    return IndependentsBlock(
        count=int(node.get("count", 4)),
        subset_fraction=float(node.get("subset_fraction", 0.5)),
    )


def parse_config(tree: dict) -> ExperimentConfig:
    tree = _require_mapping(tree, "config")
    _check_keys(
        tree,
        {"seed", "output_dir", "dataset", "source", "ball", "attacks", "independents", "repeats"},
        "config",
    )
    cfg = ExperimentConfig()
    if "seed" in tree:
        cfg.seed = int(tree["seed"])
    if "output_dir" in tree:
        cfg.output_dir = str(tree["output_dir"])
    if "dataset" in tree:
        cfg.dataset = _parse_dataset(tree["dataset"])
    if "source" in tree:
        cfg.source = _parse_source(tree["source"])
    if "ball" in tree:
        cfg.ball = _parse_ball(tree["ball"])
    if "attacks" in tree:
        if not isinstance(tree["attacks"], list):
            raise ConfigError("attacks: expected a list")
        cfg.attacks = [_parse_attack(a, i) for i, a in enumerate(tree["attacks"])]
    if "independents" in tree:
        cfg.independents = _parse_independents(tree["independents"])
    if "repeats" in tree:
        cfg.repeats = int(tree["repeats"])
        if cfg.repeats < 0:
            raise ConfigError("repeats must be >= 0")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if tree is None:
        tree = {}
    return parse_config(tree)
