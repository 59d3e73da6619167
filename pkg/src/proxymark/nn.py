"""Dense feed-forward classifier with exact backprop and SGD training.

Parameters live in a single flat float64 vector: for each layer, the weight
matrix (row-major, shape fan_in x fan_out) followed by the bias vector.
Class labels are 0-based throughout the in-memory API; 1-based labels only
appear at file-format boundaries.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointFormatError, InputError, SpecMismatchError, TrainingDivergedError

ACTIVATIONS = ("relu", "tanh")

PROB_FLOOR = 1e-12  # clamp for probabilities inside logs

CHECKPOINT_MAGIC = b"NWMK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_layers: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.input_dim < 1:
            raise InputError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 3:
            raise InputError(f"need at least 3 classes, got {self.num_classes}")
        if any(w < 1 for w in self.hidden_layers):
            raise InputError(f"all layer widths must be >= 1, got {self.hidden_layers}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.num_classes)

    @property
    def num_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class Model:
    spec: ModelSpec
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.spec.num_params,):
            raise InputError(
                f"theta has {self.theta.size} entries, spec implies {self.spec.num_params}"
            )
        if not np.all(np.isfinite(self.theta)):
            raise InputError("theta contains non-finite entries")

    def copy(self) -> "Model":
        return Model(self.spec, self.theta.copy())


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if not (self.learning_rate >= 0 and np.isfinite(self.learning_rate)):
            raise InputError("learning_rate must be finite and >= 0")
        if not (0 <= self.momentum < 1):
            raise InputError("momentum must be in [0, 1)")
        if not (self.weight_decay >= 0 and np.isfinite(self.weight_decay)):
            raise InputError("weight_decay must be finite and >= 0")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")


def unpack(spec: ModelSpec, theta: np.ndarray):
    """Split a flat parameter vector into per-layer (W, b) views."""
    dims = spec.layer_dims
    layers = []
    offset = 0
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = theta[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = theta[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def init_theta(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, drawn from the given generator."""
    theta = np.zeros(spec.num_params)
    dims = spec.layer_dims
    offset = 0
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        theta[offset : offset + fan_in * fan_out] = rng.uniform(
            -limit, limit, size=fan_in * fan_out
        )
        offset += fan_in * fan_out + fan_out
    return theta


def init_model(spec: ModelSpec, seed: int) -> Model:
    return Model(spec, init_theta(spec, np.random.default_rng(seed)))


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_features(spec: ModelSpec, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise InputError(f"expected feature dimension {spec.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("features contain non-finite entries")
    return x, single


def _forward_cached(model: Model, x: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    layers = unpack(model.spec, model.theta)
    act = model.spec.activation
    a = x
    pre, post = [], [x]
    for w, b in layers[:-1]:
        z = a @ w + b
        a = _activate(z, act)
        pre.append(z)
        post.append(a)
    w, b = layers[-1]
    logits = a @ w + b
    return _softmax(logits), pre, post


def forward(model: Model, x) -> np.ndarray:
    """Class-probability vector(s) for one sample or a batch."""
    xb, single = _check_features(model.spec, x)
    probs, _, _ = _forward_cached(model, xb)
    return probs[0] if single else probs


def predict(model: Model, x):
    """Argmax class label(s); ties resolve to the lowest index."""
    probs = forward(model, x)
    return int(np.argmax(probs)) if probs.ndim == 1 else np.argmax(probs, axis=1)


def cross_entropy(probs, label: int) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise InputError("cross_entropy expects a single probability vector")
    if not (0 <= label < probs.size):
        raise InputError(f"label {label} out of range for {probs.size} classes")
    return float(-np.log(np.clip(probs[label], PROB_FLOOR, 1.0)))


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise InputError("kl_divergence expects two probability vectors of equal length")
    qc = np.clip(q, PROB_FLOOR, 1.0)
    # 0 * log 0 convention: terms with p_i = 0 contribute nothing
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(qc[mask]))))


def _batch_ce_loss_grad(probs: np.ndarray, labels: np.ndarray):
    n = probs.shape[0]
    picked = np.clip(probs[np.arange(n), labels], PROB_FLOOR, 1.0)
    loss = float(-np.log(picked).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def _batch_kl_loss_grad(probs: np.ndarray, targets: np.ndarray):
    n = probs.shape[0]
    pc = np.clip(probs, PROB_FLOOR, 1.0)
    mask = targets > 0
    terms = np.where(mask, targets * (np.log(np.clip(targets, PROB_FLOOR, 1.0)) - np.log(pc)), 0.0)
    loss = float(terms.sum() / n)
    return loss, (probs - targets) / n


def gradients(model: Model, features, targets, loss: str = "ce") -> np.ndarray:
    """Analytic gradient of the mean batch loss wrt the flat parameters.

    For loss="ce", targets are integer labels; for loss="kl_to_targets",
    targets are probability rows and the loss is mean KL(target || output).
    """
    x, _ = _check_features(model.spec, features)
    if x.shape[0] == 0:
        raise InputError("batch must be non-empty")
    probs, pre, post = _forward_cached(model, x)
    if loss == "ce":
        labels = np.asarray(targets, dtype=np.int64)
        if labels.shape != (x.shape[0],):
            raise InputError("labels must be one integer per batch row")
        if labels.min() < 0 or labels.max() >= model.spec.num_classes:
            raise InputError("label out of range")
        _, dlogits = _batch_ce_loss_grad(probs, labels)
    elif loss == "kl_to_targets":
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != probs.shape:
            raise InputError("targets must match the batch probability shape")
        _, dlogits = _batch_kl_loss_grad(probs, t)
    else:
        raise InputError(f"unknown loss {loss!r}")
    return _backprop_cached(model, pre, post, dlogits)


def fit(
    spec: ModelSpec,
    features: np.ndarray,
    labels: np.ndarray | None,
    cfg: TrainConfig,
    *,
    teacher_probs: np.ndarray | None = None,
    gamma: float = 0.0,
    init: np.ndarray | None = None,
) -> tuple[Model, list[float]]:
    """Shared SGD loop behind train() and the stealing attacks.

    With teacher_probs=None the loss is plain cross-entropy on labels.
    Otherwise the per-batch loss is
        gamma * KL(teacher || output) + (1 - gamma) * CE(labels),
    with gamma=0 and gamma=1 taking the exact single-loss code path so the
    degenerate cases are bitwise identical to plain training / distillation.
    Weight decay is decoupled (theta *= 1 - wd before the step).
    """
    x, _ = _check_features(spec, features)
    n = x.shape[0]
    if n == 0:
        raise InputError("training data must be non-empty")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.min() < 0 or labels.max() >= spec.num_classes:
            raise InputError("label out of range")
    if cfg.batch_size > n:
        batch_size = n
    else:
        batch_size = cfg.batch_size

    rng = np.random.default_rng(cfg.seed)
    theta = init_theta(spec, rng) if init is None else np.array(init, dtype=np.float64)
    velocity = np.zeros_like(theta)
    model = Model(spec, theta)
    history: list[float] = []

    use_kl = teacher_probs is not None and gamma > 0.0
    use_ce = teacher_probs is None or gamma < 1.0
    if use_ce and labels is None:
        raise InputError("labels are required unless gamma=1 with teacher targets")

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            xb = x[idx]
            probs, pre, post = _forward_cached(model, xb)
            loss = 0.0
            dlogits = np.zeros_like(probs)
            if use_kl:
                kl_loss, kl_d = _batch_kl_loss_grad(probs, teacher_probs[idx])
                if gamma == 1.0:
                    loss, dlogits = kl_loss, kl_d
                else:
                    loss += gamma * kl_loss
                    dlogits += gamma * kl_d
            if use_ce:
                ce_loss, ce_d = _batch_ce_loss_grad(probs, labels[idx])
                if not use_kl:
                    loss, dlogits = ce_loss, ce_d
                else:
                    loss += (1.0 - gamma) * ce_loss
                    dlogits += (1.0 - gamma) * ce_d
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss}")
            grad = _backprop_cached(model, pre, post, dlogits)
            if cfg.weight_decay:
                theta *= 1.0 - cfg.weight_decay
            velocity *= cfg.momentum
            velocity += grad
            theta -= cfg.learning_rate * velocity
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return model, history


def _backprop_cached(model: Model, pre, post, dlogits) -> np.ndarray:
    spec = model.spec
    layers = unpack(spec, model.theta)
    grad = np.zeros_like(model.theta)
    glayers = unpack(spec, grad)
    delta = dlogits
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = glayers[i]
        gw[...] = post[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            w, _ = layers[i]
            delta = (delta @ w.T) * _activate_grad(pre[i - 1], spec.activation)
    return grad


def train(spec: ModelSpec, data, cfg: TrainConfig) -> Model:
    """Train a fresh model with seeded SGD; deterministic given the config."""
    model, _ = fit(spec, data.features, data.labels, cfg)
    return model


def accuracy(data, model: Model) -> float:
    if data.n == 0:
        raise InputError("dataset must be non-empty")
    preds = predict(model, data.features)
    return float(np.mean(preds == data.labels))


def checkpoint_bytes(model: Model) -> bytes:
    spec = model.spec
    act_code = ACTIVATIONS.index(spec.activation)
    header = struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, spec.input_dim)
    header += struct.pack("<I", len(spec.hidden_layers))
    header += struct.pack(f"<{len(spec.hidden_layers)}I", *spec.hidden_layers) if spec.hidden_layers else b""
    header += struct.pack("<II", spec.num_classes, act_code)
    return header + model.theta.astype("<f8").tobytes()


def save_checkpoint(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def load_checkpoint(path, expected_spec: ModelSpec | None = None) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    try:
        (input_dim,) = struct.unpack_from("<I", blob, 8)
        (n_hidden,) = struct.unpack_from("<I", blob, 12)
        widths = struct.unpack_from(f"<{n_hidden}I", blob, 16)
        off = 16 + 4 * n_hidden
        num_classes, act_code = struct.unpack_from("<II", blob, off)
        off += 8
    except struct.error as exc:
        raise CheckpointFormatError(f"{path}: truncated header") from exc
    if act_code >= len(ACTIVATIONS):
        raise CheckpointFormatError(f"{path}: unknown activation code {act_code}")
    spec = ModelSpec(input_dim, widths, num_classes, ACTIVATIONS[act_code])
    payload = blob[off:]
    if len(payload) != 8 * spec.num_params:
        raise CheckpointFormatError(
            f"{path}: expected {8 * spec.num_params} payload bytes, got {len(payload)}"
        )
    theta = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if expected_spec is not None and spec != expected_spec:
        raise SpecMismatchError(f"{path}: checkpoint spec {spec} != expected {expected_spec}")
    return Model(spec, theta)


def fingerprint(model: Model) -> str:
    """SHA-256 of the checkpoint serialization."""
    return hashlib.sha256(checkpoint_bytes(model)).hexdigest()
