"""Trigger-set generation and proxy-ball verification.

Candidates are convex combinations of hold-out pairs from different classes,
kept only when the source model assigns them a third class. Verification
freezes m proxy models drawn from a weight-space ball around the source and
accepts a candidate only when every proxy agrees with the surprise label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import (
    BallTooTightError,
    InputError,
    InsufficientTransferabilityError,
    NoCandidateFoundError,
)
from .nn import Model, accuracy, fingerprint, predict

LAMBDA_MARGIN = 1e-6  # keep the mixing weight strictly interior
_REJECTION_CAP = 1000  # consecutive proxy rejections under tau < 1

TRIGGER_FILE_VERSION = 1


@dataclass(frozen=True)
class TriggerSample:
    x_star: np.ndarray
    y_star: int
    parent_a: int
    parent_b: int
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=np.float64))
        if not (0.0 < self.lam < 1.0):
            raise InputError(f"lambda must be in (0, 1), got {self.lam}")


@dataclass
class VerifyStats:
    candidates_consumed: int = 0
    accepted: int = 0
    proxy_seed_scheme: tuple[int, ...] = ()
    trigger_accuracy: float = 1.0

    @property
    def acceptance_rate(self) -> float:
        if self.candidates_consumed == 0:
            return 0.0
        return self.accepted / self.candidates_consumed


@dataclass
class TriggerSet:
    samples: list[TriggerSample]
    source_fingerprint: str
    ball_params: dict = field(default_factory=dict)
    seed: int | None = None
    stats: VerifyStats | None = None

    @property
    def n(self) -> int:
        return len(self.samples)


@dataclass
class ProxyBall:
    source: Model
    delta: float
    tau: float = 1.0
    sigma: float | None = None
    reference_data: Dataset | None = None

    def __post_init__(self):
        if self.delta < 0 or not np.isfinite(self.delta):
            raise InputError("delta must be finite and >= 0")
        if not (0.0 < self.tau <= 1.0):
            raise InputError("tau must be in (0, 1]")
        if self.sigma is None:
            # expected noise norm ~ sigma * sqrt(dim); this makes delta the scale knob
            dim = self.source.theta.size
            self.sigma = self.delta / np.sqrt(dim) if self.delta > 0 else 1.0
        if self.sigma <= 0:
            raise InputError("sigma must be positive")
        if self.tau < 1.0 and self.reference_data is None:
            raise InputError("tau < 1 requires reference_data for the accuracy gap check")

    def params(self) -> dict:
        return {"delta": self.delta, "tau": self.tau, "sigma": self.sigma}


def relative_delta(source: Model, fraction: float = 0.05) -> float:
    """Delta as a fraction of the source weight norm (desk-scale default)."""
    return float(fraction * np.linalg.norm(source.theta))


@dataclass(frozen=True)
class VerifyConfig:
    m: int = 16
    n: int = 10
    max_candidates: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise InputError("m must be >= 1")
        if self.n < 1:
            raise InputError("n must be >= 1")
        if self.max_candidates is None:
            object.__setattr__(self, "max_candidates", 200 * self.n)
        if self.max_candidates < self.n:
            raise InputError("max_candidates must be >= n")


def trigger_candidate(
    holdout: Dataset, model: Model, rng: np.random.Generator, max_attempts: int = 100_000
) -> TriggerSample:
    """One accepted mixture sample, or NoCandidateFoundError after the cap."""
    if holdout.num_classes < 3:
        raise InputError("need at least 3 classes for a third-class surprise label")
    if np.unique(holdout.labels).size < 2:
        raise NoCandidateFoundError("hold-out set contains fewer than 2 distinct classes")
    n = holdout.n
    for _ in range(max_attempts):
        i, j = rng.integers(0, n, size=2)
        ya, yb = int(holdout.labels[i]), int(holdout.labels[j])
        if ya == yb:
            continue
        lam = float(rng.uniform(LAMBDA_MARGIN, 1.0 - LAMBDA_MARGIN))
        x_star = lam * holdout.features[i] + (1.0 - lam) * holdout.features[j]
        y_star = predict(model, x_star)
        if y_star != ya and y_star != yb:
            return TriggerSample(x_star, y_star, int(i), int(j), lam)
    raise NoCandidateFoundError(
        f"no third-class mixture found in {max_attempts} pair draws"
    )


def sample_proxy(ball: ProxyBall, rng: np.random.Generator) -> Model:
    """Gaussian weight perturbation clipped to the ball radius.

    The noise direction is preserved: draws with norm above delta are rescaled
    to exactly delta. Under tau < 1, rejection-sample on the accuracy gap.
    """
    source = ball.source
    base_acc = accuracy(ball.reference_data, source) if ball.tau < 1.0 else None
    for _ in range(_REJECTION_CAP):
        delta_vec = rng.normal(0.0, ball.sigma, size=source.theta.size)
        norm = np.linalg.norm(delta_vec)
        if norm > ball.delta:
            delta_vec *= ball.delta / norm if norm > 0 else 0.0
        proxy = Model(source.spec, source.theta + delta_vec)
        if ball.tau >= 1.0:
            return proxy
        if abs(accuracy(ball.reference_data, proxy) - base_acc) <= ball.tau:
            return proxy
    raise BallTooTightError(
        f"{_REJECTION_CAP} consecutive proxies violated the tau={ball.tau} accuracy gap"
    )


def build_proxies(ball: ProxyBall, cfg: VerifyConfig) -> list[Model]:
    """The frozen proxy list for a verification run; reconstructible from seeds."""
    return [
        sample_proxy(ball, np.random.default_rng([cfg.seed, 1, i])) for i in range(cfg.m)
    ]


def _candidate_rng(cfg: VerifyConfig) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, 2])


def _collect(
    holdout: Dataset,
    model: Model,
    proxies: list[Model],
    cfg: VerifyConfig,
    extra_reject=None,
) -> TriggerSet:
    rng = _candidate_rng(cfg)
    stats = VerifyStats(proxy_seed_scheme=(cfg.seed, 1))
    samples: list[TriggerSample] = []
    attempt_cap = 10 * cfg.max_candidates
    while len(samples) < cfg.n:
        if stats.candidates_consumed >= cfg.max_candidates:
            partial = TriggerSet(samples, fingerprint(model), seed=cfg.seed, stats=stats)
            raise InsufficientTransferabilityError(
                f"consumed {cfg.max_candidates} candidates, accepted only {len(samples)} "
                f"of {cfg.n}; the ball is likely mis-sized",
                partial_set=partial,
                stats=stats,
            )
        cand = trigger_candidate(holdout, model, rng, max_attempts=attempt_cap)
        stats.candidates_consumed += 1
        if all(predict(p, cand.x_star) == cand.y_star for p in proxies) and (
            extra_reject is None or not extra_reject(cand)
        ):
            samples.append(cand)
            stats.accepted += 1
    ts = TriggerSet(samples, fingerprint(model), seed=cfg.seed, stats=stats)
    return ts


def verify_trigger_set(
    holdout: Dataset,
    model: Model,
    ball: ProxyBall,
    cfg: VerifyConfig,
    *,
    resample_per_candidate: bool = False,
) -> TriggerSet:
    """Collect n candidates on which all m frozen proxies agree with y*."""
    if resample_per_candidate:
        # ablation path: a fresh proxy batch per candidate
        counter = [0]

        def check(cand):
            counter[0] += 1
            fresh = [
                sample_proxy(ball, np.random.default_rng([cfg.seed, 3, counter[0], i]))
                for i in range(cfg.m)
            ]
            return any(predict(p, cand.x_star) != cand.y_star for p in fresh)

        ts = _collect(holdout, model, [], cfg, extra_reject=check)
    else:
        proxies = build_proxies(ball, cfg)
        ts = _collect(holdout, model, proxies, cfg)
    ts.ball_params = ball.params() | {"m": cfg.m}
    return ts


def verify_trigger_set_integrity(
    holdout: Dataset,
    model: Model,
    ball: ProxyBall,
    complements: list[Model],
    cfg: VerifyConfig,
) -> TriggerSet:
    """Verification that also demands every complement model disagrees with y*.

    Complements must lie outside the ball; weight distance is undefined across
    architectures, so differently-shaped models count as outside.
    """
    if not complements:
        raise InputError("need at least one complement model")
    for k, comp in enumerate(complements):
        if comp.spec == model.spec:
            dist = np.linalg.norm(comp.theta - model.theta)
            if dist <= ball.delta:
                raise InputError(
                    f"complement {k} lies inside the ball (distance {dist:.4g} <= {ball.delta:.4g})"
                )
    proxies = build_proxies(ball, cfg)

    def agrees_with_any_complement(cand):
        return any(predict(c, cand.x_star) == cand.y_star for c in complements)

    ts = _collect(holdout, model, proxies, cfg, extra_reject=agrees_with_any_complement)
    ts.ball_params = ball.params() | {"m": cfg.m, "complements": len(complements)}
    return ts


def recompute_and_check(sample: TriggerSample, holdout: Dataset, model: Model) -> bool:
    """Audit a (possibly deserialized) sample against its parents and the model."""
    if not (0 <= sample.parent_a < holdout.n and 0 <= sample.parent_b < holdout.n):
        raise InputError("parent index out of range")
    mixed = (
        sample.lam * holdout.features[sample.parent_a]
        + (1.0 - sample.lam) * holdout.features[sample.parent_b]
    )
    if np.max(np.abs(mixed - sample.x_star)) > 1e-12:
        return False
    return predict(model, sample.x_star) == sample.y_star


def save_trigger_set(ts: TriggerSet, path) -> None:
    """Manifest (JSON) next to a little-endian float64 blob of the x* vectors."""
    path = Path(path)
    blob_path = path.with_suffix(".bin")
    xs = np.stack([s.x_star for s in ts.samples]) if ts.samples else np.zeros((0, 0))
    blob_path.write_bytes(xs.astype("<f8").tobytes())
    manifest = {
        "version": TRIGGER_FILE_VERSION,
        "n": ts.n,
        "dim": int(xs.shape[1]) if ts.samples else 0,
        "source_fingerprint": ts.source_fingerprint,
        "seeds": {"verify_seed": ts.seed},
        "ball": ts.ball_params,
        "blob": blob_path.name,
        "samples": [
            {
                "parent_a": s.parent_a,
                "parent_b": s.parent_b,
                "lambda": f"{s.lam:.17g}",
                "y_star": s.y_star + 1,  # 1-based on disk
            }
            for s in ts.samples
        ],
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="ascii")


def load_trigger_set(path) -> TriggerSet:
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="ascii"))
    if manifest.get("version") != TRIGGER_FILE_VERSION:
        raise InputError(f"unsupported trigger-set file version {manifest.get('version')}")
    blob = (path.parent / manifest["blob"]).read_bytes()
    n, dim = manifest["n"], manifest["dim"]
    xs = np.frombuffer(blob, dtype="<f8").reshape(n, dim) if n else np.zeros((0, 0))
    samples = [
        TriggerSample(
            x_star=xs[i].copy(),
            y_star=rec["y_star"] - 1,
            parent_a=rec["parent_a"],
            parent_b=rec["parent_b"],
            lam=float(rec["lambda"]),
        )
        for i, rec in enumerate(manifest["samples"])
    ]
    return TriggerSet(
        samples,
        manifest["source_fingerprint"],
        ball_params=manifest.get("ball", {}),
        seed=manifest.get("seeds", {}).get("verify_seed"),
    )
