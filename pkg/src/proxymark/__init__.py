"""Trigger-set watermarking with proxy-model verification."""

from .data import Dataset, SplitSpec, load_csv, make_blobs, save_csv, split
from .nn import (
    Model,
    ModelSpec,
    TrainConfig,
    accuracy,
    cross_entropy,
    forward,
    gradients,
    kl_divergence,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .stats import (
    agreement_trials,
    clopper_pearson_lower,
    lemma_bound,
    ownership_verdict,
    trigger_accuracy,
)
from .watermark import (
    ProxyBall,
    TriggerSample,
    TriggerSet,
    VerifyConfig,
    load_trigger_set,
    recompute_and_check,
    sample_proxy,
    save_trigger_set,
    trigger_candidate,
    verify_trigger_set,
    verify_trigger_set_integrity,
)

__all__ = [
    "Dataset",
    "SplitSpec",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "ProxyBall",
    "TriggerSample",
    "TriggerSet",
    "VerifyConfig",
    "accuracy",
    "agreement_trials",
    "clopper_pearson_lower",
    "cross_entropy",
    "forward",
    "gradients",
    "kl_divergence",
    "lemma_bound",
    "load_checkpoint",
    "load_csv",
    "load_trigger_set",
    "make_blobs",
    "ownership_verdict",
    "predict",
    "recompute_and_check",
    "sample_proxy",
    "save_checkpoint",
    "save_csv",
    "save_trigger_set",
    "split",
    "train",
    "trigger_accuracy",
    "trigger_candidate",
    "verify_trigger_set",
    "verify_trigger_set_integrity",
]

__version__ = "0.1.0"
