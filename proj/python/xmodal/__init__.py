"""Cross-modal distillation: frozen modality-A teacher supervising modality-B students."""

from ._core import (
    CombineMode,
    ConfigError,
    DatasetSplit,
    DistillConfig,
    DomainError,
    EpochRecord,
    GenConfig,
    IoError,
    LossKind,
    MlpNetwork,
    NumericError,
    PairedSample,
    PeerKind,
    ShapeError,
    TeacherCache,
    TrainHyper,
    TrainedEnsemble,
    argmax_lowest,
    bitwise_equal,
    cache_teacher_predictions,
    ce_hard_grad,
    ce_hard_loss,
    derive_seed,
    distill_single,
    ensemble_predict,
    evaluate,
    evaluate_ensemble,
    generate,
    inject_label_noise,
    kl_grad,
    kl_loss,
    labels_of,
    load_dataset,
    load_model,
    log_softened_softmax,
    modality_a,
    modality_b,
    mutual_distill,
    mutual_loss,
    save_dataset,
    save_model,
    shannon_entropy,
    softened_softmax,
    train_supervised,
)

__all__ = [
    "CombineMode",
    "ConfigError",
    "DatasetSplit",
    "DistillConfig",
    "DomainError",
    "EpochRecord",
    "GenConfig",
    "IoError",
    "LossKind",
    "MlpNetwork",
    "NumericError",
    "PairedSample",
    "PeerKind",
    "ShapeError",
    "TeacherCache",
    "TrainHyper",
    "TrainedEnsemble",
    "argmax_lowest",
    "bitwise_equal",
    "cache_teacher_predictions",
    "ce_hard_grad",
    "ce_hard_loss",
    "derive_seed",
    "distill_single",
    "ensemble_predict",
    "evaluate",
    "evaluate_ensemble",
    "generate",
    "inject_label_noise",
    "kl_grad",
    "kl_loss",
    "labels_of",
    "load_dataset",
    "load_model",
    "log_softened_softmax",
    "modality_a",
    "modality_b",
    "mutual_distill",
    "mutual_loss",
    "save_dataset",
    "save_model",
    "shannon_entropy",
    "softened_softmax",
    "train_supervised",
]
