"""Ordinal prototype learning.

Trains a small encoder so that feature-space geometry follows an ordered
label progression, tracks anchor-class prototypes with an EMA, and
classifies held-out middle-class samples by comparing their features to
the two anchors.
"""

from .data import (
    GenConfig,
    SyntheticOrdinalDataset,
    TrainingSet,
    generate,
    kfold_split,
    load_dataset,
    save_dataset,
    stratified_batches,
)
from .encoder import (
    AdamState,
    EncoderParams,
    HeadParams,
    adam_step,
    backward,
    encode,
    forward,
    init_adam,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .evaluation import binary_metrics, mann_whitney_one_sided, spearman
from .linalg import cosine_similarity, cosine_similarity_grad, neg_abs_distance, softmax
from .losses import (
    FeatureBatch,
    LocalPrototypes,
    LossBundle,
    cls2cls_loss,
    cross_entropy_loss,
    feature_similarity,
    hybrid_ordinal_loss,
    ins2cls_loss,
    ins2ins_loss,
    label_similarity,
    local_prototypes,
    total_loss,
)
from .prototypes import (
    PROGRESSIVE,
    STABLE,
    GlobalPrototypeStore,
    classify,
    ema_update,
    load_store,
    predict_progression,
    progression_scores,
    save_store,
)
from .ranking import BlackboxConfig, blackbox_rank_backward, rank, rank_argmin_oracle
from .trainer import (
    TrainConfig,
    TrainResult,
    ablation_config,
    cross_validate,
    evaluate_on,
    lambda_schedule,
    run_seeds,
    train,
)

__version__ = "0.1.0"
