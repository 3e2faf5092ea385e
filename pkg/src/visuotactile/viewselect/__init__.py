"""Learned and baseline viewpoint selection for multi-view tactile estimation."""

from .fixtures import single_view_signal_dataset
from .fusion import FUSION_MODES, MultiViewEstimator, TRNEstimator, fuse_views
from .sampling import TRNConfig, sample_equidistant, sample_random, sample_trn_subset, sample_trn_subsets
from .selector import (
    EMABaseline,
    SelectorBank,
    log_prob_grad,
    reinforce_update,
    select_deterministic,
    select_stochastic,
    softmax_rows,
)
from .train import (
    BASELINES,
    SELECTORS,
    MultiViewConfig,
    MultiViewRun,
    gather_views,
    select_views,
    stage1_random_predictions,
    train_multiview_baseline,
    train_three_stage,
    write_selection_log,
)
from .value import ValueNetwork, ValueTrainer, onehot_selection, value_predict

__all__ = [name for name in dir() if not name.startswith("_")]
