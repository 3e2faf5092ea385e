"""Single-image visual to tactile estimation with a shared latent space."""

from .checkpoint import CheckpointError, decode_text, encode_text, load_checkpoint, save_checkpoint
from .losses import (
    LossWeights,
    discriminator_loss,
    generator_loss,
    loss_adversarial,
    loss_class,
    loss_emb,
    loss_est,
    total_loss,
)
from .models import (
    CrossModalModel,
    RegressionModel,
    Standardizer,
    check_images,
    check_tactile,
    embed_tactile,
    embed_visual,
    estimate,
    predict,
)
from .pseudolabel import PCA, KMeansResult, PseudoLabeler, build_pseudo_labels, kmeans, kmeans_pp_init
from .train import (
    DivergenceError,
    TrainConfig,
    TrainedEstimator,
    label_features,
    registry_of,
    train_cross_modal,
    train_regression_baseline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
