"""Gaussian label distribution learning for yaw/pitch/roll estimation."""

__version__ = "0.1.0"

from .binning import (
    BinningConfig,
    OutOfRangeError,
    PoseTriple,
    angle_to_bin,
    argmax_decode,
    bin_center,
    expectation_decode,
)
from .encoding import EncodingConfig, encode_gaussian, encode_pose
from .losses import (
    LossConfig,
    NumericError,
    euclidean_loss,
    gld_loss,
    kl_loss,
    mse_loss,
    one_hot_ce_loss,
    softmax,
    total_loss,
)
from .net import NetworkConfig, TrainConfig, TrainState, adam_step, backward, forward, train
from .datasets import Dataset, SynthConfig, load_annotations, split, synth_generate
from .evaluation import EvalReport, compare_losses, evaluate
