"""Desk-scale variational autoencoder with pluggable divergence regularizers.

MLP encoder/decoder, reparameterized sampling, a Lagrangian-style loss
(reconstruction + weight * divergence), model-evidence estimation, latent
traversals, and the dataset plumbing they need.
"""

from .data import (
    build_digits_desk,
    convert_idx,
    data_dir,
    load_split,
    make_ring,
    read_container,
    write_container,
)
from .evidence import estimate_log_evidence
from .losses import grad_check, loss, loss_and_grads, loss_values
from .model import DecoderOutput, VaeArch, VaeModel, reparam_sample
from .train import EvalMode, TrainConfig, TrainRecord, config_hash, train
from .traversal import latent_traversal, traversal_csv, traversal_png

__all__ = [
    "DecoderOutput",
    "EvalMode",
    "TrainConfig",
    "TrainRecord",
    "VaeArch",
    "VaeModel",
    "build_digits_desk",
    "config_hash",
    "convert_idx",
    "data_dir",
    "estimate_log_evidence",
    "grad_check",
    "latent_traversal",
    "load_split",
    "loss",
    "loss_and_grads",
    "loss_values",
    "make_ring",
    "read_container",
    "reparam_sample",
    "train",
    "traversal_csv",
    "traversal_png",
    "write_container",
]
