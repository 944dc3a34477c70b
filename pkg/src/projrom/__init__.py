"""Projection-constrained autoencoders for nonlinear model reduction.

Subpackages cover: dense linear-algebra kernels (:mod:`projrom.matkit`),
the invertible activation pair (:mod:`projrom.act`), biorthogonal weight
machinery (:mod:`projrom.biortho`), the constrained and baseline networks
(:mod:`projrom.net`), hand-written reverse-mode gradients
(:mod:`projrom.grad`), dynamical systems and linear baselines
(:mod:`projrom.dyn`), training objectives (:mod:`projrom.loss`), the
training loop (:mod:`projrom.train`), reduced-order-model assembly and
metrics (:mod:`projrom.rom`), and the experiment command line
(:mod:`projrom.cli`).
"""

from .act import ActivationParams, sigma_plus, sigma_minus, d_sigma
from .biortho import (
    BiorthogonalPair,
    PairRep,
    project_pair,
    pair_regularizer,
    tangent_project,
    frob_orthogonality_penalty,
    grassmann_row_sparsity,
    init_pair,
)
from .net import (
    AutoencoderParams,
    BaselineNetParams,
    encode,
    decode,
    project_point,
    jvp_encode,
    jvp_decode,
    jvp_project,
    save_checkpoint,
    load_checkpoint,
)

__all__ = [
    "ActivationParams",
    "sigma_plus",
    "sigma_minus",
    "d_sigma",
    "BiorthogonalPair",
    "PairRep",
    "project_pair",
    "pair_regularizer",
    "tangent_project",
    "frob_orthogonality_penalty",
    "grassmann_row_sparsity",
    "init_pair",
    "AutoencoderParams",
    "BaselineNetParams",
    "encode",
    "decode",
    "project_point",
    "jvp_encode",
    "jvp_decode",
    "jvp_project",
    "save_checkpoint",
    "load_checkpoint",
]

__version__ = "0.1.0"
