"""Polar-code adaptive steganography and its pixel-sensitive robust variant."""

from .codec import CoderConfig, FrozenSpec, llr_init, sc_encode_randomized, scl_decode
from .construction import (
    ChannelBank,
    IndexPartition,
    ReliabilityProfile,
    bhattacharyya_bsc,
    default_frozen_budget,
    degrading_merge_construct,
    monte_carlo_construct,
    polarize_bhattacharyya,
    select_adaptive_partition,
    select_robust_partition,
)
from .optimizer import (
    DistortionProfile,
    EmbeddingSolution,
    gibbs_probs,
    h2,
    h2_inv,
    solve_am2,
    solve_dls,
    solve_pls,
    solve_robust_pls_am1,
    theoretical_bound,
)
from .stego import (
    StegoContext,
    adaptive_embed,
    adaptive_extract,
    make_frozen_key,
    robust_embed,
    robust_extract,
)
from .transform import bit_reversal_permutation, polar_transform

__version__ = "0.1.0"
