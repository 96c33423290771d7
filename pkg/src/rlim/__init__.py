"""Run-length-limited ISI-mitigation (RLIM) codes for diffusion-based molecular communication."""

from .codebook import (
    Codebook,
    build_block_codebook,
    count_d_limited,
    generate_rlim,
    generate_rll,
    min_length_for_block,
    select_min_weight_subset,
    shannon_capacity,
)
from .codec import decode, decode_stream, encode, encode_stream
from .corrector import correct_greedy, project_to_codebook, viterbi_correct
from .channel import ChannelParams

__version__ = "0.1.0"
