"""Stack and bidirectional stack decoding of convolutional codes over the
syndrome trellis for insertion/deletion/substitution channels with several
received traces, plus a separate-BCJR baseline and a Monte Carlo harness.

Set ``SYNDEC_PURE_PYTHON=1`` before import to run the kernels as plain
Python instead of compiling them with numba.
"""
from ._accel import USE_NUMBA
from .bcjr import bcjr_posteriors, combine_posteriors, decode_separate_bcjr
from .channel import ChannelSpec, Trace, apply_offset, remove_offset, transmit, transmit_multi
from .code import (
    BinaryParityCheck,
    Codeword,
    PolynomialParityCheckMatrix,
    SyndromeTrellis,
    bit_priors,
    build_trellis,
    encode,
    expand_binary,
    load_code_config,
    parse_code_table,
)
from .lattice import DriftLattice, DriftWindow, branch_prob, build_drift_window, prefix_lattice, suffix_lattice
from .metric import JointModel, SearchNode, extend, full_posterior_score
from .stack import DecodeResult, StackParams, decode_bistack, decode_stack, visited_key

__version__ = "0.1.0"
