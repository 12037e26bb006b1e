"""BICM-OFDM decoding with noisy pilot-based channel estimates.

Submodules
----------
fec       convolutional code, interleaver, Viterbi / max-log APP decoding
modem     16-QAM Gray mapping, decoding metrics and bit LLRs
channel   Rayleigh block fading, pilot ML estimation, posterior of H given H_hat
capacity  achievable and outage rates of the perfect, mismatched and modified decoders
harness   BER / outage sweeps, configuration and CSV output
"""

__version__ = "0.1.0"

from .capacity import (
    OutageResult,
    RateParams,
    a_k,
    eta_modified,
    exp_integral_e1,
    expected_outage_rate,
    expected_outage_rates,
    lambda_k,
    outage_rate,
    rate_mismatched,
    rate_modified,
    rate_perfect,
)
from .channel import (
    ChannelEstimate,
    FadeVector,
    LinkBudget,
    apply_channel,
    draw_rayleigh,
    estimate_channel,
    export_fade_vectors,
    import_fade_vectors,
    posterior_of_true_channel,
)
from .errors import ChannelFileError, ConfigError, DegenerateDrawError, PerfectCSILimit
from .fec import ConvCode, Interleaver, conv_encode, deinterleave, deinterleave_llrs, interleave, trellis_decode
from .modem import QAM16, MetricMode, PosteriorParams, QamConstellation, bit_metrics, qam_map, symbol_metric
