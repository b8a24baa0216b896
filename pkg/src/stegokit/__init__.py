"""Provably secure steganography over history-dependent channels.

A one-time stegosystem hides a message in channel output by rejection
sampling blocks until a seeded Toeplitz extractor maps one to the
pad-masked message block; a PRG-keyed variant carries many messages.
Exact rational enumeration and Monte Carlo harnesses check the security
and soundness bounds on small instances.
"""
from .channel import ChannelModel, load_channel, load_channel_file, markov, memoryless
from .errors import (
    ChannelError,
    DimensionError,
    DistributionError,
    EnumerationTooLarge,
    FormatError,
    ParameterError,
    PreconditionError,
    RangeError,
    StegoError,
)
from .extractor import ExtractorParams, ExtractorSeed, extract
from .otstego import ParamSet, StegoKey, Stegotext, derive_params, keygen, sd_decode, se_encode
from .probability import Distribution, min_entropy, statistical_distance
from .stream import PrgState, StreamSession, prg_expand, prg_resume, stream_decode, stream_encode

__version__ = "0.1.0"

__all__ = [
    "ChannelError", "ChannelModel", "DimensionError", "Distribution", "DistributionError",
    "EnumerationTooLarge", "ExtractorParams", "ExtractorSeed", "FormatError", "ParamSet",
    "ParameterError", "PreconditionError", "PrgState", "RangeError", "StegoError", "StegoKey",
    "Stegotext", "StreamSession", "derive_params", "extract", "keygen", "load_channel",
    "load_channel_file", "markov", "memoryless", "min_entropy", "prg_expand", "prg_resume",
    "sd_decode", "se_encode", "statistical_distance", "stream_decode", "stream_encode",
]
