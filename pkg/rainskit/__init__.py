"""
Max-Rains and max-relative-entropy-of-entanglement bounds on PPT-assisted quantum capacity
"""

import os, io, typing
from .rainskit import *
from .channels import Channel, BipartiteState, apply_channel, random_channel, random_state
from .rains import MeasureResult, dmax, ppt_prime_member, w_state, r_max_state, gamma_channel, r_max_channel, q_theta
from .emax import w_sep, e_max_state, sigma_channel, e_max_channel
from .amortization import verify_amortization, strong_converse_bound
from .sdp import SdpProblem, SdpSolution, solve, verify
from . import jsonio

__version__ = "0.1"
__all__ = [
    "read_state", "read_channel", "write",
    "Channel", "BipartiteState", "DimSpec", "MeasureResult", "SdpProblem", "SdpSolution",
    "apply_channel", "random_channel", "random_state",
    "dmax", "ppt_prime_member", "w_state", "r_max_state", "gamma_channel", "r_max_channel", "q_theta",
    "w_sep", "e_max_state", "sigma_channel", "e_max_channel",
    "verify_amortization", "strong_converse_bound", "solve", "verify",
]

#region: read

@typing.overload
def read_state(text_stream: typing.TextIO) -> tuple[BipartiteState, tuple[int, ...] | None]:
    """Read a state JSON stream."""

@typing.overload
def read_state(path: str | os.PathLike) -> tuple[BipartiteState, tuple[int, ...] | None]:
    """
    Read a state JSON file.

    Returns the state and its cut (B-side subsystem indices) when the file names one.

    Raises:
        InputDecodeError: Malformed JSON or schema.
        InvalidStateError: The matrix is not a density matrix.
    """

def read_state(path_or_stream: str | os.PathLike | typing.IO) -> tuple[BipartiteState, tuple[int, ...] | None]:
    return jsonio.read_state(path_or_stream)

def read_channel(path_or_stream: str | os.PathLike | typing.IO) -> Channel:
    """
    Read a channel JSON file or stream, Kraus or Choi form.

    Raises:
        InputDecodeError: Malformed JSON or schema.
        InvalidChannelError: Not completely positive or not trace preserving.
    """
    return jsonio.read_channel(path_or_stream)

#endregion

#region: write

def write(value: Channel | BipartiteState | typing.Any, path_or_stream: str | os.PathLike | typing.IO):
    """
    Write a channel, a state or any report as JSON to a path or text stream.
    """
    text = jsonio.dumps(value) + "\n"
    match path_or_stream:
        case io.TextIOBase():
            path_or_stream.write(text)
        case io.IOBase():
            path_or_stream.write(text.encode("utf-8"))
        case str() | os.PathLike():
            with open(path_or_stream, "w", encoding="utf-8") as fp:
                fp.write(text)
        case _:
            raise TypeError("Argument path_or_stream must be a path or stream")

#endregion
