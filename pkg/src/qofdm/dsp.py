"""
Numeric substrate for the modem chain.

Sample streams are plain ``complex128`` numpy arrays; the sample rate travels
in the run configuration rather than alongside every buffer. Transforms use
the unitary (``norm="ortho"``) convention in both directions, so an OFDM
symbol of ``K`` unit-energy carriers carries energy ``K`` in the frequency
domain and the same energy in time.

Randomness
----------
All random draws go through :func:`make_rng` / :func:`derive_rng`, which
build a :class:`numpy.random.Generator` on the PCG64 bit generator. PCG64
output is fixed by its seed and independent of platform, so equal seeds give
bit-identical streams.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

DEFAULT_SAMPLE_RATE_HZ = 1.8e6

RRC_ROLL_OFF = 0.35
RRC_SPAN_SYMBOLS = 11
RRC_SAMPLES_PER_SYMBOL = 2


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator seeded with a non-negative 64-bit integer."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent child stream identified by ``(master_seed, *key)``.

    The child is ``PCG64(SeedSequence(master_seed, spawn_key=key))``; distinct
    keys give statistically independent streams, equal keys identical ones.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ConfigurationError(f"transform length {n} is not a power of two")


def dft(time: np.ndarray) -> np.ndarray:
    """Unitary DFT along the last axis (forward scale ``1/sqrt(K)``)."""
    time = np.asarray(time, dtype=complex)
    _check_pow2(time.shape[-1])
    return np.fft.fft(time, norm="ortho")


def idft(freq: np.ndarray) -> np.ndarray:
    """Unitary inverse DFT along the last axis.

    This is the textbook OFDM synthesis sum scaled by ``1/sqrt(K)``.
    """
    freq = np.asarray(freq, dtype=complex)
    _check_pow2(freq.shape[-1])
    return np.fft.ifft(freq, norm="ortho")


def avg_power(samples: np.ndarray) -> float:
    """Mean of ``|x|**2`` over the whole buffer."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise DomainError("average power of an empty stream")
    return float(np.mean(samples.real**2 + samples.imag**2))


def rrc_taps(
    roll_off: float = RRC_ROLL_OFF,
    span_symbols: int = RRC_SPAN_SYMBOLS,
    samples_per_symbol: int = RRC_SAMPLES_PER_SYMBOL,
) -> np.ndarray:
    """Unit-energy root-raised-cosine taps, ``span_symbols * sps + 1`` long.

    Parameters
    ----------
    roll_off : float
        Excess bandwidth, in ``(0, 1]``.
    span_symbols : int
        Filter length in symbol periods, at least 2.
    samples_per_symbol : int
        Oversampling factor, at least 1.
    """
    if not 0.0 < roll_off <= 1.0:
        raise ConfigurationError(f"RRC roll-off {roll_off} outside (0, 1]")
    if span_symbols < 2:
        raise ConfigurationError(f"RRC span {span_symbols} must be >= 2 symbols")
    if samples_per_symbol < 1:
        raise ConfigurationError(f"RRC samples_per_symbol {samples_per_symbol} must be >= 1")

    beta = roll_off
    n = span_symbols * samples_per_symbol
    t = (np.arange(n + 1) - n / 2) / samples_per_symbol
    taps = np.empty_like(t)
    for i, ti in enumerate(t):
        if math.isclose(ti, 0.0, abs_tol=1e-12):
            taps[i] = 1.0 - beta + 4 * beta / math.pi
        elif math.isclose(abs(ti), 1.0 / (4 * beta), abs_tol=1e-12):
            taps[i] = (beta / math.sqrt(2)) * (
                (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
                + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
            )
        else:
            num = math.sin(math.pi * ti * (1 - beta)) + 4 * beta * ti * math.cos(
                math.pi * ti * (1 + beta)
            )
            den = math.pi * ti * (1 - (4 * beta * ti) ** 2)
            taps[i] = num / den
    return taps / np.linalg.norm(taps)


def rrc_filter(
    samples: np.ndarray,
    roll_off: float = RRC_ROLL_OFF,
    span_symbols: int = RRC_SPAN_SYMBOLS,
    samples_per_symbol: int = RRC_SAMPLES_PER_SYMBOL,
) -> np.ndarray:
    """FIR-filter ``samples`` with RRC taps, same length out as in.

    The output is the full convolution advanced by the filter's group delay
    ``(len(taps) - 1) // 2`` and cut to the input length, so an impulse at
    index ``m`` reproduces the taps centred on ``m``.
    """
    taps = rrc_taps(roll_off, span_symbols, samples_per_symbol)
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        return samples.copy()
    delay = (len(taps) - 1) // 2
    full = np.convolve(samples, taps)
    return full[delay : delay + len(samples)]


def write_iq(path: str | Path, samples: np.ndarray) -> None:
    """Write interleaved little-endian float32 I/Q."""
    samples = np.asarray(samples, dtype=complex)
    iq = np.empty(2 * samples.size, dtype="<f4")
    iq[0::2] = samples.real
    iq[1::2] = samples.imag
    Path(path).write_bytes(iq.tobytes())


def read_iq(path: str | Path) -> np.ndarray:
    """Read interleaved little-endian float32 I/Q into ``complex128``."""
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if raw.size % 2:
        raise DomainError(f"{path}: odd number of float32 values in I/Q file")
    return raw[0::2].astype(float) + 1j * raw[1::2].astype(float)
