"""
Tapped-delay-line multipath channel with calibrated AWGN.

Path delays are rounded to the nearest sample and losses turned into linear
amplitudes. Noise is added after the multipath so the requested SNR is the
one seen at the receiver input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import DEFAULT_SAMPLE_RATE_HZ, avg_power
from .errors import ConfigurationError, DomainError

REAL_POSITIVE = "real_positive"
SEEDED_RANDOM = "seeded_random"
PHASE_MODES = (REAL_POSITIVE, SEEDED_RANDOM)


@dataclass(frozen=True)
class PathSpec:
    delay_us: float
    attenuation_db: float

    def __post_init__(self):
        if self.delay_us < 0 or self.attenuation_db < 0:
            raise ConfigurationError(
                f"path delay and attenuation must be >= 0, got {self.delay_us} us / "
                f"{self.attenuation_db} dB"
            )


#: First four taps of the ITU-R BT.2035 "Brazil D" profile.
BRAZIL_D_PATHS = (
    PathSpec(0.15, 0.1),
    PathSpec(0.63, 3.8),
    PathSpec(2.22, 2.6),
    PathSpec(3.05, 1.3),
)


@dataclass(frozen=True)
class ChannelSpec:
    """Sparse impulse response plus noise level.

    ``snr_db=None`` means a noiseless channel.
    """

    indices: tuple[int, ...]
    gains: tuple[complex, ...]
    snr_db: float | None = None
    phase_mode: str = REAL_POSITIVE

    def __post_init__(self):
        if not self.indices or len(self.indices) != len(self.gains):
            raise ConfigurationError("channel needs matching, non-empty indices and gains")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])) or self.indices[0] < 0:
            raise ConfigurationError(f"tap indices {self.indices} not strictly increasing from >= 0")
        if any(abs(g) == 0 for g in self.gains):
            raise ConfigurationError("zero-gain tap in channel")

    @classmethod
    def identity(cls, snr_db: float | None = None) -> "ChannelSpec":
        return cls(indices=(0,), gains=(1 + 0j,), snr_db=snr_db)

    @property
    def n_paths(self) -> int:
        return len(self.indices)

    @property
    def max_index(self) -> int:
        return self.indices[-1]

    def with_snr(self, snr_db: float | None) -> "ChannelSpec":
        return ChannelSpec(self.indices, self.gains, snr_db, self.phase_mode)

    def impulse_response(self) -> np.ndarray:
        h = np.zeros(self.max_index + 1, dtype=complex)
        h[list(self.indices)] = self.gains
        return h

    def frequency_response(self, k: int, advance: int = 0) -> np.ndarray:
        """Per-bin gain seen by a K-point DFT window started ``advance`` samples early."""
        bins = np.arange(k)[:, None]
        delays = np.asarray(self.indices)[None, :] + advance
        return np.exp(-2j * np.pi * bins * delays / k) @ np.asarray(self.gains)


def taps_from_paths(
    paths=BRAZIL_D_PATHS,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    phase_mode: str = REAL_POSITIVE,
    rng: np.random.Generator | None = None,
    snr_db: float | None = None,
) -> ChannelSpec:
    """Discretise a path table at ``sample_rate_hz``.

    Tap index is ``round(delay_us * fs * 1e-6)``, amplitude
    ``10 ** (-attenuation_db / 20)``. Paths landing on the same index add
    as complex numbers. In ``seeded_random`` mode every path gets a phase
    uniform on ``[0, 2*pi)`` drawn from ``rng``.
    """
    paths = tuple(paths)
    if not paths:
        raise ConfigurationError("channel needs at least one path")
    if phase_mode not in PHASE_MODES:
        raise ConfigurationError(f"unknown phase_mode {phase_mode!r}; use one of {PHASE_MODES}")
    if phase_mode == SEEDED_RANDOM and rng is None:
        raise ConfigurationError("seeded_random phase mode needs an rng")

    taps: dict[int, complex] = {}
    for path in paths:
        index = int(round(path.delay_us * sample_rate_hz * 1e-6))
        gain = 10.0 ** (-path.attenuation_db / 20.0)
        if phase_mode == SEEDED_RANDOM:
            gain = gain * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
        taps[index] = taps.get(index, 0j) + complex(gain)
    # exact cancellation of colliding paths leaves no tap
    taps = {i: g for i, g in taps.items() if abs(g) > 0}
    indices = tuple(sorted(taps))
    return ChannelSpec(
        indices=indices,
        gains=tuple(taps[i] for i in indices),
        snr_db=snr_db,
        phase_mode=phase_mode,
    )


@dataclass
class Reception:
    """Channel output together with the powers needed to quote SNR."""

    samples: np.ndarray
    signal_power: float
    noise_power: float = 0.0
    noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def measured_snr_db(self) -> float:
        if self.noise_power == 0:
            return float("inf")
        return float(10 * np.log10(self.signal_power / self.noise_power))


def convolve(samples: np.ndarray, channel: ChannelSpec) -> np.ndarray:
    """Full linear convolution with the sparse taps (length ``n + max_index``)."""
    samples = np.asarray(samples, dtype=complex)
    out = np.zeros(len(samples) + channel.max_index, dtype=complex)
    for index, gain in zip(channel.indices, channel.gains):
        out[index : index + len(samples)] += gain * samples
    return out


def propagate(
    samples: np.ndarray,
    channel: ChannelSpec,
    rng: np.random.Generator | None = None,
    keep_noise: bool = False,
) -> Reception:
    """Multipath then AWGN, returning the realised signal and noise powers.

    Noise is circularly-symmetric complex Gaussian with variance
    ``avg_power(x * h) / 10**(snr_db / 10)``.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        raise DomainError("cannot propagate an empty stream")
    clean = convolve(samples, channel)
    signal_power = avg_power(clean)
    if channel.snr_db is None:
        return Reception(clean, signal_power)
    if rng is None:
        raise ConfigurationError("a noisy channel needs an rng")

    variance = signal_power / 10.0 ** (channel.snr_db / 10.0)
    noise = np.sqrt(variance / 2) * (
        rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)
    )
    return Reception(
        samples=clean + noise,
        signal_power=signal_power,
        noise_power=avg_power(noise),
        noise=noise if keep_noise else None,
    )


def apply(
    samples: np.ndarray, channel: ChannelSpec, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Received samples ``y = x * h + w``; see :func:`propagate`."""
    return propagate(samples, channel, rng).samples
