"""
Uniform symmetric mid-riser quantizer emulating a low-resolution ADC.

A ``b``-bit quantizer with step ``delta`` has ``V = 2**b`` output levels

    v_i = -V*delta/2 + (i - 1/2)*delta,    i = 1..V

which are the odd multiples of ``delta/2`` inside ``[-(V-1)*delta/2, (V-1)*delta/2]``.
There is no zero level. The decision thresholds sit at integer multiples of
``delta``; an input exactly on a threshold goes to the level above it.
Inputs beyond the outermost thresholds saturate at ``v_1`` or ``v_V``.
Real and imaginary parts are quantized independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import RRC_ROLL_OFF, RRC_SAMPLES_PER_SYMBOL, RRC_SPAN_SYMBOLS, avg_power, rrc_filter
from .errors import ConfigurationError, DomainError

MAX_BITS = 16
DEFAULT_CLIP_SIGMA = 3.0


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int
    step: float

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise ConfigurationError(f"quantizer bits {self.bits} outside 1..{MAX_BITS}")
        if not (np.isfinite(self.step) and self.step > 0):
            raise ConfigurationError(f"quantizer step must be finite and > 0, got {self.step}")

    @property
    def n_levels(self) -> int:
        return 2**self.bits

    @property
    def max_level(self) -> float:
        return (self.n_levels - 1) * self.step / 2

    @property
    def full_scale(self) -> float:
        """Input magnitude at which the quantizer starts to saturate."""
        return self.n_levels * self.step / 2

    def levels(self) -> np.ndarray:
        i = np.arange(1, self.n_levels + 1)
        return -self.n_levels * self.step / 2 + (i - 0.5) * self.step

    def thresholds(self) -> np.ndarray:
        """The ``V - 1`` finite decision thresholds, midway between levels."""
        return self.levels()[:-1] + self.step / 2


def quantize_real(y, spec: QuantizerSpec):
    """Mid-riser staircase ``clip(delta*(floor(y/delta) + 1/2), v_1, v_V)``.

    Accepts a scalar or an array; NaN anywhere raises :class:`DomainError`.
    """
    arr = np.asarray(y, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("NaN input to quantizer")
    out = spec.step * (np.floor(arr / spec.step) + 0.5)
    out = np.clip(out, -spec.max_level, spec.max_level)
    return float(out) if out.ndim == 0 else out


def quantize_complex(samples: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    samples = np.asarray(samples, dtype=complex)
    return quantize_real(samples.real, spec) + 1j * quantize_real(samples.imag, spec)


def auto_step(
    samples: np.ndarray, bits: int, clip_sigma: float = DEFAULT_CLIP_SIGMA
) -> QuantizerSpec:
    """Step that makes the quantizer full scale span ``±clip_sigma`` per-dimension sigmas.

    ``sigma = sqrt(avg_power / 2)`` and ``delta = 2 * clip_sigma * sigma / 2**bits``.
    """
    if not clip_sigma > 0:
        raise ConfigurationError(f"clip_sigma must be > 0, got {clip_sigma}")
    power = avg_power(samples)
    if power == 0:
        raise DomainError("cannot auto-load a quantizer on a zero-power stream")
    sigma = np.sqrt(power / 2)
    return QuantizerSpec(bits=bits, step=2 * clip_sigma * sigma / 2**bits)


@dataclass(frozen=True)
class RrcParams:
    roll_off: float = RRC_ROLL_OFF
    span_symbols: int = RRC_SPAN_SYMBOLS
    samples_per_symbol: int = RRC_SAMPLES_PER_SYMBOL


def adc_block(
    samples: np.ndarray,
    spec: QuantizerSpec,
    with_rrc: bool = False,
    rrc: RrcParams | None = None,
) -> np.ndarray:
    """Optional RRC stage followed by the complex quantizer."""
    if with_rrc:
        rrc = rrc or RrcParams()
        samples = rrc_filter(samples, rrc.roll_off, rrc.span_symbols, rrc.samples_per_symbol)
    return quantize_complex(samples, spec)


@dataclass(frozen=True)
class LowResolutionConverter:
    """ADC stage as configured for a run.

    With ``loading="auto"`` the step is recomputed from each input buffer
    (after the RRC stage, when enabled); with ``loading="fixed"`` the given
    ``step`` is used as is.
    """

    bits: int
    loading: str = "auto"
    clip_sigma: float = DEFAULT_CLIP_SIGMA
    step: float | None = None
    with_rrc: bool = False
    rrc: RrcParams = RrcParams()

    def __post_init__(self):
        if self.loading not in ("auto", "fixed"):
            raise ConfigurationError(f"unknown quantizer loading {self.loading!r}")
        if self.loading == "fixed":
            QuantizerSpec(self.bits, self.step if self.step is not None else float("nan"))
        elif not self.clip_sigma > 0:
            raise ConfigurationError(f"clip_sigma must be > 0, got {self.clip_sigma}")

    def spec_for(self, samples: np.ndarray) -> QuantizerSpec:
        if self.loading == "fixed":
            return QuantizerSpec(self.bits, self.step)
        return auto_step(samples, self.bits, self.clip_sigma)

    def __call__(self, samples: np.ndarray) -> tuple[np.ndarray, QuantizerSpec]:
        if self.with_rrc:
            r = self.rrc
            samples = rrc_filter(samples, r.roll_off, r.span_symbols, r.samples_per_symbol)
        spec = self.spec_for(samples)
        return quantize_complex(samples, spec), spec
