"""
OFDM receiver: preamble sync, CP removal, DFT, SDFE equalization, demapping.

Equalizer
---------
The simple decision-feedback equalizer keeps one complex channel estimate
``H[k]`` per carrier, seeded from the preamble. For every received symbol
``sbar`` (post-DFT) and carrier ``k``::

    shat[k] = sbar[k] / H[k]                              # pre-update H
    pilot:  H[k] = alpha*H[k] + (1 - alpha) * sbar[k] / p[k]
    data:   d    = nearest QPSK point to shat[k]
            H[k] = alpha*H[k] + (1 - alpha) * sbar[k] / d

Null carriers are left alone. ``shat`` (before the snap) goes to the demapper;
for QPSK the demapper decision and the snap ``d`` always agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .config import RunConfig
from .dsp import dft
from .errors import ConfigurationError, EqualizerSingularityError, SyncError
from .modem_tx import SQRT_HALF, CarrierMap, build_preamble, preamble_waveform

SINGULAR_GAIN = 1e-12


@dataclass
class SyncResult:
    frame_start: int
    correlation_peak: float
    initial_channel: np.ndarray


@dataclass
class EqualizerState:
    """Running per-carrier channel estimate; ``H`` may carry leading batch axes."""

    H: np.ndarray
    alpha: float = 0.1

    def __post_init__(self):
        self.H = np.array(self.H, dtype=complex)
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha {self.alpha} outside [0, 1]")


@dataclass
class RxDiagnostics:
    sync: SyncResult | None
    evm: np.ndarray = field(repr=False)
    n_symbols: int = 0

    @property
    def evm_rms(self) -> float:
        return float(np.sqrt(np.mean(self.evm**2))) if self.evm.size else float("nan")


def qpsk_demap(symbols) -> np.ndarray:
    """Quadrant decision inverse to the Gray table in :mod:`qofdm.modem_tx`.

    A component exactly on zero decides for the non-negative side (bit 0).
    """
    symbols = np.atleast_1d(np.asarray(symbols, dtype=complex))
    bits = np.stack([symbols.real < 0, symbols.imag < 0], axis=-1)
    return bits.reshape(*symbols.shape[:-1], -1).astype(np.uint8)


def qpsk_snap(symbols: np.ndarray) -> np.ndarray:
    """Nearest QPSK constellation point, same tie rule as :func:`qpsk_demap`."""
    re = np.where(symbols.real < 0, -SQRT_HALF, SQRT_HALF)
    im = np.where(symbols.imag < 0, -SQRT_HALF, SQRT_HALF)
    return re + 1j * im


def correlation_metric(rx: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation magnitude for every full-overlap offset.

    ``m[d] = |sum rx[d+n] conj(ref[n])| / (||rx[d:d+L]|| * ||ref||)``, in [0, 1].
    Windows with no energy score 0.
    """
    rx = np.asarray(rx, dtype=complex)
    n = len(reference)
    corr = np.abs(signal.correlate(rx, reference, mode="valid"))
    energy = np.concatenate([[0.0], np.cumsum(np.abs(rx) ** 2)])
    window = np.sqrt(np.maximum(energy[n:] - energy[:-n], 0.0))
    denom = window * np.linalg.norm(reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        metric = np.where(denom > 0, corr / denom, 0.0)
    return np.minimum(metric, 1.0)


def _preamble_channel(window, preamble, transformed=False) -> np.ndarray:
    spectrum = window if transformed else dft(window)
    occupied = preamble != 0
    h = np.zeros(spectrum.shape, dtype=complex)
    h[..., occupied] = spectrum[..., occupied] / preamble[occupied]
    return h


def synchronize(
    rx: np.ndarray,
    preamble: np.ndarray,
    cp_len: int,
    threshold: float = 0.5,
    backoff: int = 0,
) -> SyncResult:
    """Locate the frame by correlating against the known preamble waveform.

    ``frame_start`` is the offset of the correlation peak. The initial channel
    estimate comes from the preamble's DFT window, which starts ``backoff``
    samples before the end of the cyclic prefix.
    """
    rx = np.asarray(rx, dtype=complex)
    k = len(preamble)
    block = k + cp_len
    if len(rx) < 2 * block:
        raise ConfigurationError(f"need at least {2 * block} samples to sync, got {len(rx)}")
    if not 0 <= backoff <= cp_len:
        raise ConfigurationError(f"backoff {backoff} outside 0..{cp_len}")

    metric = correlation_metric(rx, preamble_waveform(preamble, cp_len))
    start = int(np.argmax(metric))
    peak = float(metric[start])
    if peak < threshold:
        raise SyncError(peak, threshold)
    first = start + cp_len - backoff
    return SyncResult(start, peak, _preamble_channel(rx[first : first + k], preamble))


def sdfe_equalize(
    symbols: np.ndarray, state: EqualizerState, carrier_map: CarrierMap
) -> np.ndarray:
    """Equalize post-DFT symbols of shape ``(..., T, K)``, updating ``state.H`` in place.

    Returns the pre-snap equalized values, zero on null carriers.
    """
    symbols = np.asarray(symbols, dtype=complex)
    H = state.H
    alpha = state.alpha
    data = np.asarray(carrier_map.data_indices)
    pilots = np.asarray(carrier_map.pilot_indices)
    pilot_symbols = np.asarray(carrier_map.pilot_symbols)
    occupied = np.asarray(carrier_map.occupied_indices)

    out = np.zeros(symbols.shape, dtype=complex)
    for t in range(symbols.shape[-2]):
        if (np.abs(H[..., occupied]) < SINGULAR_GAIN).any():
            raise EqualizerSingularityError(f"channel estimate vanished before symbol {t}")
        sbar = symbols[..., t, :]
        shat = sbar[..., occupied] / H[..., occupied]
        out[..., t, occupied] = shat
        if len(pilots):
            H[..., pilots] = alpha * H[..., pilots] + (1 - alpha) * sbar[..., pilots] / pilot_symbols
        decided = qpsk_snap(out[..., t, data])
        H[..., data] = alpha * H[..., data] + (1 - alpha) * sbar[..., data] / decided
    return out


def _symbol_windows(rx, starts, n_symbols, k, cp_len, backoff):
    """Gather DFT windows: ``(n_frames, n_symbols + 1, k)`` incl. the preamble."""
    block = k + cp_len
    offsets = (np.arange(n_symbols + 1) * block + cp_len - backoff)[:, None] + np.arange(k)
    return rx[np.asarray(starts)[:, None, None] + offsets[None]]


def _equalize(spectra, initial_channel, cmap, config, channel):
    r = config.receiver
    if r.equalizer == "sdfe":
        return sdfe_equalize(spectra, EqualizerState(initial_channel, r.alpha), cmap)
    if channel is None:
        raise ConfigurationError("ideal equalizer needs the true channel")
    H = channel.frequency_response(config.ofdm.k, r.sync_backoff)
    occ = list(cmap.occupied_indices)
    equalized = np.zeros_like(spectra)
    equalized[..., occ] = spectra[..., occ] / H[occ]
    return equalized


def _evm(equalized: np.ndarray, data: np.ndarray) -> np.ndarray:
    d = equalized[..., data]
    return np.sqrt(np.mean(np.abs(d - qpsk_snap(d)) ** 2, axis=-1))


@dataclass
class BurstResult:
    """Per-frame outcome of :func:`demodulate_burst`.

    ``bits`` holds one row per frame; rows of lost frames are left zero and
    must be ignored via ``ok``.
    """

    bits: np.ndarray
    ok: np.ndarray
    peaks: np.ndarray
    starts: np.ndarray
    evm: np.ndarray = field(repr=False)

    @property
    def sync_failures(self) -> int:
        return int(np.count_nonzero(~self.ok))


def demodulate_burst(
    rx: np.ndarray,
    config: RunConfig,
    n_frames: int,
    n_symbols: int,
    frame_len: int | None = None,
    channel=None,
) -> BurstResult:
    """Receive ``n_frames`` equal-length frames laid end to end from sample 0.

    Frame ``i`` is searched for within half a frame of its nominal start
    ``i * frame_len``; with ``receiver.sync = perfect`` the nominal starts are
    used directly. ``channel`` is the true :class:`ChannelSpec`, needed only by
    the ``ideal`` (genie) equalizer.
    """
    rx = np.asarray(rx, dtype=complex)
    cmap = config.carrier_map()
    o, r = config.ofdm, config.receiver
    k, cp = o.k, o.cp_len
    block = k + cp
    frame_len = frame_len or (n_symbols + 1) * block
    preamble = build_preamble(cmap, o.preamble_seed)
    backoff = r.sync_backoff
    nominal = np.arange(n_frames) * frame_len
    last_valid = len(rx) - (n_symbols + 1) * block + backoff

    if r.sync == "perfect":
        starts = nominal.copy()
        peaks = np.ones(n_frames)
    else:
        metric = correlation_metric(rx, preamble_waveform(preamble, cp))
        half = frame_len // 2
        starts = np.zeros(n_frames, dtype=int)
        peaks = np.zeros(n_frames)
        for i, nom in enumerate(nominal):
            lo, hi = max(nom - half, 0), min(nom + half, len(metric))
            if hi <= lo:
                continue
            j = lo + int(np.argmax(metric[lo:hi]))
            starts[i], peaks[i] = j, metric[j]
    # the DFT window may start up to `backoff` samples before the CP ends
    ok = (peaks >= r.sync_threshold) & (starts <= last_valid) & (starts + cp - backoff >= 0)
    bits = np.zeros((n_frames, n_symbols * cmap.bits_per_symbol), dtype=np.uint8)
    evm = np.full((n_frames, n_symbols), np.nan)
    if not ok.any():
        return BurstResult(bits, ok, peaks, starts, evm)

    spectra = dft(_symbol_windows(rx, starts[ok], n_symbols, k, cp, backoff))
    H0 = _preamble_channel(spectra[:, 0], preamble, transformed=True)
    singular = (np.abs(H0[:, list(cmap.occupied_indices)]) < SINGULAR_GAIN).any(axis=-1)
    if singular.any() and r.equalizer == "sdfe":
        ok[np.flatnonzero(ok)[singular]] = False
        spectra, H0 = spectra[~singular], H0[~singular]
    equalized = _equalize(spectra[:, 1:], H0, cmap, config, channel)

    data = list(cmap.data_indices)
    bits[ok] = qpsk_demap(equalized[..., data].reshape(equalized.shape[0], -1))
    evm[ok] = _evm(equalized, data)
    return BurstResult(bits, ok, peaks, starts, evm)


def demodulate(
    rx: np.ndarray,
    config: RunConfig,
    n_symbols: int | None = None,
    frame_start: int | None = None,
    channel=None,
) -> tuple[np.ndarray, RxDiagnostics]:
    """Single-frame receive chain; returns bit estimates and diagnostics.

    The frame is located by a full correlation search unless ``frame_start``
    is given (perfect sync). Without ``n_symbols`` every complete symbol after
    the preamble is demodulated; trailing partial symbols are dropped.
    Raises :class:`SyncError` when the correlation peak is too weak.
    """
    rx = np.asarray(rx, dtype=complex)
    cmap = config.carrier_map()
    o, r = config.ofdm, config.receiver
    k, cp = o.k, o.cp_len
    block = k + cp
    preamble = build_preamble(cmap, o.preamble_seed)

    if frame_start is None and r.sync == "correlation":
        sync = synchronize(rx, preamble, cp, r.sync_threshold, r.sync_backoff)
    else:
        start = frame_start or 0
        first = start + cp - r.sync_backoff
        sync = SyncResult(start, 1.0, _preamble_channel(rx[first : first + k], preamble))

    available = (len(rx) - sync.frame_start - cp + r.sync_backoff - k) // block
    if n_symbols is None:
        n_symbols = available
    n_symbols = max(0, min(n_symbols, available))
    if n_symbols == 0:
        return np.zeros(0, dtype=np.uint8), RxDiagnostics(sync, np.zeros(0), 0)

    windows = _symbol_windows(rx, [sync.frame_start], n_symbols, k, cp, r.sync_backoff)[0]
    spectra = dft(windows[1:])
    equalized = _equalize(spectra, sync.initial_channel.copy(), cmap, config, channel)

    data = list(cmap.data_indices)
    bits = qpsk_demap(equalized[:, data].ravel())
    return bits, RxDiagnostics(sync, _evm(equalized, data), n_symbols)
