"""
OFDM transmitter: bits to framed baseband samples.

QPSK Gray table (bit pair ``b0 b1`` to symbol, unit energy)::

    00 -> (+1 + 1j) / sqrt(2)
    01 -> (+1 - 1j) / sqrt(2)
    11 -> (-1 - 1j) / sqrt(2)
    10 -> (-1 + 1j) / sqrt(2)

i.e. ``b0`` selects the sign of the real part and ``b1`` the sign of the
imaginary part, so adjacent quadrants differ in exactly one bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import idft, make_rng
from .errors import ConfigurationError, FramingError

SQRT_HALF = np.sqrt(0.5)

#: Published seed of the BPSK preamble sequence; the receiver regenerates it.
PREAMBLE_SEED = 0x51F0F

DEFAULT_K = 64
DEFAULT_CP_LEN = 16
DEFAULT_OCCUPIED_HALF_WIDTH = 26
DEFAULT_PILOT_OFFSETS = (-21, -7, 7, 21)
DEFAULT_PILOT_SYMBOLS = (1.0, 1.0, 1.0, -1.0)


@dataclass(frozen=True)
class CarrierMap:
    """Role of every subcarrier: data, pilot or null.

    Indices are FFT bins in ``0..k-1``; negative frequency offsets wrap
    modulo ``k``. ``data_indices`` order is the order bits are loaded.
    """

    k: int
    data_indices: tuple[int, ...]
    pilot_indices: tuple[int, ...]
    pilot_symbols: tuple[complex, ...]
    null_indices: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        data, pilots = set(self.data_indices), set(self.pilot_indices)
        if len(data) != len(self.data_indices) or len(pilots) != len(self.pilot_indices):
            raise ConfigurationError("duplicate carrier index in carrier map")
        if not self.data_indices:
            raise ConfigurationError("carrier map has no data carriers")
        if data & pilots:
            raise ConfigurationError(f"carriers {sorted(data & pilots)} are both data and pilot")
        if any(not 0 <= i < self.k for i in data | pilots):
            raise ConfigurationError(f"carrier index outside 0..{self.k - 1}")
        if len(self.pilot_symbols) != len(self.pilot_indices):
            raise ConfigurationError("pilot_symbols and pilot_indices differ in length")
        if any(abs(p) == 0 for p in self.pilot_symbols):
            raise ConfigurationError("pilot symbols must be nonzero")
        nulls = tuple(i for i in range(self.k) if i not in data and i not in pilots)
        object.__setattr__(self, "null_indices", nulls)

    @classmethod
    def from_offsets(
        cls,
        k: int = DEFAULT_K,
        occupied_half_width: int = DEFAULT_OCCUPIED_HALF_WIDTH,
        pilot_offsets=DEFAULT_PILOT_OFFSETS,
        pilot_symbols=DEFAULT_PILOT_SYMBOLS,
    ) -> "CarrierMap":
        """Occupy offsets ``-w..w`` except DC; pilots at the given offsets.

        The defaults give the usual 64-bin layout: 48 data carriers, pilots at
        -21, -7, 7, 21 carrying 1, 1, 1, -1, and 12 nulls (DC plus guards).
        """
        if not 0 < occupied_half_width < k // 2:
            raise ConfigurationError(
                f"occupied half width {occupied_half_width} must be in 1..{k // 2 - 1}"
            )
        pilot_offsets = tuple(int(p) for p in pilot_offsets)
        for p in pilot_offsets:
            if p == 0 or abs(p) > occupied_half_width:
                raise ConfigurationError(f"pilot offset {p} not on an occupied carrier")
        data = tuple(
            o % k
            for o in range(-occupied_half_width, occupied_half_width + 1)
            if o != 0 and o not in pilot_offsets
        )
        return cls(
            k=k,
            data_indices=data,
            pilot_indices=tuple(p % k for p in pilot_offsets),
            pilot_symbols=tuple(complex(s) for s in pilot_symbols),
        )

    @property
    def occupied_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.data_indices + self.pilot_indices))

    @property
    def bits_per_symbol(self) -> int:
        return 2 * len(self.data_indices)


@dataclass(frozen=True)
class Frame:
    """One transmitted frame: preamble block followed by data blocks.

    Every block is ``k + cp_len`` samples with the cyclic prefix in front.
    ``payload_bits`` is the number of meaningful bits before zero padding.
    """

    preamble: np.ndarray
    body: np.ndarray
    symbol_count: int
    payload_bits: int
    cp_len: int

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate([self.preamble, self.body])

    def __len__(self) -> int:
        return len(self.preamble) + len(self.body)


def bytes_to_bits(data: bytes) -> np.ndarray:
    """MSB-first bit array of an octet string."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)).astype(np.uint8)


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def read_payload(path: str | Path) -> bytes:
    """Raw octets of a payload file."""
    return Path(path).read_bytes()


def qpsk_map(bits) -> np.ndarray:
    """Gray-mapped unit-energy QPSK symbols, two bits per symbol."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 2:
        raise FramingError(f"QPSK mapping needs an even bit count, got {bits.size}")
    pairs = bits.reshape(-1, 2)
    return SQRT_HALF * ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1]))


def build_preamble(carrier_map: CarrierMap, seed: int = PREAMBLE_SEED) -> np.ndarray:
    """Frequency-domain BPSK preamble: seeded ±1 on occupied carriers, 0 elsewhere."""
    rng = make_rng(seed)
    occupied = list(carrier_map.occupied_indices)
    symbol = np.zeros(carrier_map.k, dtype=complex)
    symbol[occupied] = rng.choice([-1.0, 1.0], size=len(occupied))
    return symbol


def add_cp(blocks: np.ndarray, cp_len: int) -> np.ndarray:
    """Prepend the last ``cp_len`` samples of each row to that row."""
    if cp_len == 0:
        return blocks
    return np.concatenate([blocks[..., -cp_len:], blocks], axis=-1)


def preamble_waveform(preamble: np.ndarray, cp_len: int) -> np.ndarray:
    """Time-domain preamble block including its cyclic prefix."""
    return add_cp(idft(preamble), cp_len)


def load_symbols(bits: np.ndarray, carrier_map: CarrierMap) -> np.ndarray:
    """Zero-pad ``bits`` to whole symbols and build the frequency-domain grid.

    Returns an array of shape ``(n_symbols, k)`` with QPSK on data carriers,
    pilot symbols on pilot carriers and zeros on nulls.
    """
    per_symbol = carrier_map.bits_per_symbol
    n_symbols = -(-len(bits) // per_symbol)
    padded = np.zeros(n_symbols * per_symbol, dtype=np.uint8)
    padded[: len(bits)] = bits
    grid = np.zeros((n_symbols, carrier_map.k), dtype=complex)
    grid[:, list(carrier_map.data_indices)] = qpsk_map(padded).reshape(n_symbols, -1)
    grid[:, list(carrier_map.pilot_indices)] = np.asarray(carrier_map.pilot_symbols)
    return grid


def modulate(
    payload: bytes,
    carrier_map: CarrierMap,
    cp_len: int = DEFAULT_CP_LEN,
    repetitions: int = 1,
    preamble: np.ndarray | None = None,
) -> Frame:
    """Frame ``repetitions`` back-to-back copies of ``payload``.

    The bit stream is zero-padded to a whole number of OFDM symbols; each
    symbol goes through a unitary IDFT and gets a cyclic prefix. The preamble
    (``build_preamble`` by default) is sent once at the front.
    """
    if len(payload) == 0:
        raise FramingError("empty payload")
    if not 0 <= cp_len < carrier_map.k:
        raise ConfigurationError(f"cp_len {cp_len} must be in 0..{carrier_map.k - 1}")
    if repetitions < 1:
        raise ConfigurationError(f"repetitions must be >= 1, got {repetitions}")
    if preamble is None:
        preamble = build_preamble(carrier_map)

    bits = np.tile(bytes_to_bits(payload), repetitions)
    grid = load_symbols(bits, carrier_map)
    body = add_cp(idft(grid), cp_len).ravel()
    return Frame(
        preamble=preamble_waveform(preamble, cp_len),
        body=body,
        symbol_count=grid.shape[0],
        payload_bits=len(bits),
        cp_len=cp_len,
    )
