"""
BER-vs-SNR measurement harness and ADC power model.

Measurement protocol per (bit depth, SNR) point:

* ``files_per_point`` random payloads of ``file_size_bytes`` octets;
* each payload is sent ``repetitions`` times as a burst of frames, every frame
  carrying ``frame_repetitions`` copies behind its own preamble;
* the burst goes through the multipath channel and AWGN in one pass, then
  through the ADC stage (skipped for ``"hardware"``) and the receiver;
* BER is computed per payload over the frames that synchronised, and the
  point's BER is the mean of those per-payload values.

Frames that fail sync are counted and left out of the bit comparison, as are
the zero bits padding the last OFDM symbol.

Seeding
-------
Point ``(depth, snr_index)`` draws from ``derive_rng(master_seed, code, snr_index)``
with ``code = depth`` for a quantized depth and ``0`` for ``"hardware"``.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .channel import propagate
from .config import HARDWARE, RunConfig, config_hash, dumps
from .dsp import derive_rng
from .errors import ConfigurationError, DegeneratePointError
from .modem_rx import demodulate_burst
from .modem_tx import bytes_to_bits, modulate

DEFAULT_FS = 1.8e6
#: Walden figure of merit, J per conversion step.
DEFAULT_C = 496e-15

BER_HEADER = ("bits", "requested_snr_db", "measured_snr_db", "ber", "bit_count", "sync_failures")
POWER_HEADER = ("nbits", "power_w")


@dataclass
class BerRecord:
    bits: int | str
    requested_snr_db: float | None
    measured_snr_db: float
    ber: float
    bit_count: int
    sync_failures: int
    errored_bits: int = 0
    file_bers: tuple = ()
    evm_rms: float = float("nan")
    degenerate: bool = False
    wall_time_s: float = field(default=0.0, compare=False)

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Student-t interval on the mean of the per-file BERs."""
        x = np.asarray(self.file_bers, dtype=float)
        if x.size < 2:
            return (self.ber, self.ber)
        half = stats.t.ppf(0.5 + level / 2, x.size - 1) * x.std(ddof=1) / np.sqrt(x.size)
        return (self.ber - half, self.ber + half)


@dataclass(frozen=True)
class PowerRecord:
    bits: int
    fs: float
    c: float
    p_adc: float


def point_code(bits: int | str) -> int:
    return 0 if bits == HARDWARE else int(bits)


def point_rng(master_seed: int, bits: int | str, snr_index: int) -> np.random.Generator:
    return derive_rng(master_seed, point_code(bits), snr_index)


def ebn0_db(snr_db: float, config: RunConfig) -> float:
    """Eb/N0 on a data carrier for a time-domain SNR at the receiver input.

    With unitary transforms, unit-energy carriers and white noise of
    variance ``N`` per sample, the time-domain signal power is
    ``n_occupied / K`` and each bin sees noise ``N``; QPSK carries 2 bits.
    """
    cmap = config.carrier_map()
    occupied = len(cmap.occupied_indices)
    return snr_db + 10 * np.log10(cmap.k / occupied) - 10 * np.log10(2)


def qpsk_awgn_ber(ebn0_db_value: float) -> float:
    """Gray QPSK bit error probability ``Q(sqrt(2 Eb/N0))``."""
    return float(stats.norm.sf(np.sqrt(2 * 10 ** (ebn0_db_value / 10))))


def measure_ber(
    config: RunConfig,
    bits: int | str,
    snr_db: float | None,
    rng: np.random.Generator,
) -> BerRecord:
    """One BER point; raises :class:`DegeneratePointError` if no frame synchronised."""
    t0 = time.perf_counter()
    sweep = config.sweep
    cmap = config.carrier_map()
    channel = config.channel_spec(snr_db)
    converter = None if bits == HARDWARE else config.quantizer.converter(int(bits))
    n_frames = sweep.repetitions // sweep.frame_repetitions

    file_bers, errored, compared, failures = [], 0, 0, 0
    signal_energy = noise_energy = 0.0
    evm_sq, evm_n = 0.0, 0
    for _ in range(sweep.files_per_point):
        payload = rng.bytes(sweep.file_size_bytes)
        frame = modulate(payload, cmap, config.ofdm.cp_len, sweep.frame_repetitions)
        truth = np.tile(bytes_to_bits(payload), sweep.frame_repetitions)
        burst = np.tile(frame.samples, n_frames)

        rx = propagate(burst, channel, rng)
        signal_energy += rx.signal_power * len(rx.samples)
        noise_energy += rx.noise_power * len(rx.samples)
        samples = rx.samples
        if converter is not None:
            samples, _ = converter(samples)

        result = demodulate_burst(
            samples, config, n_frames, frame.symbol_count, len(frame), channel=channel
        )
        failures += result.sync_failures
        good = result.bits[result.ok, : frame.payload_bits]
        if good.size == 0:
            continue
        errors = int(np.count_nonzero(good != truth))
        file_bers.append(errors / good.size)
        errored += errors
        compared += good.size
        evm = result.evm[result.ok]
        evm_sq += float(np.sum(evm**2))
        evm_n += evm.size

    measured = (
        float("inf") if noise_energy == 0 else float(10 * np.log10(signal_energy / noise_energy))
    )
    if not file_bers:
        raise DegeneratePointError(
            f"all {failures} frames failed sync at bits={bits}, snr={snr_db}",
            {"bits": bits, "snr_db": snr_db, "sync_failures": failures, "measured_snr_db": measured},
        )
    return BerRecord(
        bits=bits,
        requested_snr_db=snr_db,
        measured_snr_db=measured,
        ber=float(np.mean(file_bers)),
        bit_count=compared,
        sync_failures=failures,
        errored_bits=errored,
        file_bers=tuple(file_bers),
        evm_rms=float(np.sqrt(evm_sq / evm_n)) if evm_n else float("nan"),
        wall_time_s=time.perf_counter() - t0,
    )


def _run_point(args) -> BerRecord:
    config, bits, snr_index, snr_db = args
    rng = point_rng(config.sweep.master_seed, bits, snr_index)
    try:
        return measure_ber(config, bits, snr_db, rng)
    except DegeneratePointError as exc:
        d = exc.diagnostics
        return BerRecord(
            bits=bits,
            requested_snr_db=snr_db,
            measured_snr_db=d.get("measured_snr_db", float("nan")),
            ber=float("nan"),
            bit_count=0,
            sync_failures=d.get("sync_failures", 0),
            degenerate=True,
        )


def run_sweep(config: RunConfig, jobs: int = 1) -> list[BerRecord]:
    """Every (bit depth, SNR) point of ``config.sweep``, ordered by depth then SNR.

    Degenerate points come back as records with ``degenerate=True`` and
    ``ber = nan`` instead of aborting the sweep.
    """
    if jobs < 1:
        raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
    sweep = config.sweep
    tasks = [
        (config, bits, i, snr)
        for bits in sweep.bit_depths
        for i, snr in enumerate(sweep.snr_points_db)
    ]
    if jobs == 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, tasks))


def power_curve(bit_range, fs: float = DEFAULT_FS, c: float = DEFAULT_C) -> list[PowerRecord]:
    """ADC power ``c * fs * 2**bits`` for each resolution in ``bit_range``."""
    if fs <= 0 or c <= 0:
        raise ConfigurationError("fs and c must be > 0")
    out = []
    for b in bit_range:
        if b < 1:
            raise ConfigurationError(f"bit count {b} must be >= 1")
        out.append(PowerRecord(int(b), fs, c, c * fs * 2 ** int(b)))
    return out


# -- output ------------------------------------------------------------------


def _g6(x) -> str:
    if x is None:
        return "noiseless"
    return f"{x:.6g}"


def ber_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BER_HEADER)
    for r in records:
        w.writerow(
            [r.bits, _g6(r.requested_snr_db), _g6(r.measured_snr_db), _g6(r.ber), r.bit_count, r.sync_failures]
        )
    return buf.getvalue()


def power_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POWER_HEADER)
    for r in records:
        w.writerow([r.bits, _g6(r.p_adc)])
    return buf.getvalue()


def read_ber_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_ber_csv(records, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ber_csv(records))
    return path


def write_power_csv(records, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(power_csv(records))
    return path


def write_meta(csv_path: str | Path, config: RunConfig, records, extra: dict | None = None) -> Path:
    """JSON sidecar next to ``csv_path`` with everything needed to rerun."""
    meta = {
        "version": __version__,
        "master_seed": config.sweep.master_seed,
        "config_hash": config_hash(config),
        "config": dumps(config),
        "points": [
            {
                "bits": r.bits,
                "requested_snr_db": r.requested_snr_db,
                "wall_time_s": round(r.wall_time_s, 4),
                "degenerate": r.degenerate,
                "evm_rms": None if np.isnan(r.evm_rms) else r.evm_rms,
            }
            for r in records
        ],
    }
    meta.update(extra or {})
    path = Path(csv_path).with_suffix(".meta")
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def record_dict(r: BerRecord) -> dict:
    d = asdict(r)
    d["file_bers"] = list(r.file_bers)
    return d
