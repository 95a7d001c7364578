"""
Run configuration: one flat ``section.field = value`` text file.

Example::

    # Brazil-D sweep, 4-bit only
    ofdm.k = 64
    channel.phase_mode = real_positive
    sweep.bit_depths = [4]
    sweep.snr_points_db = [16, 20, 24]

Values are JSON literals; a bare word is taken as a string, also inside a
list (``[3, 4, hardware]``). ``#`` starts a comment. Unknown keys, bad values
and inconsistent combinations are all rejected before any computation, with
the offending key and line in the message.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .channel import PHASE_MODES, ChannelSpec, PathSpec, taps_from_paths
from .dsp import DEFAULT_SAMPLE_RATE_HZ, derive_rng, rrc_taps
from .errors import ConfigurationError
from .modem_tx import (
    DEFAULT_OCCUPIED_HALF_WIDTH,
    DEFAULT_PILOT_OFFSETS,
    DEFAULT_PILOT_SYMBOLS,
    PREAMBLE_SEED,
    CarrierMap,
)
from .quantizer import MAX_BITS, LowResolutionConverter, RrcParams

HARDWARE = "hardware"
OUTPUT_DIR_ENV = "QOFDM_OUTPUT_DIR"

# channel realisation stream, kept apart from the per-point noise streams
_CHANNEL_STREAM = 0xC4A7


def _as_int(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _as_float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _as_bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true or false, got {v!r}")


def _as_str(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v

    return parse


def _list_of(item):
    def parse(v):
        if not isinstance(v, (list, tuple)):
            v = [v]
        return tuple(item(x) for x in v)

    return parse


def _opt_float(v):
    return None if v is None else _as_float(v)


def _snr(v):
    if v in ("noiseless", None):
        return None
    return _as_float(v)


def _depth(v):
    if v == HARDWARE:
        return HARDWARE
    return _as_int(v)


def _opt(parse, default, doc=""):
    return field(default=default, metadata={"parse": parse, "doc": doc})


@dataclass(frozen=True)
class OfdmConfig:
    k: int = _opt(_as_int, 64)
    cp_len: int = _opt(_as_int, 16)
    occupied_half_width: int = _opt(_as_int, DEFAULT_OCCUPIED_HALF_WIDTH)
    pilot_offsets: tuple = _opt(_list_of(_as_int), DEFAULT_PILOT_OFFSETS)
    pilot_symbols: tuple = _opt(_list_of(_as_float), DEFAULT_PILOT_SYMBOLS)
    preamble_seed: int = _opt(_as_int, PREAMBLE_SEED)
    sample_rate_hz: float = _opt(_as_float, DEFAULT_SAMPLE_RATE_HZ)

    def carrier_map(self) -> CarrierMap:
        return CarrierMap.from_offsets(
            self.k, self.occupied_half_width, self.pilot_offsets, self.pilot_symbols
        )


@dataclass(frozen=True)
class ChannelConfig:
    delays_us: tuple = _opt(_list_of(_as_float), (0.15, 0.63, 2.22, 3.05))
    attenuations_db: tuple = _opt(_list_of(_as_float), (0.1, 3.8, 2.6, 1.3))
    phase_mode: str = _opt(_choice(*PHASE_MODES), "real_positive")
    seed: int = _opt(_as_int, 0)

    def paths(self) -> tuple[PathSpec, ...]:
        return tuple(PathSpec(d, a) for d, a in zip(self.delays_us, self.attenuations_db))

    def spec(self, sample_rate_hz: float, snr_db: float | None = None) -> ChannelSpec:
        rng = derive_rng(self.seed, _CHANNEL_STREAM)
        return taps_from_paths(self.paths(), sample_rate_hz, self.phase_mode, rng, snr_db)


@dataclass(frozen=True)
class QuantizerConfig:
    loading: str = _opt(_choice("auto", "fixed"), "auto")
    clip_sigma: float = _opt(_as_float, 3.0)
    step: float | None = _opt(_opt_float, None)
    with_rrc: bool = _opt(_as_bool, False)
    rrc_roll_off: float = _opt(_as_float, RrcParams.roll_off)
    rrc_span_symbols: int = _opt(_as_int, RrcParams.span_symbols)
    rrc_samples_per_symbol: int = _opt(_as_int, RrcParams.samples_per_symbol)

    def converter(self, bits: int) -> LowResolutionConverter:
        return LowResolutionConverter(
            bits=bits,
            loading=self.loading,
            clip_sigma=self.clip_sigma,
            step=self.step,
            with_rrc=self.with_rrc,
            rrc=RrcParams(self.rrc_roll_off, self.rrc_span_symbols, self.rrc_samples_per_symbol),
        )


@dataclass(frozen=True)
class ReceiverConfig:
    alpha: float = _opt(_as_float, 0.1)
    sync: str = _opt(_choice("correlation", "perfect"), "correlation")
    sync_threshold: float = _opt(_as_float, 0.5)
    # DFT window start, in samples ahead of the detected peak (inside the CP)
    sync_backoff: int = _opt(_as_int, 8)
    equalizer: str = _opt(_choice("sdfe", "ideal"), "sdfe")


@dataclass(frozen=True)
class SweepConfig:
    snr_points_db: tuple = _opt(_list_of(_snr), tuple(float(s) for s in range(10, 31)))
    bit_depths: tuple = _opt(_list_of(_depth), (3, 4, 5, HARDWARE))
    files_per_point: int = _opt(_as_int, 10)
    file_size_bytes: int = _opt(_as_int, 50)
    repetitions: int = _opt(_as_int, 300)
    frame_repetitions: int = _opt(_as_int, 1)
    master_seed: int = _opt(_as_int, 2023)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = _opt(_as_str, "")
    basename: str = _opt(_as_str, "qofdm")

    def resolved_directory(self) -> Path:
        return Path(self.directory or os.environ.get(OUTPUT_DIR_ENV, "results"))


SECTIONS = {
    "ofdm": OfdmConfig,
    "channel": ChannelConfig,
    "quantizer": QuantizerConfig,
    "receiver": ReceiverConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class RunConfig:
    ofdm: OfdmConfig = OfdmConfig()
    channel: ChannelConfig = ChannelConfig()
    quantizer: QuantizerConfig = QuantizerConfig()
    receiver: ReceiverConfig = ReceiverConfig()
    sweep: SweepConfig = SweepConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        validate(self)

    def replace(self, **flat) -> "RunConfig":
        """Copy with dotted-key overrides given as already-typed values."""
        return from_mapping({**to_mapping(self), **_undot(flat)})

    def carrier_map(self) -> CarrierMap:
        return self.ofdm.carrier_map()

    def channel_spec(self, snr_db: float | None = None) -> ChannelSpec:
        return self.channel.spec(self.ofdm.sample_rate_hz, snr_db)


def _undot(flat):
    return {k.replace("__", "."): v for k, v in flat.items()}


def keys() -> list[str]:
    return [f"{s}.{f.name}" for s, cls in SECTIONS.items() for f in dataclasses.fields(cls)]


def validate(cfg: RunConfig) -> None:
    o, c, q, r, s = cfg.ofdm, cfg.channel, cfg.quantizer, cfg.receiver, cfg.sweep
    k = o.k
    if k < 4 or k & (k - 1):
        raise ConfigurationError(f"{k} is not a power of two >= 4", key="ofdm.k")
    if not 0 <= o.cp_len < k:
        raise ConfigurationError(f"must be in 0..{k - 1}", key="ofdm.cp_len")
    if o.sample_rate_hz <= 0:
        raise ConfigurationError("must be > 0", key="ofdm.sample_rate_hz")
    try:
        o.carrier_map()
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key="ofdm.pilot_offsets") from None

    if not c.delays_us:
        raise ConfigurationError("at least one path is required", key="channel.delays_us")
    if len(c.delays_us) != len(c.attenuations_db):
        raise ConfigurationError(
            "needs one attenuation per delay", key="channel.attenuations_db"
        )
    try:
        c.paths()
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key="channel.delays_us") from None

    if q.loading == "fixed" and (q.step is None or q.step <= 0):
        raise ConfigurationError("fixed loading needs a step > 0", key="quantizer.step")
    if q.clip_sigma <= 0:
        raise ConfigurationError("must be > 0", key="quantizer.clip_sigma")
    try:
        q.converter(1)
        if q.with_rrc:
            rrc_taps(q.rrc_roll_off, q.rrc_span_symbols, q.rrc_samples_per_symbol)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key="quantizer.rrc_roll_off") from None

    if not 0 <= r.alpha <= 1:
        raise ConfigurationError("must be in [0, 1]", key="receiver.alpha")
    if not 0 < r.sync_threshold <= 1:
        raise ConfigurationError("must be in (0, 1]", key="receiver.sync_threshold")
    if not 0 <= r.sync_backoff <= o.cp_len:
        raise ConfigurationError(f"must be in 0..{o.cp_len}", key="receiver.sync_backoff")

    if not s.snr_points_db:
        raise ConfigurationError("at least one SNR point is required", key="sweep.snr_points_db")
    finite = [x for x in s.snr_points_db if x is not None]
    if finite != sorted(finite):
        raise ConfigurationError("must be sorted ascending", key="sweep.snr_points_db")
    if not s.bit_depths:
        raise ConfigurationError("at least one bit depth is required", key="sweep.bit_depths")
    for b in s.bit_depths:
        if b != HARDWARE and not 1 <= b <= MAX_BITS:
            raise ConfigurationError(f"bit depth {b} outside 1..{MAX_BITS}", key="sweep.bit_depths")
    for name in ("files_per_point", "file_size_bytes", "repetitions", "frame_repetitions"):
        if getattr(s, name) < 1:
            raise ConfigurationError("must be >= 1", key=f"sweep.{name}")
    if s.repetitions % s.frame_repetitions:
        raise ConfigurationError(
            f"repetitions {s.repetitions} not a multiple of {s.frame_repetitions}",
            key="sweep.frame_repetitions",
        )
    if not 0 <= s.master_seed < 2**64:
        raise ConfigurationError("must be a 64-bit unsigned integer", key="sweep.master_seed")


# -- text format -------------------------------------------------------------


def parse_value(text: str):
    text = text.strip()
    if not text:
        raise ValueError("missing value")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [parse_value(item) for item in inner.split(",")] if inner else []
    if any(ch in text for ch in "[]{},\"'="):
        raise ValueError(f"cannot parse {text!r}")
    return text


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def parse_text(text: str) -> dict[str, tuple[object, int]]:
    """``{key: (raw value, line number)}`` from config text."""
    entries: dict[str, tuple[object, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in entries:
            raise ConfigurationError(f"duplicate key (first on line {entries[key][1]})", key, lineno)
        try:
            entries[key] = (parse_value(value), lineno)
        except ValueError as exc:
            raise ConfigurationError(str(exc), key, lineno) from None
    return entries


def from_mapping(values: dict, lines: dict | None = None) -> RunConfig:
    """Build and validate a RunConfig from ``{dotted key: raw value}``."""
    lines = lines or {}
    known = set(keys())
    sections: dict[str, dict] = {name: {} for name in SECTIONS}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError("unknown configuration key", key, lines.get(key))
        section, name = key.split(".", 1)
        fld = next(f for f in dataclasses.fields(SECTIONS[section]) if f.name == name)
        try:
            sections[section][name] = fld.metadata["parse"](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(str(exc), key, lines.get(key)) from None
    try:
        parts = {}
        for name, cls in SECTIONS.items():
            parts[name] = cls(**sections[name])
        return RunConfig(**parts)
    except ConfigurationError as exc:
        if exc.key is not None and exc.line is None and exc.key in lines:
            raise ConfigurationError(
                str(exc).split(": ", 1)[-1], exc.key, lines[exc.key]
            ) from None
        raise


def loads(text: str, overrides: dict | None = None) -> RunConfig:
    entries = parse_text(text)
    values = {k: v for k, (v, _) in entries.items()}
    lines = {k: n for k, (_, n) in entries.items()}
    for key, raw in (overrides or {}).items():
        values[key] = parse_value(raw) if isinstance(raw, str) else raw
        lines.pop(key, None)
    return from_mapping(values, lines)


def load(path: str | Path, overrides: dict | None = None) -> RunConfig:
    return loads(Path(path).read_text(), overrides)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if v is None:
        return None
    return v


def to_mapping(cfg: RunConfig) -> dict:
    out = {}
    for section in SECTIONS:
        part = getattr(cfg, section)
        for f in dataclasses.fields(part):
            out[f"{section}.{f.name}"] = getattr(part, f.name)
    return out


def dumps(cfg: RunConfig) -> str:
    """Canonical text form; ``loads(dumps(cfg)) == cfg``."""
    lines = []
    for key, value in to_mapping(cfg).items():
        v = _jsonable(value)
        if key == "sweep.snr_points_db":
            v = ["noiseless" if x is None else x for x in v]
        lines.append(f"{key} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()
