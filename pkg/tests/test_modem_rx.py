import numpy as np
import pytest

from qofdm.channel import ChannelSpec, apply
from qofdm.dsp import dft
from qofdm.errors import ConfigurationError, EqualizerSingularityError, SyncError
from qofdm.modem_rx import (
    EqualizerState,
    correlation_metric,
    demodulate,
    demodulate_burst,
    qpsk_demap,
    qpsk_snap,
    sdfe_equalize,
    synchronize,
)
from qofdm.modem_tx import CarrierMap, build_preamble, bytes_to_bits, load_symbols, modulate

CMAP = CarrierMap.from_offsets()
PREAMBLE = build_preamble(CMAP)


def crandn(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


class TestDemap:
    def test_near_point(self):
        assert qpsk_demap((0.9 + 1.1j) / np.sqrt(2)).tolist() == [0, 0]

    def test_origin_ties_to_zero_bits(self):
        assert qpsk_demap(0j).tolist() == [0, 0]
        assert qpsk_snap(np.array([0j]))[0] == pytest.approx((1 + 1j) / np.sqrt(2))

    def test_batch_shape(self):
        assert qpsk_demap(np.ones((3, 5), complex)).shape == (3, 10)


class TestSync:
    def frame(self, rng):
        return modulate(rng.bytes(50), CMAP).samples

    def test_finds_offset(self, rng):
        rx = np.concatenate([np.zeros(37, complex), self.frame(rng)])
        sync = synchronize(rx, PREAMBLE, 16)
        assert sync.frame_start == 37
        assert sync.correlation_peak >= 0.999
        occ = list(CMAP.occupied_indices)
        assert np.allclose(sync.initial_channel[occ], 1.0, atol=1e-9)

    def test_backoff_rotates_initial_channel(self, rng):
        rx = np.concatenate([np.zeros(37, complex), self.frame(rng)])
        sync = synchronize(rx, PREAMBLE, 16, backoff=8)
        expected = ChannelSpec.identity().frequency_response(64, advance=8)
        occ = list(CMAP.occupied_indices)
        assert np.allclose(sync.initial_channel[occ], expected[occ], atol=1e-9)

    def test_noise_only_fails(self, rng):
        with pytest.raises(SyncError) as info:
            synchronize(crandn(rng, 2000), PREAMBLE, 16)
        assert info.value.peak < 0.5

    def test_too_short(self):
        with pytest.raises(ConfigurationError):
            synchronize(np.ones(100, complex), PREAMBLE, 16)

    def test_metric_bounds(self, rng):
        m = correlation_metric(crandn(rng, 500), crandn(rng, 40))
        assert m.shape == (461,)
        assert np.all((0 <= m) & (m <= 1))


class TestSdfe:
    def test_identity_fixed_point(self, rng):
        grid = load_symbols(rng.integers(0, 2, 96 * 4), CMAP)
        state = EqualizerState(np.ones(64, complex))
        out = sdfe_equalize(grid, state, CMAP)
        occ = list(CMAP.occupied_indices)
        assert np.allclose(out[:, occ], grid[:, occ])
        assert np.allclose(state.H[occ], 1.0)

    def test_single_pilot_update(self):
        sbar = np.zeros((1, 64), complex)
        pilot = CMAP.pilot_indices[0]
        sbar[0, pilot] = 2 * CMAP.pilot_symbols[0]
        sbar[0, list(CMAP.data_indices)] = (1 + 1j) / np.sqrt(2)
        state = EqualizerState(np.ones(64, complex), alpha=0.1)
        out = sdfe_equalize(sbar, state, CMAP)
        assert state.H[pilot] == pytest.approx(1.9)
        # equalization used the estimate from before the update
        assert out[0, pilot] == pytest.approx(2.0)

    def test_flat_channel_contracts_by_alpha(self, rng):
        grid = load_symbols(rng.integers(0, 2, 96 * 6), CMAP)
        state = EqualizerState(np.ones(64, complex), alpha=0.1)
        occ = list(CMAP.occupied_indices)
        errors = [np.abs(state.H[occ] - 0.5)]
        for t in range(6):
            sdfe_equalize(0.5 * grid[t : t + 1], state, CMAP)
            errors.append(np.abs(state.H[occ] - 0.5))
        ratios = np.array(errors[1:]) / np.array(errors[:-1])
        assert np.allclose(ratios, 0.1)

    def test_nulls_untouched(self, rng):
        grid = load_symbols(rng.integers(0, 2, 96), CMAP)
        H = np.full(64, 0.7 + 0.1j)
        state = EqualizerState(H.copy())
        out = sdfe_equalize(grid, state, CMAP)
        nulls = list(CMAP.null_indices)
        assert np.all(out[:, nulls] == 0)
        assert np.all(state.H[nulls] == H[nulls])

    def test_singular_estimate(self):
        with pytest.raises(EqualizerSingularityError):
            sdfe_equalize(np.ones((1, 64), complex), EqualizerState(np.zeros(64)), CMAP)

    def test_invalid_alpha(self):
        with pytest.raises(ConfigurationError):
            EqualizerState(np.ones(64), alpha=1.5)


class TestDemodulate:
    def run(self, config, rng, snr=None, converter=None, offset=23, known_start=False):
        payload = rng.bytes(50)
        frame = modulate(payload, config.carrier_map(), config.ofdm.cp_len)
        tx = np.concatenate([np.zeros(offset, complex), frame.samples, np.zeros(40, complex)])
        rx = apply(tx, config.channel_spec(snr), rng)
        if converter is not None:
            rx, _ = converter(rx)
        start = offset if known_start else None
        bits, diag = demodulate(rx, config, frame.symbol_count, frame_start=start)
        truth = bytes_to_bits(payload)
        return np.mean(bits[: len(truth)] != truth), diag

    def test_identity_eight_bit_clean(self, flat_cfg, rng):
        ber, diag = self.run(flat_cfg, rng, converter=flat_cfg.quantizer.converter(8))
        assert ber == 0
        assert diag.sync.frame_start == 23

    def test_multipath_unquantized_clean(self, cfg, rng):
        ber, diag = self.run(cfg, rng)
        assert ber == 0
        assert diag.evm_rms < 1e-9

    def test_one_bit_is_poor(self, cfg, rng):
        one_bit = cfg.quantizer.converter(1)
        bers = [self.run(cfg, rng, 25.0, one_bit, known_start=True)[0] for _ in range(5)]
        assert np.mean(bers) > 0.1

    def test_perfect_sync_start(self, flat_cfg, rng):
        payload = rng.bytes(20)
        frame = modulate(payload, CMAP)
        rx = np.concatenate([np.zeros(10, complex), frame.samples])
        bits, diag = demodulate(rx, flat_cfg, frame_start=10)
        assert diag.n_symbols == frame.symbol_count
        assert np.array_equal(bits[: frame.payload_bits], bytes_to_bits(payload))

    def test_ideal_equalizer(self, cfg, rng):
        genie = cfg.replace(receiver__equalizer="ideal")
        payload = rng.bytes(50)
        frame = modulate(payload, CMAP)
        ch = cfg.channel_spec(None)
        rx = apply(frame.samples, ch)
        bits, _ = demodulate(rx, genie, frame.symbol_count, channel=ch)
        assert np.array_equal(bits[:400], bytes_to_bits(payload))
        with pytest.raises(ConfigurationError):
            demodulate(rx, genie, frame.symbol_count)


class TestBurst:
    def burst(self, cfg, rng, n_frames=6):
        payload = rng.bytes(50)
        frame = modulate(payload, CMAP)
        return payload, frame, np.tile(frame.samples, n_frames)

    @pytest.mark.parametrize("sync", ["correlation", "perfect"])
    def test_noiseless_multipath(self, cfg, rng, sync):
        config = cfg.replace(receiver__sync=sync)
        payload, frame, tx = self.burst(cfg, rng)
        rx = apply(tx, cfg.channel_spec(None))
        res = demodulate_burst(rx, config, 6, frame.symbol_count, len(frame))
        assert res.ok.all() and res.sync_failures == 0
        assert np.array_equal(res.starts, np.arange(6) * len(frame))
        truth = bytes_to_bits(payload)
        assert np.all(res.bits[:, :400] == truth)

    def test_lost_frame_is_flagged(self, cfg, rng):
        payload, frame, tx = self.burst(cfg, rng)
        tx[len(frame) : 2 * len(frame)] = crandn(rng, len(frame))
        res = demodulate_burst(tx, cfg, 6, frame.symbol_count, len(frame))
        assert res.sync_failures == 1 and not res.ok[1]
        assert np.all(res.bits[1] == 0)
        assert np.isnan(res.evm[1]).all()

    def test_all_lost(self, cfg, rng):
        res = demodulate_burst(crandn(rng, 480 * 3), cfg, 3, 5, 480)
        assert res.sync_failures == 3
