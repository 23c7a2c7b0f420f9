import math

import numpy as np
import pytest
import torch

from dplm.features import extract_features, frame_count
from dplm.geometry import BinGrid, SourceLocation
from dplm.model import (
    ActivationStack,
    DoaNet,
    ModelConfig,
    PredictionFrame,
    build_model,
    circular_mean_azimuth,
    decode_azimuth_torch,
    decode_doa,
    feature_tensor_to_torch,
    forward,
)
from dplm.signal import BinauralSignal
from dplm.synth import pink_noise

TINY = ModelConfig(
    n_inception_blocks=2,
    base_filters=4,
    lstm_layers=1,
    lstm_embedding=16,
    grid=BinGrid(n_azimuth=8, n_elevation=4),
    variant="moving",
)


def _signal(n=2048, seed=0):
    rng = np.random.default_rng(seed)
    return BinauralSignal(np.vstack([pink_noise(n, rng), pink_noise(n, rng)]))


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.n_inception_blocks == 6
        assert cfg.base_filters == 64
        assert cfg.lstm_layers == 2
        assert cfg.lstm_embedding == 64
        assert cfg.variant == "moving"
        assert cfg.heads == "azimuth_only"

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(n_inception_blocks=0)
        with pytest.raises(ValueError):
            ModelConfig(lstm_embedding=15)
        with pytest.raises(ValueError):
            ModelConfig(variant="wandering")
        with pytest.raises(ValueError):
            ModelConfig(heads="elevation_only")
        with pytest.raises(ValueError):
            ModelConfig(n_inception_blocks=12)  # frequency axis exhausted

    def test_freq_bins_out_halves_per_block(self):
        # 257 -> 128 -> 64 for two blocks
        assert TINY.freq_bins_out() == 64
        assert ModelConfig().freq_bins_out() == 257 // 2 // 2 // 2 // 2 // 2 // 2

    def test_layer_names(self):
        assert TINY.layer_names() == ["inception_1", "inception_2", "bilstm_1"]

    def test_dict_round_trip(self):
        cfg = ModelConfig(n_inception_blocks=3, grid=BinGrid(12, 5), heads="azimuth_and_elevation")
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestForwardShapes:
    def test_logit_shapes_and_time_preserved(self):
        model = build_model(TINY, seed=0)
        t = 9
        x = torch.randn(2, 4, t, TINY.n_freq)
        az, el, acts = model(x, capture=True)
        assert az.shape == (2, t, 8)
        assert el is None
        assert len(acts) == 3

    def test_capture_layer_shapes(self):
        model = build_model(TINY, seed=0)
        x = torch.randn(1, 4, 5, TINY.n_freq)
        _, _, acts = model(x, capture=True)
        # conv activations: (B, C, T, F) with halved frequency per block
        assert acts[0].shape == (1, 4 * TINY.base_filters, 5, 128)
        assert acts[1].shape == (1, 4 * TINY.base_filters, 5, 64)
        # lstm activations: (B, T, C)
        assert acts[2].shape == (1, 5, TINY.lstm_embedding)

    def test_no_capture_returns_none(self):
        model = build_model(TINY, seed=0)
        _, _, acts = model(torch.randn(1, 4, 3, TINY.n_freq))
        assert acts is None

    def test_shape_mismatch_error(self):
        model = build_model(TINY, seed=0)
        with pytest.raises(ValueError, match="shape mismatch"):
            model(torch.randn(1, 4, 3, 100))

    def test_elevation_head(self):
        cfg = ModelConfig(
            n_inception_blocks=1, base_filters=4, lstm_layers=1, lstm_embedding=16,
            grid=BinGrid(8, 4), heads="azimuth_and_elevation",
        )
        model = build_model(cfg, seed=0)
        az, el, _ = model(torch.randn(1, 4, 3, cfg.n_freq))
        assert el.shape == (1, 3, 4)

    def test_seeded_build_is_deterministic(self):
        a = build_model(TINY, seed=5)
        b = build_model(TINY, seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        c = build_model(TINY, seed=6)
        assert any(
            not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters())
        )


class TestForwardHelper:
    def test_frames_and_stack(self):
        model = build_model(TINY, seed=1)
        feats = extract_features(_signal())
        frames, stack = forward(model, feats, capture=True)
        assert len(frames) == feats.n_frames
        for f in frames:
            assert f.azimuth_probs.shape == (8,)
            assert f.azimuth_probs.sum() == pytest.approx(1.0)
        assert stack.names() == TINY.layer_names()
        for name in stack.names():
            a = stack.get(name)
            assert a.ndim == 3 and a.shape[0] == feats.n_frames

    def test_stack_get_unknown(self):
        model = build_model(TINY, seed=1)
        _, stack = forward(model, extract_features(_signal()), capture=True)
        with pytest.raises(KeyError):
            stack.get("inception_99")

    def test_features_from_signal_matches_numpy(self):
        model = build_model(TINY, seed=0, dtype=torch.float64)
        sig = _signal(4096, seed=3)
        feats = extract_features(sig)
        via_numpy = feature_tensor_to_torch(feats, torch.float64)
        via_torch = model.features_from_signal(torch.from_numpy(sig.samples))
        assert via_torch.shape == via_numpy.shape
        np.testing.assert_allclose(via_torch.numpy(), via_numpy.numpy(), atol=1e-9)

    def test_features_from_signal_errors(self):
        model = build_model(TINY, seed=0)
        with pytest.raises(ValueError):
            model.features_from_signal(torch.zeros(3, 1000))
        with pytest.raises(ValueError, match="too short"):
            model.features_from_signal(torch.zeros(2, 100))


class TestDecode:
    def test_circular_mean_handles_wrap(self):
        centers = np.radians([170.0, -170.0])
        az = circular_mean_azimuth(np.array([0.5, 0.5]), centers)
        assert abs(az) == pytest.approx(math.pi, abs=1e-9)

    def test_delta_decodes_to_bin_center(self):
        grid = BinGrid(8, 4)
        probs = np.zeros(8)
        probs[3] = 1.0
        frames = [PredictionFrame(azimuth_probs=probs)]
        loc = decode_doa(frames, grid, "static")
        assert loc.azimuth == pytest.approx(grid.azimuth_centers()[3], abs=1e-9)
        assert loc.elevation == 0.0

    def test_moving_returns_per_frame(self):
        grid = BinGrid(8, 4)
        p1, p2 = np.zeros(8), np.zeros(8)
        p1[1], p2[6] = 1.0, 1.0
        frames = [PredictionFrame(azimuth_probs=p1), PredictionFrame(azimuth_probs=p2)]
        locs = decode_doa(frames, grid, "moving")
        assert len(locs) == 2
        assert locs[0].azimuth == pytest.approx(grid.azimuth_centers()[1])
        assert locs[1].azimuth == pytest.approx(grid.azimuth_centers()[6])

    def test_static_averages_logits_not_probs(self):
        # two frames with probs p and p^3 (renormalized): log-prob averaging
        # lands on p^2 renormalized, not the arithmetic mean
        grid = BinGrid(4, 2)
        p = np.array([0.4, 0.3, 0.2, 0.1])
        p3 = p ** 3 / np.sum(p ** 3)
        frames = [PredictionFrame(azimuth_probs=p), PredictionFrame(azimuth_probs=p3)]
        loc = decode_doa(frames, grid, "static")
        expected_probs = p ** 2 / np.sum(p ** 2)
        assert loc.azimuth == pytest.approx(
            circular_mean_azimuth(expected_probs, grid.azimuth_centers()), abs=1e-9
        )

    def test_empty_frames_rejected(self):
        with pytest.raises(ValueError):
            decode_doa([], BinGrid(8, 4), "static")

    def test_unknown_variant_rejected(self):
        probs = np.full(8, 1 / 8)
        with pytest.raises(ValueError):
            decode_doa([PredictionFrame(azimuth_probs=probs)], BinGrid(8, 4), "drifting")

    def test_torch_decode_matches_numpy(self):
        grid = BinGrid(8, 4)
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(5, 8))
        probs = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        centers = torch.from_numpy(grid.azimuth_centers())
        decoded = decode_azimuth_torch(torch.from_numpy(logits), centers).numpy()
        expected = [circular_mean_azimuth(p, grid.azimuth_centers()) for p in probs]
        np.testing.assert_allclose(decoded, expected, atol=1e-12)


class TestPredictionFrame:
    def test_probability_validation(self):
        with pytest.raises(ValueError):
            PredictionFrame(azimuth_probs=np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            PredictionFrame(azimuth_probs=np.array([1.5, -0.5]))
