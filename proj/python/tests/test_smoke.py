import json
import math

import numpy as np
import pytest

import sgvc


def sine(freq, seconds=1.0, rate=22050, amp=0.5):
    t = np.arange(int(round(seconds * rate))) / rate
    return (amp * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def test_mel_shape_and_silence():
    cfg = sgvc.MelConfig()
    mel = sgvc.mel_spectrogram(sine(220, 2.6), cfg)
    assert mel.shape == (80, 224)
    quiet = sgvc.mel_spectrogram(np.zeros(22050, np.float32), cfg)
    assert np.all(quiet == np.float32(math.log(cfg.log_floor)))
    assert sgvc.fit_width(mel[:, :100], 224, cfg.pad_value()).shape == (80, 224)


def test_column_norm():
    out = sgvc.column_norm(np.array([[1, -2], [3, 4]], np.float32))
    assert out.tolist() == [4.0, 6.0]


def test_f0_and_diff():
    f0, voiced = sgvc.estimate_f0(sine(220))
    mean = np.mean(np.asarray(f0)[np.asarray(voiced)])
    assert abs(mean - 220) < 3
    assert abs(sgvc.f0_diff(sine(220), [sine(330)]) - 110) < 3
    assert sgvc.f0_diff(np.zeros(22050, np.float32), [sine(330)]) is None
    with pytest.raises(sgvc.EmptyInputError):
        sgvc.f0_diff(sine(220), [])


def test_griffin_lim_round_trip(tmp_path):
    cfg = sgvc.MelConfig()
    mel = sgvc.mel_spectrogram(sine(440, 0.5), cfg)
    wave, conv = sgvc.griffin_lim(mel, cfg, iterations=8)
    assert wave.shape == ((mel.shape[1] - 1) * cfg.hop_size,)
    assert len(conv) == 8
    sgvc.write_mel(tmp_path / "a.mel", mel)
    assert np.array_equal(sgvc.read_mel(tmp_path / "a.mel"), mel)


def test_losses():
    assert sgvc.adversarial_loss(np.zeros(3, np.float32), np.zeros(3, np.float32)) == pytest.approx(
        2 * math.log(0.5))
    x = np.array([[1, 1]], np.float32)
    g = np.array([[0, 3]], np.float32)
    assert sgvc.norm_consistency_loss(x, g) == pytest.approx(1.5)
    ones = dict(adv=1, fake_id=0.5, trg_id=0.5, style=1, content=1, ds=1, norm=1, rec=1)
    assert sgvc.total_generator_objective(ones) == pytest.approx(24.5)
    with pytest.raises(sgvc.LabelError):
        sgvc.cross_entropy(np.zeros((2, 3), np.float32), [0, 3])


def test_config_overrides():
    text = sgvc.apply_overrides(sgvc.default_config(), ["epochs=1", "model.num_subbands=2"])
    cfg = json.loads(text)
    assert cfg["train"]["epochs"] == 1
    assert cfg["model"]["num_subbands"] == 2
    with pytest.raises(sgvc.ConfigError):
        sgvc.apply_overrides(sgvc.default_config(), ["nope=1"])


def test_model_conversion_shapes():
    model = sgvc.Model.create(sgvc.ModelConfig.compact(2), seed=1)
    rng = np.random.default_rng(0)
    src = rng.standard_normal((80, 300)).astype(np.float32) - 5
    ref = rng.standard_normal((80, 224)).astype(np.float32) - 5
    out = model.convert(src, [ref])
    assert out.shape == (80, 300)
    rec = model.reconstruct(src)
    assert np.array_equal(rec, model.convert(src, [src]))
    labels = model.classify(np.stack([ref, ref]))
    assert len(labels) == 2 and labels[0] == labels[1]
