import pytest

from covdec.config import TrainConfig, config_from_dict, config_from_file, write_config
from covdec.errors import ConfigError


def test_roundtrip_through_file(tmp_path):
    config = TrainConfig(seed=42, epochs_stage2=77, patience=None, rnn_order="lstm-first")
    path = tmp_path / "config.txt"
    write_config(path, config)
    assert config_from_file(path) == config


def test_patience_off_spelling(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("patience = off\n")
    assert config_from_file(path).patience is None
    assert TrainConfig(patience=None).to_dict()["patience"] == "off"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="momentum"):
        config_from_dict({"momentum": "0.9"})


def test_duplicate_key_rejected(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        config_from_file(path)


def test_validation_errors():
    with pytest.raises(ConfigError, match="split_fraction"):
        TrainConfig(split_fraction=1.0).validate()
    with pytest.raises(ConfigError, match="batch_size"):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError, match="patience"):
        TrainConfig(patience=0).validate()
    with pytest.raises(ConfigError, match="rnn_order"):
        TrainConfig(rnn_order="fc-last").validate()
    with pytest.raises(ConfigError, match="latent"):
        TrainConfig(dae_latent=300).validate()


def test_feature_width_tracks_rnn_order():
    assert TrainConfig().feature_width == 128
    assert TrainConfig(rnn_order="lstm-first", rnn_fc2=48).feature_width == 64 + 48


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        config_from_file("/no/such/config.txt")
