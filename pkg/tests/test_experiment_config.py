import json
import os

import pytest

from config.experiment import ExperimentConfig, SeedsConfig
from utils.exceptions import ConfigError

EXAMPLE_CONFIG = os.path.join(os.path.dirname(__file__), '..', 'config', 'experiment.json')


def test_example_config_loads():
    config = ExperimentConfig.load(EXAMPLE_CONFIG, check_paths=False)
    assert config.scheme == 'i0'
    assert config.channel.p_sub == 0.12
    assert config.rescore.lambdas[0] == 0.0 and config.rescore.lambdas[-1] == 1.0
    assert config.finetune.batch_size == 1


def test_save_and_load(tmp_path):
    config = ExperimentConfig()
    config.scheme = 't0SDI'
    config.channel.p_del = 0.1
    config.model.hidden_dim = 12
    path = str(tmp_path / 'config.json')
    config.save(path)
    loaded = ExperimentConfig.load(path)
    assert loaded == config


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'scheme': 'i0', 'learning_rate': 1.0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'model': {'hidden': 3}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'model': 5})


def test_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'scheme': 'i9'})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'channel': {'p_sub': 0.8, 'p_del': 0.5}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'channel': {'type': 'bigram'}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'rescore': {'lambdas': [0.5, 1.2]}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'pretrain': {'initial_lr': -1.0}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'dropout_grid': [0.9]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'correlate_rates': [[0.1, 0.1]]})


def test_missing_paths(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'paths': {'train': str(tmp_path / 'nope.txt')}}))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(path))
    assert ExperimentConfig.load(str(path), check_paths=False).paths.train.endswith('nope.txt')


def test_bad_json(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text('{"scheme": ')
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(path))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(tmp_path / 'absent.json'))


def test_with_seed():
    a = ExperimentConfig().with_seed(7)
    b = ExperimentConfig().with_seed(7)
    c = ExperimentConfig().with_seed(8)
    assert a.seeds == b.seeds
    assert a.seeds != c.seeds
    assert len({a.seeds.init, a.seeds.shuffle, a.seeds.noise, a.seeds.eval}) == 4
    assert ExperimentConfig().with_seed(None).seeds == SeedsConfig()


def test_model_config_to_lstm():
    config = ExperimentConfig.from_dict({'model': {'hidden_dim': 10, 'dropout_rate': 0.2}})
    lstm = config.model.to_lstm_config(vocab_size=20)
    assert lstm.hidden_dim == 10 and lstm.dropout_rate == 0.2 and lstm.vocab_size == 20
