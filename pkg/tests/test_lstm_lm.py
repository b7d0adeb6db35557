import math

import numpy as np
import pytest

from conftest import make_vocab
from data.corpus import BOS, EOS
from data.storage import load_checkpoint, save_checkpoint
from models.lstm_lm import (
    LstmConfig, LstmState, forward_backward, forward_step, init_lstm, loss_and_grads, num_parameters,
    parameter_shapes,
)
from utils.exceptions import ConfigError, DataError
from utils.helpers import derive_rng


@pytest.fixture
def vocab():
    return make_vocab([f'w{i}' for i in range(7)])


@pytest.fixture
def lm(vocab):
    cfg = LstmConfig(vocab_size=vocab.size, embed_dim=6, hidden_dim=8, layers=2)
    return init_lstm(cfg, derive_rng(0), vocab)


PAIRS = [
    ([BOS, 3, 4, 5], [3, 4, 5, EOS]),
    ([BOS, 6], [6, EOS]),
    ([BOS, 9, 8, 7, 3, 3], [9, 8, 7, 3, 3, EOS]),
]


def test_parameter_count():
    cfg = LstmConfig(vocab_size=50, embed_dim=12, hidden_dim=16, layers=3)
    V, E, H = 50, 12, 16
    expected = V * E + (4 * H * (E + H) + 4 * H) + 2 * (4 * H * (2 * H) + 4 * H) + V * H + V
    assert num_parameters(cfg) == expected
    assert list(parameter_shapes(cfg))[0] == 'embedding'
    assert list(parameter_shapes(cfg))[-2:] == ['output.weight', 'output.bias']


def test_config_validation():
    with pytest.raises(ConfigError):
        LstmConfig(vocab_size=3).validate()
    with pytest.raises(ConfigError):
        LstmConfig(vocab_size=10, dropout_rate=0.8).validate()
    with pytest.raises(ConfigError):
        LstmConfig(vocab_size=10, hidden_dim=0).validate()
    with pytest.raises(ConfigError):
        LstmConfig(vocab_size=10, label_smoothing_eps=1.0).validate()
    cfg = LstmConfig(vocab_size=10, dropout_rate=0.3)
    assert LstmConfig.from_dict(cfg.to_dict()) == cfg


def test_init_is_deterministic(vocab):
    cfg = LstmConfig(vocab_size=vocab.size, embed_dim=4, hidden_dim=4, layers=1)
    a = init_lstm(cfg, derive_rng(3), vocab)
    b = init_lstm(cfg, derive_rng(3), vocab)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
        assert np.abs(a.params[name]).max() <= 0.1


def test_init_vocab_mismatch(vocab):
    with pytest.raises(ConfigError):
        init_lstm(LstmConfig(vocab_size=vocab.size + 1, embed_dim=4, hidden_dim=4), derive_rng(0), vocab)


def test_next_token_distribution_is_normalized(lm):
    state = lm.initial_state()
    assert state.is_zero()
    for token in (BOS, 3, 4, EOS):
        logp, state = forward_step(lm, state, token)
        assert logp[BOS] == -np.inf
        assert np.exp(logp[1:]).sum() == pytest.approx(1.0, abs=1e-12)
    assert not state.is_zero()
    with pytest.raises(ValueError):
        forward_step(lm, state, lm.cfg.vocab_size)


def test_stepwise_matches_batch_scoring(lm):
    for inputs, targets in PAIRS:
        batch_scores, batch_state = lm.score_pair(inputs, targets)
        state = lm.initial_state()
        step_scores = []
        for x, y in zip(inputs, targets):
            logp, state = forward_step(lm, state, x)
            step_scores.append(logp[y])
        np.testing.assert_allclose(batch_scores, step_scores, atol=1e-10, rtol=0)
        for l in range(lm.cfg.layers):
            np.testing.assert_allclose(batch_state.h[l], state.h[l], atol=1e-10, rtol=0)


def test_padding_does_not_change_scores(lm):
    batched = lm.score_batch(PAIRS)
    for (inputs, targets), (scores, state) in zip(PAIRS, batched):
        alone, alone_state = lm.score_pair(inputs, targets)
        np.testing.assert_allclose(scores, alone, atol=1e-12, rtol=0)
        np.testing.assert_allclose(state.c[-1], alone_state.c[-1], atol=1e-12, rtol=0)


def test_state_carry(lm):
    _, state = lm.score_pair(*PAIRS[0])
    carried, _ = lm.score_pair(*PAIRS[1], state=state)
    fresh, _ = lm.score_pair(*PAIRS[1])
    assert not np.allclose(carried, fresh)
    assert LstmState.zeros(lm.cfg, 1).broadcast(3).batch_size == 3


def numerical_gradient(lm, pairs, name, index, eps, dropout=False, h=1e-5):
    param = lm.params[name]
    original = param[index]
    values = []
    for delta in (h, -h):
        param[index] = original + delta
        rng = derive_rng(9) if dropout else None
        loss, _, _ = forward_backward(lm, pairs, eps, dropout_on=dropout, rng=rng)
        values.append(loss)
    param[index] = original
    return (values[0] - values[1]) / (2 * h)


@pytest.mark.parametrize('eps,dropout', [(0.0, False), (0.1, False), (0.0, True)])
def test_gradient_check(vocab, eps, dropout):
    cfg = LstmConfig(vocab_size=10, embed_dim=5, hidden_dim=8, layers=2, dropout_rate=0.3 if dropout else 0.0)
    lm = init_lstm(cfg, derive_rng(1), vocab)
    for name in lm.params:
        lm.params[name] *= 5.0
    rng = derive_rng(9) if dropout else None
    _, grads, _ = forward_backward(lm, PAIRS, eps, dropout_on=dropout, rng=rng)

    pick = derive_rng(2)
    for name, param in lm.params.items():
        for _ in range(6):
            index = tuple(int(pick.integers(n)) for n in param.shape)
            if name == 'embedding' and index[0] not in {x for inputs, _ in PAIRS for x in inputs}:
                assert grads[name][index] == 0.0
                continue
            expected = numerical_gradient(lm, PAIRS, name, index, eps, dropout)
            assert grads[name][index] == pytest.approx(expected, rel=1e-4, abs=1e-8), name


def test_uniform_output_loss(lm):
    lm.params['output.weight'][:] = 0.0
    lm.params['output.bias'][:] = 0.0
    V = lm.cfg.vocab_size
    for eps in (0.0, 0.5, 1.0):
        loss, _ = loss_and_grads(lm, PAIRS, label_smoothing_eps=eps)
        assert loss == pytest.approx(math.log(V - 1))


def test_confident_model_has_near_zero_loss(lm):
    lm.params['output.bias'][EOS] = 1e3
    loss, grads = loss_and_grads(lm, [([BOS], [EOS])])
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.abs(grads['output.bias']).max() < 1e-12


def test_bos_target_rejected(lm):
    with pytest.raises(ValueError):
        loss_and_grads(lm, [([BOS, 3], [3, BOS])])


def test_sharded_gradients_match_serial(lm):
    pairs = PAIRS * 3
    loss, grads = loss_and_grads(lm, pairs)
    sharded_loss, sharded = loss_and_grads(lm, pairs, shards=4)
    assert sharded_loss == pytest.approx(loss, rel=1e-12)
    for name in grads:
        np.testing.assert_allclose(sharded[name], grads[name], rtol=1e-10, atol=1e-14)


def test_dropout_needs_rng(vocab):
    cfg = LstmConfig(vocab_size=vocab.size, embed_dim=4, hidden_dim=4, dropout_rate=0.5)
    lm = init_lstm(cfg, derive_rng(0), vocab)
    with pytest.raises(ValueError):
        loss_and_grads(lm, PAIRS, dropout_on=True)
    # evaluation ignores dropout
    a, _ = lm.score_pair(*PAIRS[0])
    b, _ = lm.score_pair(*PAIRS[0])
    np.testing.assert_array_equal(a, b)


def test_checkpoint_round_trip(tmp_path, lm, vocab):
    path = str(tmp_path / 'model.npz')
    save_checkpoint(path, lm, vocab)
    loaded, loaded_vocab = load_checkpoint(path)
    assert loaded_vocab.words == vocab.words
    assert loaded.cfg == lm.cfg
    for name in lm.params:
        np.testing.assert_array_equal(loaded.params[name], lm.params[name])
    np.testing.assert_array_equal(loaded.score_pair(*PAIRS[2])[0], lm.score_pair(*PAIRS[2])[0])


def test_checkpoint_hash_mismatch(tmp_path, lm, vocab):
    path = str(tmp_path / 'model.npz')
    save_checkpoint(path, lm, vocab)
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    arrays['__vocab__'] = np.array(list(vocab.words[:-1]) + ['changed'])
    tampered = str(tmp_path / 'tampered.npz')
    with open(tampered, 'wb') as f:
        np.savez(f, **arrays)
    with pytest.raises(DataError):
        load_checkpoint(tampered)


def test_checkpoint_vocab_size_mismatch(tmp_path, lm):
    with pytest.raises(DataError):
        save_checkpoint(str(tmp_path / 'x.npz'), lm, make_vocab(['only']))
