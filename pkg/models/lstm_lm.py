"""Multi-layer LSTM language model in NumPy with hand-written backpropagation.

Parameters live in one ordered dict of float64 arrays:

    embedding          (V, E)
    lstm.{l}.weight    (4H, in_l + H)   gate blocks ordered i, f, g, o
    lstm.{l}.bias      (4H,)
    output.weight      (V, H)
    output.bias        (V,)

BOS (id 0) is an input only; its output log-probability is pinned to -inf
and the softmax runs over ids 1..V-1.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logsumexp

from config.settings import EMBED_DIM, HIDDEN_DIM, NUM_LAYERS, INIT_RANGE
from data.corpus import BOS, EOS, Vocabulary
from utils.exceptions import ConfigError
from .base_lm import LmScorer

logger = logging.getLogger(__name__)

MIN_VOCAB_SIZE = 4
MAX_DROPOUT = 0.7


@dataclass
class LstmConfig:
    vocab_size: int
    embed_dim: int = EMBED_DIM
    hidden_dim: int = HIDDEN_DIM
    layers: int = NUM_LAYERS
    dropout_rate: float = 0.0
    label_smoothing_eps: float = 0.0

    def validate(self):
        if self.vocab_size < MIN_VOCAB_SIZE:
            raise ConfigError(f"vocab_size must be >= {MIN_VOCAB_SIZE}, got {self.vocab_size}")
        for name in ('embed_dim', 'hidden_dim', 'layers'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate <= MAX_DROPOUT:
            raise ConfigError(f"dropout_rate must be in [0, {MAX_DROPOUT}], got {self.dropout_rate}")
        if not 0.0 <= self.label_smoothing_eps < 1.0:
            raise ConfigError(f"label_smoothing_eps must be in [0, 1), got {self.label_smoothing_eps}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'LstmConfig':
        return cls(**data)


def parameter_shapes(cfg: LstmConfig) -> Dict[str, Tuple[int, ...]]:
    V, E, H = cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim
    shapes = {'embedding': (V, E)}
    for l in range(cfg.layers):
        in_dim = E if l == 0 else H
        shapes[f'lstm.{l}.weight'] = (4 * H, in_dim + H)
        shapes[f'lstm.{l}.bias'] = (4 * H,)
    shapes['output.weight'] = (V, H)
    shapes['output.bias'] = (V,)
    return shapes


def num_parameters(cfg: LstmConfig) -> int:
    return int(sum(np.prod(shape) for shape in parameter_shapes(cfg).values()))


@dataclass
class LstmState:
    """Per-layer (hidden, cell) activations, each of shape (batch, H)"""
    h: List[np.ndarray]
    c: List[np.ndarray]

    @classmethod
    def zeros(cls, cfg: LstmConfig, batch: int = 1) -> 'LstmState':
        shape = (batch, cfg.hidden_dim)
        return cls([np.zeros(shape) for _ in range(cfg.layers)],
                   [np.zeros(shape) for _ in range(cfg.layers)])

    @property
    def batch_size(self) -> int:
        return self.h[0].shape[0]

    def copy(self) -> 'LstmState':
        return LstmState([h.copy() for h in self.h], [c.copy() for c in self.c])

    def row(self, i: int) -> 'LstmState':
        return LstmState([h[i:i + 1].copy() for h in self.h], [c[i:i + 1].copy() for c in self.c])

    def rows(self, start: int, stop: int) -> 'LstmState':
        return LstmState([h[start:stop].copy() for h in self.h], [c[start:stop].copy() for c in self.c])

    def broadcast(self, batch: int) -> 'LstmState':
        if self.batch_size == batch:
            return self.copy()
        if self.batch_size != 1:
            raise ValueError(f"cannot broadcast a batch-{self.batch_size} state to {batch}")
        return LstmState([np.repeat(h, batch, axis=0) for h in self.h],
                         [np.repeat(c, batch, axis=0) for c in self.c])

    def is_zero(self) -> bool:
        return all(not h.any() for h in self.h) and all(not c.any() for c in self.c)


@dataclass
class _StepCache:
    layers: list
    top: np.ndarray
    dropout_masks: list
    mask: np.ndarray


@dataclass
class ForwardResult:
    logps: np.ndarray                       # (B, T, V)
    state: LstmState
    caches: List[_StepCache] = field(default_factory=list)


def _dropout_mask(rng, shape, rate):
    if rate <= 0.0:
        return None
    if rng is None:
        raise ValueError("dropout needs a random generator")
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    out = np.empty_like(logits)
    out[:, BOS] = -np.inf
    scores = logits[:, 1:]
    out[:, 1:] = scores - logsumexp(scores, axis=1, keepdims=True)
    return out


def pad_pairs(pairs: Sequence[Tuple[Sequence[int], Sequence[int]]]):
    """(inputs, targets, mask) arrays; padding repeats the last state"""
    lengths = [len(inputs) for inputs, _ in pairs]
    B, T = len(pairs), max(lengths) if lengths else 0
    inputs = np.full((B, T), BOS, dtype=np.int64)
    targets = np.full((B, T), EOS, dtype=np.int64)
    mask = np.zeros((B, T))
    for b, (x, y) in enumerate(pairs):
        if len(x) != len(y):
            raise ValueError(f"unaligned pair {b}: {len(x)} inputs vs {len(y)} targets")
        inputs[b, :len(x)] = x
        targets[b, :len(y)] = y
        mask[b, :len(x)] = 1.0
    return inputs, targets, mask


class LstmLm(LmScorer):

    def __init__(self, cfg: LstmConfig, params: Dict[str, np.ndarray], vocab: Optional[Vocabulary] = None):
        super().__init__(vocab)
        self.cfg = cfg.validate()
        expected = parameter_shapes(cfg)
        if list(params) != list(expected):
            raise ValueError(f"parameter names {list(params)} do not match {list(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shape}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in expected}

    def copy(self) -> 'LstmLm':
        return LstmLm(self.cfg, {k: v.copy() for k, v in self.params.items()}, self.vocab)

    def initial_state(self, batch: int = 1) -> LstmState:
        return LstmState.zeros(self.cfg, batch)

    def forward(self, inputs: np.ndarray, mask: np.ndarray, state: Optional[LstmState] = None,
                dropout_on: bool = False, rng=None, keep_cache: bool = False) -> ForwardResult:
        cfg, p = self.cfg, self.params
        B, T = inputs.shape
        H, L = cfg.hidden_dim, cfg.layers
        state = (state or self.initial_state(B)).broadcast(B)
        h, c = list(state.h), list(state.c)
        rate = cfg.dropout_rate if dropout_on else 0.0
        logps = np.empty((B, T, cfg.vocab_size))
        caches = []

        for t in range(T):
            m = mask[:, t:t + 1]
            x = p['embedding'][inputs[:, t]]
            masks = []
            layer_caches = []
            for l in range(L):
                d = _dropout_mask(rng, x.shape, rate)
                masks.append(d)
                if d is not None:
                    x = x * d
                xh = np.concatenate([x, h[l]], axis=1)
                z = xh @ p[f'lstm.{l}.weight'].T + p[f'lstm.{l}.bias']
                i = expit(z[:, :H])
                f = expit(z[:, H:2 * H])
                g = np.tanh(z[:, 2 * H:3 * H])
                o = expit(z[:, 3 * H:])
                c_new = f * c[l] + i * g
                tanh_c = np.tanh(c_new)
                h_new = o * tanh_c
                if keep_cache:
                    layer_caches.append((xh, c[l], i, f, g, o, tanh_c))
                # padded positions carry the previous state through unchanged
                h[l] = m * h_new + (1.0 - m) * h[l]
                c[l] = m * c_new + (1.0 - m) * c[l]
                x = h[l]
            d = _dropout_mask(rng, x.shape, rate)
            masks.append(d)
            top = x * d if d is not None else x
            logps[:, t] = _log_softmax(top @ p['output.weight'].T + p['output.bias'])
            if keep_cache:
                caches.append(_StepCache(layer_caches, top, masks, m))

        return ForwardResult(logps, LstmState(h, c), caches)

    def backward(self, inputs, targets, result: ForwardResult, n_tokens: float,
                 label_smoothing_eps: float = 0.0) -> Dict[str, np.ndarray]:
        """Gradients of the token-summed loss divided by `n_tokens`"""
        cfg, p = self.cfg, self.params
        H, L, V = cfg.hidden_dim, cfg.layers, cfg.vocab_size
        B, T = inputs.shape
        grads = {name: np.zeros_like(value) for name, value in p.items()}
        dh_next = [np.zeros((B, H)) for _ in range(L)]
        dc_next = [np.zeros((B, H)) for _ in range(L)]
        rows = np.arange(B)
        uniform = label_smoothing_eps / (V - 1)

        for t in reversed(range(T)):
            cache = result.caches[t]
            m = cache.mask
            probs = np.exp(result.logps[:, t, 1:])
            probs[rows, targets[:, t] - 1] -= 1.0 - label_smoothing_eps
            probs -= uniform
            dlogits = np.zeros((B, V))
            dlogits[:, 1:] = probs * m / n_tokens
            grads['output.weight'] += dlogits.T @ cache.top
            grads['output.bias'] += dlogits.sum(axis=0)
            dx = dlogits @ p['output.weight']
            if cache.dropout_masks[L] is not None:
                dx = dx * cache.dropout_masks[L]

            for l in reversed(range(L)):
                xh, c_prev, i, f, g, o, tanh_c = cache.layers[l]
                W = p[f'lstm.{l}.weight']
                dh = dx + dh_next[l]
                dh_new = m * dh
                dc_new = m * dc_next[l] + dh_new * o * (1.0 - tanh_c ** 2)
                dz = np.concatenate([
                    dc_new * g * i * (1.0 - i),
                    dc_new * c_prev * f * (1.0 - f),
                    dc_new * i * (1.0 - g ** 2),
                    dh_new * tanh_c * o * (1.0 - o),
                ], axis=1)
                grads[f'lstm.{l}.weight'] += dz.T @ xh
                grads[f'lstm.{l}.bias'] += dz.sum(axis=0)
                dxh = dz @ W
                in_dim = xh.shape[1] - H
                dh_next[l] = dxh[:, in_dim:] + (1.0 - m) * dh
                dc_next[l] = dc_new * f + (1.0 - m) * dc_next[l]
                dx = dxh[:, :in_dim]
                if cache.dropout_masks[l] is not None:
                    dx = dx * cache.dropout_masks[l]

            np.add.at(grads['embedding'], inputs[:, t], dx)
        return grads

    def next_logprobs(self, state, token):
        return forward_step(self, state, token)

    def score_pair(self, inputs, targets, state=None):
        scored = self.score_batch([(inputs, targets)], state)
        return scored[0]

    def score_batch(self, pairs, state=None):
        if not pairs:
            return []
        inputs, targets, mask = pad_pairs(pairs)
        result = self.forward(inputs, mask, state)
        out = []
        for b, (x, _) in enumerate(pairs):
            n = len(x)
            scores = result.logps[b, np.arange(n), targets[b, :n]]
            out.append((scores, result.state.row(b)))
        return out


def init_lstm(cfg: LstmConfig, rng: np.random.Generator, vocab: Optional[Vocabulary] = None) -> LstmLm:
    cfg.validate()
    if vocab is not None and vocab.size != cfg.vocab_size:
        raise ConfigError(f"vocab has {vocab.size} entries but vocab_size is {cfg.vocab_size}")
    params = {name: rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape)
              for name, shape in parameter_shapes(cfg).items()}
    logger.info(f"Initialized LSTM LM with {num_parameters(cfg)} parameters "
                f"(V={cfg.vocab_size}, E={cfg.embed_dim}, H={cfg.hidden_dim}, L={cfg.layers})")
    return LstmLm(cfg, params, vocab)


def forward_step(lm: LstmLm, st: Optional[LstmState], input_token: int, dropout_on: bool = False,
                 rng=None) -> Tuple[np.ndarray, LstmState]:
    """Consume one token; return the log-distribution over the next one"""
    if not 0 <= input_token < lm.cfg.vocab_size:
        raise ValueError(f"invalid token id: {input_token}")
    result = lm.forward(np.array([[input_token]], dtype=np.int64), np.ones((1, 1)), st,
                        dropout_on=dropout_on, rng=rng)
    return result.logps[0, 0], result.state


def _pair_arrays(pair):
    if hasattr(pair, 'inputs'):
        return pair.inputs, pair.targets
    return pair


def forward_backward(lm: LstmLm, pairs, label_smoothing_eps: float = 0.0, dropout_on: bool = False,
                     rng=None, state: Optional[LstmState] = None, n_tokens: Optional[float] = None):
    """(summed loss / n_tokens, gradients, final state) for one batch"""
    pairs = [_pair_arrays(pair) for pair in pairs]
    inputs, targets, mask = pad_pairs(pairs)
    if np.any(targets[mask > 0] == BOS):
        raise ValueError("BOS is never a prediction target")
    if n_tokens is None:
        n_tokens = float(mask.sum())
    result = lm.forward(inputs, mask, state, dropout_on=dropout_on, rng=rng, keep_cache=True)

    B, T = inputs.shape
    picked = result.logps[np.arange(B)[:, None], np.arange(T)[None, :], targets]
    token_loss = -(1.0 - label_smoothing_eps) * picked
    if label_smoothing_eps > 0:
        token_loss -= label_smoothing_eps / (lm.cfg.vocab_size - 1) * result.logps[:, :, 1:].sum(axis=2)
    loss = float((token_loss * mask).sum() / n_tokens)

    grads = lm.backward(inputs, targets, result, n_tokens, label_smoothing_eps)
    return loss, grads, result.state


def loss_and_grads(lm: LstmLm, pairs, label_smoothing_eps: float = 0.0, dropout_on: bool = False,
                   rng=None, state: Optional[LstmState] = None, shards: int = 1):
    """Mean (smoothed) cross-entropy over all predicted tokens and its gradients.

    With shards > 1 the batch is split into contiguous shards whose
    gradients are computed concurrently and summed in shard order.
    """
    pairs = [_pair_arrays(pair) for pair in pairs]
    if shards <= 1 or len(pairs) < 2:
        loss, grads, _ = forward_backward(lm, pairs, label_smoothing_eps, dropout_on, rng, state)
        return loss, grads

    n_tokens = float(sum(len(x) for x, _ in pairs))
    bounds = np.linspace(0, len(pairs), min(shards, len(pairs)) + 1).astype(int)
    if dropout_on and rng is not None:
        rngs = [np.random.default_rng(s) for s in rng.integers(0, 2 ** 63 - 1, size=len(bounds) - 1)]
    else:
        rngs = [rng] * (len(bounds) - 1)

    def run(k):
        start, stop = bounds[k], bounds[k + 1]
        shard_state = state.rows(start, stop) if state is not None and state.batch_size > 1 else state
        return forward_backward(lm, pairs[start:stop], label_smoothing_eps, dropout_on, rngs[k],
                                shard_state, n_tokens)

    with ThreadPoolExecutor(max_workers=len(bounds) - 1) as executor:
        results = list(executor.map(run, range(len(bounds) - 1)))

    loss = 0.0
    grads = {name: np.zeros_like(value) for name, value in lm.params.items()}
    for shard_loss, shard_grads, _ in results:
        loss += shard_loss
        for name in grads:
            grads[name] += shard_grads[name]
    return loss, grads
