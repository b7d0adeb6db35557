import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from data.corpus import BOS, EOS, RESERVED_WORDS, Corpus, Vocabulary, encode  # noqa: E402
from models.base_lm import LmScorer  # noqa: E402


def make_vocab(words):
    return Vocabulary(list(RESERVED_WORDS) + list(words))


def make_corpus(vocab, lines, sessions=None, name='test'):
    return Corpus([encode(vocab, line) for line in lines], sessions, name=name, vocab=vocab)


@pytest.fixture
def small_vocab():
    return make_vocab(['a', 'b', 'c', 'd', 'e', 'f', 'g'])


@pytest.fixture
def small_corpus(small_vocab):
    lines = ['a b c', 'b c d e', 'a a b', 'e f g a', 'c d', 'g f e d c b a', 'a c e g', 'b d f']
    return make_corpus(small_vocab, lines)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class ChainScorer(LmScorer):
    """Puts `hit` on the successor of the current token in a fixed chain, the rest spread evenly"""

    def __init__(self, vocab, chain, hit):
        super().__init__(vocab)
        self.successor = dict(zip([BOS] + list(chain), list(chain) + [EOS]))
        self.hit = hit

    def initial_state(self):
        return None

    def next_logprobs(self, state, token):
        if token in self.successor:
            p = np.full(self.vocab.size, (1.0 - self.hit) / (self.vocab.size - 2))
            p[self.successor[token]] = self.hit
        else:
            p = np.full(self.vocab.size, 1.0 / (self.vocab.size - 1))
        p[BOS] = 0.0
        with np.errstate(divide='ignore'):
            return np.log(p), None
