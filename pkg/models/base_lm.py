import logging
import math
from abc import ABC, abstractmethod
from typing import List, Sequence, Tuple

import numpy as np

from data.corpus import BOS, Vocabulary


class LmScorer(ABC):
    """Stateful next-token log-distribution contract.

    A state summarizes the history consumed so far. `next_logprobs` consumes
    one input token and returns the log-distribution over the next token
    (length `vocab.size`, BOS at -inf) together with the new state.
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def initial_state(self):
        """State before any token has been consumed"""

    @abstractmethod
    def next_logprobs(self, state, token: int) -> Tuple[np.ndarray, object]:
        pass

    def score_pair(self, inputs: Sequence[int], targets: Sequence[int], state=None):
        """Log-probability of each target given the inputs up to it"""
        if state is None:
            state = self.initial_state()
        scores = np.empty(len(targets))
        for t, (token, target) in enumerate(zip(inputs, targets)):
            logp, state = self.next_logprobs(state, token)
            scores[t] = logp[target]
        return scores, state

    def score_batch(self, pairs: Sequence[Tuple[Sequence[int], Sequence[int]]], state=None) -> List:
        """Score several pairs that all start from the same state"""
        return [self.score_pair(inputs, targets, state) for inputs, targets in pairs]


class UniformScorer(LmScorer):
    """Every predictable word equally likely, whatever the history"""

    def __init__(self, vocab: Vocabulary):
        super().__init__(vocab)
        logp = np.full(vocab.size, -math.log(vocab.num_predictable))
        logp[BOS] = -np.inf
        self._logp = logp

    def initial_state(self):
        return None

    def next_logprobs(self, state, token):
        return self._logp.copy(), None
