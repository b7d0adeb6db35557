"""Perplexity, simulated perplexity (corrupted histories) and target perplexity."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from config.settings import DEFAULT_SPPL_REALIZATIONS
from data.corpus import Corpus
from noise.channels import ErrorChannel
from noise.corruption import CorruptedPair, TargetMode, corrupt_for_input, corrupt_for_target
from utils.exceptions import NumericalError
from utils.helpers import chunk_list, derive_rng

logger = logging.getLogger(__name__)

SCORING_BATCH = 64


@dataclass
class PplReport:
    ppl: float
    token_count: int
    sentence_logprobs: List[float] = field(default_factory=list)

    @property
    def total_logprob(self) -> float:
        return math.fsum(self.sentence_logprobs)

    def to_dict(self) -> dict:
        return {'ppl': self.ppl, 'tokens': self.token_count, 'logprob': self.total_logprob}


@dataclass
class SpplReport:
    realizations: List[float]

    @property
    def k(self) -> int:
        return len(self.realizations)

    @property
    def mean(self) -> float:
        return float(np.mean(self.realizations))

    @property
    def std(self) -> float:
        return float(np.std(self.realizations, ddof=1)) if self.k > 1 else 0.0

    @property
    def relative_std(self) -> float:
        return self.std / self.mean

    def histogram(self, bins: int = 10):
        return np.histogram(np.asarray(self.realizations), bins=bins)

    def is_unimodal(self, bins: int = 10, slack: Optional[int] = None) -> bool:
        """Counts rise to one peak and fall after it, up to sampling noise"""
        counts, _ = self.histogram(bins)
        if slack is None:
            slack = int(math.ceil(math.sqrt(counts.max())))
        peak = int(np.argmax(counts))
        for i in range(1, peak + 1):
            if counts[i] < counts[:i].max() - slack:
                return False
        for i in range(len(counts) - 2, peak - 1, -1):
            if counts[i] < counts[i + 1:].max() - slack:
                return False
        return True

    def summary(self) -> dict:
        return {'k': self.k, 'mean': self.mean, 'std': self.std, 'relative_std': self.relative_std}


def score_pairs(scorer, sessions: Sequence[Sequence[CorruptedPair]], carry_state: bool = False) -> PplReport:
    """The one scoring path shared by ppl, sppl and tppl.

    Without state carry every pair starts from the initial state and pairs
    are scored in batches; with carry the final state of a sentence seeds
    the next one within a session.
    """
    sentence_logprobs: List[float] = []
    n_tokens = 0
    if carry_state:
        for pairs in sessions:
            state = None
            for pair in pairs:
                scores, state = scorer.score_pair(pair.inputs, pair.targets, state)
                sentence_logprobs.append(math.fsum(scores))
                n_tokens += len(pair)
    else:
        flat = [pair for pairs in sessions for pair in pairs]
        for chunk in chunk_list(flat, SCORING_BATCH):
            scored = scorer.score_batch([(pair.inputs, pair.targets) for pair in chunk])
            for pair, (scores, _) in zip(chunk, scored):
                sentence_logprobs.append(math.fsum(scores))
                n_tokens += len(pair)

    if n_tokens == 0:
        raise NumericalError("no predicted tokens to score")
    total = math.fsum(sentence_logprobs)
    if math.isnan(total):
        raise NumericalError("log-probability sum is NaN")
    try:
        value = math.exp(-total / n_tokens)
    except OverflowError:
        value = float('inf')
    return PplReport(value, n_tokens, sentence_logprobs)


def _sessions(c: Corpus):
    return [sentences for _, sentences in c.iter_sessions()]


def ppl(scorer, c: Corpus, carry_state: bool = False) -> PplReport:
    sessions = [[CorruptedPair.clean(s) for s in sentences] for sentences in _sessions(c)]
    return score_pairs(scorer, sessions, carry_state)


def _realization(scorer, c: Corpus, channel: ErrorChannel, seed: int, r: int, carry_state: bool) -> float:
    sessions = []
    index = 0
    for sentences in _sessions(c):
        pairs = []
        for s in sentences:
            pairs.append(corrupt_for_input(s, channel, derive_rng(seed, r, index)))
            index += 1
        sessions.append(pairs)
    return score_pairs(scorer, sessions, carry_state).ppl


def sppl(scorer, c: Corpus, channel: ErrorChannel, k_realizations: int = DEFAULT_SPPL_REALIZATIONS,
         seed: int = 0, carry_state: bool = False, workers: int = 1) -> SpplReport:
    """k independent full-corpus realizations of corrupted-history perplexity.

    Realization r corrupts sentence i with the generator derived from
    (seed, r, i), so results do not depend on `workers`.
    """
    if k_realizations < 1:
        raise ValueError(f"k_realizations must be >= 1, got {k_realizations}")

    def run(r):
        return _realization(scorer, c, channel, seed, r, carry_state)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            values = list(executor.map(run, range(k_realizations)))
    else:
        values = [run(r) for r in range(k_realizations)]
    report = SpplReport(values)
    logger.info(f"sPPL over {k_realizations} realizations: mean {report.mean:.3f}, "
                f"relative std {100 * report.relative_std:.2f}%")
    return report


def tppl(scorer, c: Corpus, channel: ErrorChannel, seed: int = 0, carry_state: bool = False) -> PplReport:
    """Clean histories, targets substituted by the channel (no deletions or insertions)"""
    sessions = []
    index = 0
    for sentences in _sessions(c):
        pairs = []
        for s in sentences:
            pairs.append(corrupt_for_target(s, channel, derive_rng(seed, index), mode=TargetMode.S))
            index += 1
        sessions.append(pairs)
    return score_pairs(scorer, sessions, carry_state)
