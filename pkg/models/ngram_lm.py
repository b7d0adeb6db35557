"""Interpolated Kneser-Ney n-gram language model with ARPA export."""
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import DEFAULT_NGRAM_ORDER, FALLBACK_DISCOUNT
from data.corpus import BOS, Corpus, Vocabulary
from utils.exceptions import DataError
from .base_lm import LmScorer

logger = logging.getLogger(__name__)


@dataclass
class ContextStats:
    counts: Dict[int, int]
    total: int
    n_types: int
    words: np.ndarray
    values: np.ndarray

    @classmethod
    def from_counter(cls, counter: Counter) -> 'ContextStats':
        words = np.fromiter(counter.keys(), dtype=np.int64, count=len(counter))
        values = np.fromiter(counter.values(), dtype=np.float64, count=len(counter))
        return cls(dict(counter), int(values.sum()), len(counter), words, values)


class NgramLm(LmScorer):
    """Interpolated KN with one absolute discount per order.

    `tables[k]` maps a (k-1)-token context to the order-k counts: raw counts
    at the highest order and for n-grams starting with BOS, continuation
    counts otherwise. The lowest order interpolates with the uniform
    distribution over predictable words, which floors unseen words and UNK.
    """

    def __init__(self, vocab: Vocabulary, order: int, tables: Dict[int, Dict[Tuple[int, ...], ContextStats]],
                 discounts: Dict[int, float]):
        super().__init__(vocab)
        self.order = order
        self.tables = tables
        self.discounts = discounts
        self._uniform = 1.0 / vocab.num_predictable

    def initial_state(self):
        return ()

    def _advance(self, state, token):
        if token == BOS:
            return (BOS,)
        if self.order == 1:
            return ()
        return (tuple(state) + (token,))[-(self.order - 1):]

    def prob(self, context: Sequence[int], w: int) -> float:
        if w == BOS:
            raise ValueError("BOS is never predicted")
        context = tuple(context)
        p = self._uniform
        for k in range(1, self.order + 1):
            if k - 1 > len(context):
                break
            ctx = context[len(context) - (k - 1):] if k > 1 else ()
            stats = self.tables[k].get(ctx)
            if stats is None:
                break
            d = self.discounts[k]
            c = stats.counts.get(w, 0)
            p = max(c - d, 0.0) / stats.total + d * stats.n_types / stats.total * p
        return p

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        """p(. | context) over the whole vocabulary, BOS at zero"""
        context = tuple(context)
        p = np.full(self.vocab.size, self._uniform)
        p[BOS] = 0.0
        for k in range(1, self.order + 1):
            if k - 1 > len(context):
                break
            ctx = context[len(context) - (k - 1):] if k > 1 else ()
            stats = self.tables[k].get(ctx)
            if stats is None:
                break
            d = self.discounts[k]
            p = p * (d * stats.n_types / stats.total)
            p[stats.words] += np.maximum(stats.values - d, 0.0) / stats.total
        return p

    def next_logprobs(self, state, token):
        state = self._advance(state, token)
        with np.errstate(divide='ignore'):
            return np.log(self.distribution(state)), state

    def score_pair(self, inputs, targets, state=None):
        if state is None:
            state = self.initial_state()
        scores = np.empty(len(targets))
        for t, (token, target) in enumerate(zip(inputs, targets)):
            state = self._advance(state, token)
            scores[t] = math.log(self.prob(state, target))
        return scores, state

    def backoff_weight(self, context: Tuple[int, ...]) -> Optional[float]:
        stats = self.tables.get(len(context) + 1, {}).get(context)
        if stats is None:
            return None
        d = self.discounts[len(context) + 1]
        return d * stats.n_types / stats.total


def ngram_logprob(lm: NgramLm, context: Sequence[int], w: int) -> float:
    """Natural-log probability using the longest known suffix of `context`"""
    return math.log(lm.prob(context, w))


def _estimate_discount(table: Dict[Tuple[int, ...], Counter], order: int) -> float:
    count_of_counts = Counter()
    for row in table.values():
        for c in row.values():
            if c <= 2:
                count_of_counts[c] += 1
    n1, n2 = count_of_counts[1], count_of_counts[2]
    if n1 == 0 or n2 == 0:
        logger.warning(f"Cannot estimate order-{order} discount (n1={n1}, n2={n2}); "
                       f"falling back to D={FALLBACK_DISCOUNT}")
        return FALLBACK_DISCOUNT
    return n1 / (n1 + 2.0 * n2)


def train_kn(c: Corpus, order: int = DEFAULT_NGRAM_ORDER, vocab: Optional[Vocabulary] = None,
             discount: Optional[float] = None) -> NgramLm:
    vocab = vocab or c.vocab
    if vocab is None:
        raise ValueError("train_kn needs a vocabulary")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if len(c) == 0:
        raise DataError("cannot train an n-gram model on an empty corpus")
    if discount is not None and not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0, 1), got {discount}")

    raw: Dict[int, Dict[Tuple[int, ...], Counter]] = {k: defaultdict(Counter) for k in range(1, order + 1)}
    for sentence in c.sentences:
        tokens = sentence.tokens
        for i in range(1, len(tokens)):
            w = tokens[i]
            for k in range(1, order + 1):
                if i - (k - 1) < 0:
                    break
                raw[k][tuple(tokens[i - k + 1:i])][w] += 1

    counts: Dict[int, Dict[Tuple[int, ...], Counter]] = {order: raw[order]}
    for k in range(order - 1, 0, -1):
        table: Dict[Tuple[int, ...], Counter] = defaultdict(Counter)
        # each distinct left extension counts once
        for ctx_full, row in raw[k + 1].items():
            ctx = ctx_full[1:]
            for w in row:
                table[ctx][w] += 1
        for ctx, row in raw[k].items():
            if ctx and ctx[0] == BOS:
                table[ctx] = Counter(row)
        counts[k] = table

    discounts = {}
    tables = {}
    for k in range(1, order + 1):
        discounts[k] = discount if discount is not None else _estimate_discount(counts[k], k)
        tables[k] = {ctx: ContextStats.from_counter(row) for ctx, row in counts[k].items() if row}
    logger.info(f"Trained {order}-gram KN model on {len(c)} sentences; discounts "
                + ', '.join(f"D{k}={d:.3f}" for k, d in discounts.items()))
    return NgramLm(vocab, order, tables, discounts)


def write_arpa(lm: NgramLm, path: str):
    """ARPA text format with log10 probabilities and back-off weights"""
    vocab = lm.vocab
    sections: List[List[str]] = []
    for k in range(1, lm.order + 1):
        lines = []
        if k == 1:
            grams = [((), w) for w in range(vocab.size) if w != BOS]
            lines.append(_arpa_line(-99.0, (BOS,), lm, vocab))
        else:
            grams = [(ctx, w) for ctx, stats in sorted(lm.tables[k].items()) for w in sorted(stats.counts)]
        for ctx, w in grams:
            lines.append(_arpa_line(math.log10(lm.prob(ctx, w)), ctx + (w,), lm, vocab))
        sections.append(lines)

    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n\\data\\\n')
        for k, lines in enumerate(sections, 1):
            f.write(f"ngram {k}={len(lines)}\n")
        for k, lines in enumerate(sections, 1):
            f.write(f"\n\\{k}-grams:\n")
            for line in lines:
                f.write(line + '\n')
        f.write('\n\\end\\\n')
    logger.info(f"Wrote ARPA model to {path}")


def _arpa_line(log10_prob: float, gram: Tuple[int, ...], lm: NgramLm, vocab: Vocabulary) -> str:
    words = ' '.join(vocab.words[t] for t in gram)
    fields = [f"{log10_prob:.7f}", words]
    if len(gram) < lm.order:
        bow = lm.backoff_weight(gram)
        if bow is not None:
            fields.append(f"{math.log10(bow):.7f}")
    return '\t'.join(fields)
