"""Error-simulating channels: per-token edit samplers."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np

from config.settings import EPS_SYMBOL
from data.corpus import BOS, EOS, Vocabulary
from utils.exceptions import ConfigError, DataError

PROB_TOLERANCE = 1e-12


class ActionKind(Enum):
    KEEP = 'keep'
    SUBSTITUTE = 'sub'
    DELETE = 'del'
    INSERT = 'ins'


@dataclass(frozen=True)
class EditAction:
    kind: ActionKind
    word: Optional[int] = None

    def __post_init__(self):
        carries_word = self.kind in (ActionKind.SUBSTITUTE, ActionKind.INSERT)
        if carries_word and (self.word is None or self.word < 0 or self.word in (BOS, EOS)):
            raise ValueError(f"{self.kind.value} needs a non-boundary word id, got {self.word}")
        if not carries_word and self.word is not None:
            raise ValueError(f"{self.kind.value} carries no word")


KEEP = EditAction(ActionKind.KEEP)
DELETE = EditAction(ActionKind.DELETE)


class ErrorChannel(ABC):
    """Samples one edit action per interior token.

    `dice_inserts` tells the corruption procedures whether insertions come
    out of `sample_edit` itself (a 4-sided dice) or from an independent
    `sample_insertion` draw at every slot.
    """
    dice_inserts = False

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def sample_edit(self, token: int, rng: np.random.Generator) -> EditAction:
        """Action for `token` (never BOS/EOS)"""

    @abstractmethod
    def sample_insertion(self, rng: np.random.Generator) -> Optional[EditAction]:
        """An Insert action for one insertion slot, or None"""

    @property
    @abstractmethod
    def is_identity(self) -> bool:
        """True when the channel never edits anything"""

    @abstractmethod
    def to_config(self) -> dict:
        pass


class ZeroGramChannel(ErrorChannel):
    """Context-free unfair 4-sided dice over keep/sub/del/ins.

    Replacement and inserted words are uniform over the non-reserved
    vocabulary; a substitution never returns the original word.
    """
    dice_inserts = True

    def __init__(self, vocab: Vocabulary, p_sub: float = 0.0, p_del: float = 0.0,
                 p_ins: float = 0.0, p_keep: Optional[float] = None):
        super().__init__(vocab)
        if p_keep is None:
            p_keep = 1.0 - p_sub - p_del - p_ins
        probs = np.array([p_keep, p_sub, p_del, p_ins], dtype=np.float64)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOLERANCE:
            raise ConfigError(f"edit probabilities must be non-negative and sum to 1, got {probs.tolist()}")
        self.p_keep, self.p_sub, self.p_del, self.p_ins = (float(p) for p in probs)
        self._cumulative = np.cumsum(probs)
        self._words = vocab.non_reserved_ids()
        if len(self._words) == 0 and (p_sub > 0 or p_ins > 0):
            raise ConfigError("vocabulary has no words to substitute or insert")

    @classmethod
    def from_wer_report(cls, vocab: Vocabulary, report) -> 'ZeroGramChannel':
        """Channel whose edit rates equal a measured error composition"""
        rates = report.rates()
        return cls(vocab, p_sub=min(rates['sub'], 1.0), p_del=min(rates['del'], 1.0 - rates['sub']),
                   p_ins=min(rates['ins'], max(0.0, 1.0 - rates['sub'] - rates['del'])))

    @property
    def is_identity(self) -> bool:
        return self.p_keep == 1.0

    def _uniform_word(self, rng, exclude=None) -> Optional[int]:
        # non-reserved ids are the contiguous range words[0]..words[-1]
        words = self._words
        if exclude is not None and words[0] <= exclude <= words[-1]:
            if len(words) < 2:
                return None
            word = int(words[int(rng.integers(len(words) - 1))])
            return word if word < exclude else word + 1
        return int(words[int(rng.integers(len(words)))])

    def sample_edit(self, token, rng):
        u = rng.random()
        kind = int(np.searchsorted(self._cumulative, u, side='right'))
        kind = min(kind, 3)
        if kind == 0:
            return KEEP
        if kind == 1:
            word = self._uniform_word(rng, exclude=token)
            return KEEP if word is None else EditAction(ActionKind.SUBSTITUTE, word)
        if kind == 2:
            return DELETE
        return EditAction(ActionKind.INSERT, self._uniform_word(rng))

    def sample_insertion(self, rng):
        if rng.random() < self.p_ins:
            return EditAction(ActionKind.INSERT, self._uniform_word(rng))
        return None

    def to_config(self):
        return {'type': 'zerogram', 'p_sub': self.p_sub, 'p_del': self.p_del, 'p_ins': self.p_ins}

    def __repr__(self):
        return f"ZeroGramChannel(p_sub={self.p_sub}, p_del={self.p_del}, p_ins={self.p_ins})"


class UnigramChannel(ErrorChannel):
    """Per-word edit distributions taken from a confusion table.

    The epsilon row is the insertion distribution; the insertion decision
    itself is an independent Bernoulli(ins_rate) draw per slot. Words
    without a row are never edited.
    """

    def __init__(self, vocab: Vocabulary, table, ins_rate: Optional[float] = None, table_path: str = None):
        super().__init__(vocab)
        self.table = table
        self.table_path = table_path
        self.ins_rate = float(table.insertion_rate if ins_rate is None else ins_rate)
        if not 0.0 <= self.ins_rate < 1.0:
            raise ConfigError(f"ins_rate must be in [0, 1), got {self.ins_rate}")

        merged: Dict[int, Dict[int, float]] = {}
        for ref_word, row in table.counts.items():
            ref_id = vocab.epsilon_id if ref_word == EPS_SYMBOL else vocab.lookup(ref_word)
            target = merged.setdefault(ref_id, {})
            for hyp_word, count in row.items():
                hyp_id = vocab.epsilon_id if hyp_word == EPS_SYMBOL else vocab.lookup(hyp_word)
                target[hyp_id] = target.get(hyp_id, 0.0) + count

        self._rows = {}
        for ref_id, row in merged.items():
            if ref_id == vocab.epsilon_id:
                row = {h: c for h, c in row.items() if h != vocab.epsilon_id}
            total = sum(row.values())
            if total <= 0:
                continue
            outcomes = np.array(sorted(row), dtype=np.int64)
            probs = np.array([row[o] / total for o in outcomes])
            self._rows[ref_id] = (outcomes, np.cumsum(probs))

        self._insertions = self._rows.pop(vocab.epsilon_id, None)
        if self.ins_rate > 0 and self._insertions is None:
            raise DataError("confusion table has no insertion row but ins_rate > 0")
        self._missing_logged = set()

    @classmethod
    def from_table(cls, vocab: Vocabulary, table, ins_rate: Optional[float] = None) -> 'UnigramChannel':
        return cls(vocab, table, ins_rate=ins_rate)

    @property
    def is_identity(self) -> bool:
        if self.ins_rate > 0:
            return False
        return all(len(outcomes) == 1 and outcomes[0] == ref for ref, (outcomes, _) in self._rows.items())

    def row_distribution(self, token: int) -> Dict[int, float]:
        if token not in self._rows:
            return {}
        outcomes, cumulative = self._rows[token]
        probs = np.diff(np.concatenate([[0.0], cumulative]))
        return {int(o): float(p) for o, p in zip(outcomes, probs)}

    @staticmethod
    def _draw(row, rng) -> int:
        outcomes, cumulative = row
        k = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
        return int(outcomes[min(k, len(outcomes) - 1)])

    def sample_edit(self, token, rng):
        row = self._rows.get(token)
        if row is None:
            if token not in self._missing_logged:
                self._missing_logged.add(token)
                self.logger.debug(f"No confusion row for token {token}; keeping it")
            return KEEP
        outcome = self._draw(row, rng)
        if outcome == token:
            return KEEP
        if outcome == self.vocab.epsilon_id:
            return DELETE
        return EditAction(ActionKind.SUBSTITUTE, outcome)

    def sample_insertion(self, rng):
        if self.ins_rate > 0 and rng.random() < self.ins_rate:
            return EditAction(ActionKind.INSERT, self._draw(self._insertions, rng))
        return None

    def to_config(self):
        return {'type': 'unigram', 'table': self.table_path, 'ins_rate': self.ins_rate}

    def __repr__(self):
        return f"UnigramChannel(rows={len(self._rows)}, ins_rate={self.ins_rate:.4f})"


def sample_edit(channel: ErrorChannel, token: int, rng: np.random.Generator) -> EditAction:
    if token in (BOS, EOS):
        raise ValueError("sentence boundaries are never edited")
    return channel.sample_edit(token, rng)
