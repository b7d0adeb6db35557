"""N-best rescoring with a neural/n-gram mixture and cross-utterance state."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from align.alignment import WerReport, wer
from config.settings import DEFAULT_LM_SCALE
from data.corpus import BOS, EOS, Vocabulary
from data.nbest import NBestList, group_by_session
from models.base_lm import LmScorer
from models.ngram_lm import NgramLm
from utils.exceptions import ConfigError, DataError
from utils.logger import StructuredLogger


@dataclass(frozen=True)
class RescoreConfig:
    lam: float
    lm_scale: float = DEFAULT_LM_SCALE
    carry_state: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.lm_scale <= 0:
            raise ConfigError(f"lm_scale must be positive, got {self.lm_scale}")


@dataclass(frozen=True)
class Selection:
    session_id: str
    utterance_id: str
    index: int
    words: Tuple[str, ...]
    score: float

    def to_dict(self) -> dict:
        return {'session': self.session_id, 'utt': self.utterance_id, 'index': self.index,
                'words': ' '.join(self.words), 'score': self.score}


@dataclass
class SweepResult:
    best_lambda: float
    curve: List[Tuple[float, WerReport]]

    @property
    def best_report(self) -> WerReport:
        return dict(self.curve)[self.best_lambda]


def mix_logprobs(lam: float, neural: np.ndarray, ngram: np.ndarray) -> np.ndarray:
    """Per-token log(lam * p_neural + (1 - lam) * p_ngram); the endpoints return one model unchanged"""
    if lam == 0.0:
        return ngram
    if lam == 1.0:
        return neural
    return np.logaddexp(math.log(lam) + neural, math.log1p(-lam) + ngram)


class Rescorer:
    """Rescores n-best lists session by session.

    N-gram token scores depend only on the hypothesis words and are cached
    under them. Neural scores depend on the carried state, so they are cached
    only when state carry is off.
    """

    def __init__(self, neural: Optional[LmScorer], ngram: NgramLm, vocab: Vocabulary):
        self.neural = neural
        self.ngram = ngram
        self.vocab = vocab
        self._ngram_cache: Dict[Tuple[str, ...], np.ndarray] = {}
        self._neural_cache: Dict[Tuple[str, ...], np.ndarray] = {}
        self.logger = logging.getLogger(self.__class__.__name__)
        self.structured = StructuredLogger(self.__class__.__name__)

    def _pair(self, words) -> Tuple[List[int], List[int]]:
        ids = self.vocab.encode_words(words)
        return [BOS] + ids, ids + [EOS]

    def ngram_scores(self, nbest: NBestList) -> List[np.ndarray]:
        out = []
        for entry in nbest.entries:
            key = tuple(entry.words)
            if key not in self._ngram_cache:
                inputs, targets = self._pair(entry.words)
                self._ngram_cache[key] = self.ngram.score_pair(inputs, targets)[0]
            out.append(self._ngram_cache[key])
        return out

    def neural_scores(self, nbest: NBestList, state=None):
        """Token scores of every entry and each entry's final state"""
        if self.neural is None:
            raise ConfigError("rescoring with lambda > 0 needs a neural model")
        pairs = [self._pair(entry.words) for entry in nbest.entries]
        return self.neural.score_batch(pairs, state)

    def _neural_stateless(self, nbest: NBestList) -> List[np.ndarray]:
        keys = [tuple(entry.words) for entry in nbest.entries]
        if any(key not in self._neural_cache for key in keys):
            for key, (scores, _) in zip(keys, self.neural_scores(nbest)):
                self._neural_cache[key] = scores
        return [self._neural_cache[key] for key in keys]

    def rescore_session(self, lists: Sequence[NBestList], cfg: RescoreConfig) -> List[Selection]:
        if not lists:
            return []
        session_id = lists[0].session_id
        for nbest in lists:
            if nbest.session_id != session_id:
                raise DataError(f"utterance {nbest.utterance_id} is not part of session {session_id}")
        for a, b in zip(lists, lists[1:]):
            if b.order < a.order:
                raise DataError(f"session {session_id} is not in temporal order at {b.utterance_id}")

        selections = []
        state = None
        for nbest in lists:
            if not nbest.entries:
                raise DataError(f"n-best list for {nbest.utterance_id} has no entries")
            ngram = self.ngram_scores(nbest)
            if cfg.lam == 0.0:
                neural, finals = ngram, None
            elif cfg.carry_state:
                scored = self.neural_scores(nbest, state)
                neural = [scores for scores, _ in scored]
                finals = [final for _, final in scored]
            else:
                neural, finals = self._neural_stateless(nbest), None

            best_index, best_score = 0, -math.inf
            for i, entry in enumerate(nbest.entries):
                lm_score = math.fsum(mix_logprobs(cfg.lam, neural[i], ngram[i]))
                score = entry.acoustic_score + cfg.lm_scale * lm_score
                # strict comparison keeps the earlier entry on ties
                if score > best_score:
                    best_index, best_score = i, score
            if finals is not None:
                state = finals[best_index]
            chosen = nbest.entries[best_index]
            selections.append(Selection(session_id, nbest.utterance_id, best_index, chosen.words, best_score))
        return selections

    def rescore_all(self, lists: Sequence[NBestList], cfg: RescoreConfig, workers: int = 1) -> List[Selection]:
        sessions = list(group_by_session(lists).values())
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(lambda s: self.rescore_session(s, cfg), sessions))
        else:
            parts = [self.rescore_session(s, cfg) for s in sessions]
        return [selection for part in parts for selection in part]


def score_selections(selections: Sequence[Selection], refs: Mapping[str, Sequence[str]]) -> WerReport:
    missing = [s.utterance_id for s in selections if s.utterance_id not in refs]
    if missing:
        raise DataError(f"no reference for utterances {missing[:5]}")
    return wer([refs[s.utterance_id] for s in selections], [s.words for s in selections])


def rescore_session(lists: Sequence[NBestList], neural: Optional[LmScorer], ngram: NgramLm,
                    cfg: RescoreConfig) -> List[Selection]:
    return Rescorer(neural, ngram, ngram.vocab).rescore_session(lists, cfg)


def sweep_lambda(dev_lists: Sequence[NBestList], dev_refs: Mapping[str, Sequence[str]], rescorer: Rescorer,
                 grid: Sequence[float], lm_scale: float = DEFAULT_LM_SCALE, carry_state: bool = True) -> SweepResult:
    """WER at every grid point; the best lambda is the smallest one reaching the minimum"""
    if not grid:
        raise ConfigError("lambda grid is empty")
    curve = []
    for lam in sorted(float(x) for x in grid):
        cfg = RescoreConfig(lam, lm_scale, carry_state)
        report = score_selections(rescorer.rescore_all(dev_lists, cfg), dev_refs)
        rescorer.structured.log_rescore(lam, report.wer, report.n_utterances)
        curve.append((lam, report))

    best_lambda, best_wer = curve[0][0], curve[0][1].wer
    for lam, report in curve[1:]:
        if report.wer < best_wer:
            best_lambda, best_wer = lam, report.wer
    rescorer.logger.info(f"Best lambda {best_lambda:.2f} with WER {100 * best_wer:.2f}%")
    return SweepResult(best_lambda, curve)
