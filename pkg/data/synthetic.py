"""Synthetic benchmark: Markov text plus simulated first-pass n-best lists.

The reference side is a sparse first-order Markov chain over a fixed word
list. Hypotheses are references passed through a known 0-gram channel and
ranked like a first decoding pass: an acoustic score that prefers fewer
edits but is blurred by Gaussian noise, plus the log-probability of a
Kneser-Ney model trained on the train split. The first pass therefore
carries an n-gram bias and the reference is often not on top.
"""
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from align.alignment import edit_distance
from config.experiment import SynthConfig
from data.corpus import BOS, EOS, RESERVED_WORDS, Corpus, Session, Sentence, Vocabulary, write_sessions
from data.nbest import NBestEntry, NBestList, write_nbest, write_refs
from models.ngram_lm import NgramLm, train_kn
from noise.channels import ZeroGramChannel
from noise.corruption import corrupt_words
from utils.helpers import derive_rng

logger = logging.getLogger(__name__)

MAX_SENTENCE_LENGTH = 30
SPLITS = ('train', 'dev', 'eval')


class MarkovTextSource:
    """Each word (and BOS) is followed by one of `branching` successors with Dirichlet weights"""

    def __init__(self, n_words: int = 200, branching: int = 6, mean_length: float = 8.0, seed: int = 0):
        if n_words < 2 or branching < 1:
            raise ValueError("need at least 2 words and branching >= 1")
        self.words = [f"w{i:03d}" for i in range(n_words)]
        self.p_end = 1.0 / mean_length
        rng = derive_rng(seed, 0)
        k = min(branching, n_words)
        self.successors = np.empty((n_words + 1, k), dtype=np.int64)
        self.probs = np.empty((n_words + 1, k))
        for state in range(n_words + 1):
            self.successors[state] = rng.choice(n_words, size=k, replace=False)
            self.probs[state] = rng.dirichlet(np.full(k, 0.5))
        self.logger = logging.getLogger(self.__class__.__name__)

    @property
    def start_state(self) -> int:
        return len(self.words)

    def sample_sentence(self, rng: np.random.Generator) -> List[str]:
        state = self.start_state
        out = []
        while len(out) < MAX_SENTENCE_LENGTH:
            if out and rng.random() < self.p_end:
                break
            k = int(np.searchsorted(np.cumsum(self.probs[state]), rng.random() * self.probs[state].sum(),
                                    side='right'))
            state = int(self.successors[state][min(k, self.successors.shape[1] - 1)])
            out.append(self.words[state])
        return out

    def sample(self, n: int, rng: np.random.Generator) -> List[List[str]]:
        return [self.sample_sentence(rng) for _ in range(n)]

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(list(RESERVED_WORDS) + self.words)


def firstpass_logprob(firstpass: NgramLm, vocab: Vocabulary, words: Sequence[str]) -> float:
    ids = vocab.encode_words(words)
    scores, _ = firstpass.score_pair([BOS] + ids, ids + [EOS])
    return math.fsum(scores)


def train_firstpass(sentences: Sequence[Sequence[str]], vocab: Vocabulary, order: int) -> NgramLm:
    corpus = Corpus([Sentence(tuple([BOS] + vocab.encode_words(words) + [EOS])) for words in sentences],
                    name='firstpass', vocab=vocab)
    return train_kn(corpus, order=order, vocab=vocab)


def simulate_nbest(ref: Sequence[str], channel: ZeroGramChannel, vocab: Vocabulary, cfg: SynthConfig,
                   rng: np.random.Generator, session_id: str, utt_id: str, order: int,
                   firstpass: NgramLm) -> NBestList:
    """Noisy candidates of `ref`, ranked by a corrupted acoustic score plus the first-pass n-gram score"""
    candidates = {tuple(ref)}
    attempts = 0
    while len(candidates) < cfg.nbest_size and attempts < 4 * cfg.nbest_size:
        ids = corrupt_words(vocab.encode_words(ref), channel, rng)
        candidates.add(tuple(vocab.words[i] for i in ids))
        attempts += 1

    entries = []
    for words in sorted(candidates):
        ac = -cfg.acoustic_scale * edit_distance(list(ref), list(words)) + rng.normal(0.0, cfg.acoustic_noise)
        lm = firstpass_logprob(firstpass, vocab, words)
        entries.append(NBestEntry(tuple(words), float(ac), float(lm)))
    entries.sort(key=lambda e: e.acoustic_score + e.firstpass_lm_score, reverse=True)
    return NBestList(session_id, utt_id, order, tuple(entries[:cfg.nbest_size]))


@dataclass
class BenchmarkPaths:
    out_dir: str

    def text(self, split):
        return os.path.join(self.out_dir, f"{split}.txt")

    def sessions(self, split):
        return os.path.join(self.out_dir, f"{split}.sessions")

    def refs(self, split):
        return os.path.join(self.out_dir, f"{split}.refs")

    def nbest(self, split):
        return os.path.join(self.out_dir, f"{split}.nbest.jsonl")


def generate_benchmark(out_dir: str, cfg: SynthConfig = None, seed: int = 0) -> BenchmarkPaths:
    """Write train/dev/eval text, session files, references and n-best lists"""
    cfg = cfg or SynthConfig()
    os.makedirs(out_dir, exist_ok=True)
    source = MarkovTextSource(cfg.n_words, cfg.branching, cfg.mean_length, seed)
    vocab = source.vocabulary()
    channel = ZeroGramChannel(vocab, p_sub=cfg.p_sub, p_del=cfg.p_del, p_ins=cfg.p_ins)
    paths = BenchmarkPaths(out_dir)

    sizes = {'train': cfg.n_train, 'dev': cfg.n_dev, 'eval': cfg.n_eval}
    texts = {split: source.sample(sizes[split], derive_rng(seed, 1, split_index))
             for split_index, split in enumerate(SPLITS)}
    firstpass = train_firstpass(texts['train'], vocab, cfg.firstpass_order)

    for split_index, split in enumerate(SPLITS):
        nbest_rng = derive_rng(seed, 2, split_index)
        sentences = texts[split]
        with open(paths.text(split), 'w', encoding='utf-8') as f:
            for words in sentences:
                f.write(' '.join(words) + '\n')

        sessions: List[Session] = []
        refs: Dict[str, List[str]] = {}
        lists: List[NBestList] = []
        for first in range(0, len(sentences), cfg.session_size):
            last = min(first + cfg.session_size, len(sentences)) - 1
            session_id = f"{split}_s{len(sessions):04d}"
            sessions.append(Session(session_id, first, last))
            for order, line in enumerate(range(first, last + 1)):
                utt_id = f"{session_id}_u{order:03d}"
                refs[utt_id] = sentences[line]
                lists.append(simulate_nbest(sentences[line], channel, vocab, cfg, nbest_rng,
                                            session_id, utt_id, order, firstpass))
        write_sessions(paths.sessions(split), sessions)
        write_refs(paths.refs(split), refs)
        write_nbest(paths.nbest(split), lists)
        logger.info(f"Generated {split}: {len(sentences)} sentences in {len(sessions)} sessions")
    return paths
