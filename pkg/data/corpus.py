"""Vocabulary, sentences and session-structured corpora."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import BOS_SYMBOL, EOS_SYMBOL, UNK_SYMBOL, EPS_SYMBOL
from utils.exceptions import DataError
from utils.helpers import tokenize, generate_content_hash

logger = logging.getLogger(__name__)

BOS = 0
EOS = 1
UNK = 2
RESERVED_WORDS = (BOS_SYMBOL, EOS_SYMBOL, UNK_SYMBOL)
NUM_RESERVED = len(RESERVED_WORDS)


class Vocabulary:
    """Bidirectional word <-> id map.

    Ids 0..2 are BOS, EOS and UNK. The epsilon id sits one past the last
    word, outside the range any LM distribution covers, and is only used by
    alignment and confusion code.
    """

    def __init__(self, words: Sequence[str]):
        words = list(words)
        if tuple(words[:NUM_RESERVED]) != RESERVED_WORDS:
            raise ValueError(f"vocabulary must start with {RESERVED_WORDS}")
        self.words = words
        self.index: Dict[str, int] = {}
        for i, w in enumerate(words):
            if w in self.index:
                raise ValueError(f"duplicate vocabulary entry: {w!r}")
            self.index[w] = i
        self.bos_id = BOS
        self.eos_id = EOS
        self.unk_id = UNK
        self.epsilon_id = len(words)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def num_predictable(self) -> int:
        """Number of words an LM can predict (everything except BOS)"""
        return len(self.words) - 1

    def non_reserved_ids(self) -> np.ndarray:
        return np.arange(NUM_RESERVED, len(self.words))

    def is_valid(self, token_id: int) -> bool:
        return 0 <= token_id < len(self.words)

    def word(self, token_id: int) -> str:
        if token_id == self.epsilon_id:
            return EPS_SYMBOL
        if not self.is_valid(token_id):
            raise ValueError(f"invalid token id: {token_id}")
        return self.words[token_id]

    def lookup(self, word: str) -> int:
        """Id of an interior word; boundary literals and OOVs become UNK"""
        if word == EPS_SYMBOL:
            return self.epsilon_id
        token_id = self.index.get(word, UNK)
        if token_id in (BOS, EOS):
            return UNK
        return token_id

    def encode_words(self, words: Iterable[str]) -> List[int]:
        return [self.lookup(w) if w != EPS_SYMBOL else UNK for w in words]

    def content_hash(self) -> str:
        return generate_content_hash(self.words)

    def __repr__(self):
        return f"Vocabulary(size={len(self.words)})"


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[int, ...]

    def __post_init__(self):
        tokens = self.tokens
        if len(tokens) < 2 or tokens[0] != BOS or tokens[-1] != EOS:
            raise ValueError("sentence must start with BOS and end with EOS")
        interior = tokens[1:-1]
        if BOS in interior or EOS in interior:
            raise ValueError("sentence has interior BOS/EOS")

    @property
    def words(self) -> Tuple[int, ...]:
        return self.tokens[1:-1]

    @property
    def num_predicted(self) -> int:
        """Predicted tokens: every word plus EOS"""
        return len(self.tokens) - 1

    def shifted_pair(self) -> Tuple[List[int], List[int]]:
        return list(self.tokens[:-1]), list(self.tokens[1:])

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Session:
    session_id: str
    first: int
    last: int


@dataclass
class Corpus:
    sentences: List[Sentence]
    sessions: Optional[List[Session]] = None
    name: str = field(default='corpus')
    vocab: Optional[Vocabulary] = None

    def __post_init__(self):
        if self.sessions is not None:
            validate_sessions(self.sessions, len(self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def num_predicted(self) -> int:
        return sum(s.num_predicted for s in self.sentences)

    def iter_sessions(self) -> List[Tuple[str, List[Sentence]]]:
        """Sentences grouped by session; without session info the whole
        corpus counts as one session."""
        if self.sessions is None:
            return [(self.name, list(self.sentences))]
        return [(s.session_id, self.sentences[s.first:s.last + 1]) for s in self.sessions]


def validate_sessions(sessions: Sequence[Session], n_sentences: int):
    expected = 0
    for session in sessions:
        if session.first != expected or session.last < session.first:
            raise DataError(
                f"session {session.session_id} does not continue the partition at line {expected}")
        expected = session.last + 1
    if expected != n_sentences:
        raise DataError(f"sessions cover {expected} lines but the corpus has {n_sentences}")


def build_vocab(text_lines: Sequence[str], extra_words: Sequence[str] = ()) -> Vocabulary:
    """Vocabulary in first-occurrence order of the text, then extra_words"""
    words = list(RESERVED_WORDS)
    seen = set(words)
    seen.add(EPS_SYMBOL)
    n_tokens = 0
    for line in text_lines:
        for token in tokenize(line):
            n_tokens += 1
            if token not in seen:
                seen.add(token)
                words.append(token)
    if n_tokens == 0:
        raise DataError("empty corpus")
    for token in extra_words:
        if token not in seen:
            seen.add(token)
            words.append(token)
    logger.info(f"Built vocabulary of {len(words) - NUM_RESERVED} words from {n_tokens} tokens")
    return Vocabulary(words)


def encode(v: Vocabulary, line: str) -> Sentence:
    ids = [v.lookup(token) for token in tokenize(line)]
    ids = [UNK if i == v.epsilon_id else i for i in ids]
    return Sentence(tuple([BOS] + ids + [EOS]))


def decode(v: Vocabulary, s) -> str:
    tokens = list(s.tokens) if isinstance(s, Sentence) else list(s)
    for token_id in tokens:
        if not v.is_valid(token_id):
            raise ValueError(f"invalid token id: {token_id}")
    if tokens and tokens[0] == BOS:
        tokens = tokens[1:]
    if tokens and tokens[-1] == EOS:
        tokens = tokens[:-1]
    return ' '.join(v.words[t] for t in tokens)


def read_lines(path: str) -> List[str]:
    with open(path, 'r', encoding='utf-8') as f:
        return [line.rstrip('\n') for line in f]


def read_sessions(path: str) -> List[Session]:
    """Session file: `<session_id> <first_line_index> <last_line_index>`"""
    sessions = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            try:
                sessions.append(Session(fields[0], int(fields[1]), int(fields[2])))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
    return sessions


def write_sessions(path: str, sessions: Sequence[Session]):
    with open(path, 'w', encoding='utf-8') as f:
        for s in sessions:
            f.write(f"{s.session_id} {s.first} {s.last}\n")


def load_corpus(path: str, vocab: Vocabulary, sessions_path: Optional[str] = None,
                name: Optional[str] = None) -> Corpus:
    lines = read_lines(path)
    sentences = [encode(vocab, line) for line in lines]
    sessions = read_sessions(sessions_path) if sessions_path else None
    corpus = Corpus(sentences, sessions, name=name or path, vocab=vocab)
    n_unk = sum(1 for s in sentences for t in s.words if t == UNK)
    logger.info(f"Loaded {len(sentences)} sentences from {path} ({n_unk} OOV tokens mapped to {UNK_SYMBOL})")
    return corpus
