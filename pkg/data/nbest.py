"""N-best lists (JSON lines) and reference transcripts."""
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from config.settings import BOS_SYMBOL, EOS_SYMBOL, EPS_SYMBOL
from utils.exceptions import DataError

logger = logging.getLogger(__name__)

_FORBIDDEN = {BOS_SYMBOL, EOS_SYMBOL, EPS_SYMBOL}


@dataclass(frozen=True)
class NBestEntry:
    words: Tuple[str, ...]
    acoustic_score: float
    firstpass_lm_score: float


@dataclass(frozen=True)
class NBestList:
    session_id: str
    utterance_id: str
    order: int
    entries: Tuple[NBestEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise DataError(f"n-best list for {self.utterance_id} has no entries")
        for entry in self.entries:
            bad = _FORBIDDEN.intersection(entry.words)
            if bad:
                raise DataError(f"n-best entry of {self.utterance_id} contains reserved symbols {sorted(bad)}")

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            'session': self.session_id,
            'utt': self.utterance_id,
            'order': self.order,
            'hyps': [{'words': ' '.join(e.words), 'ac': e.acoustic_score, 'lm': e.firstpass_lm_score}
                     for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NBestList':
        try:
            entries = tuple(
                NBestEntry(tuple(h['words'].split()), float(h['ac']), float(h['lm']))
                for h in data['hyps']
            )
            return cls(str(data['session']), str(data['utt']), int(data['order']), entries)
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, DataError):
                raise
            raise DataError(f"malformed n-best record: {e}") from e


def read_nbest(path: str) -> List[NBestList]:
    lists = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
            lists.append(NBestList.from_dict(data))
    logger.info(f"Read {len(lists)} n-best lists from {path}")
    return lists


def write_nbest(path: str, lists: Sequence[NBestList]):
    with open(path, 'w', encoding='utf-8') as f:
        for nbest in lists:
            f.write(json.dumps(nbest.to_dict(), ensure_ascii=False) + '\n')


def group_by_session(lists: Sequence[NBestList]) -> 'OrderedDict[str, List[NBestList]]':
    """Sessions in first-appearance order, utterances sorted by `order`"""
    sessions: 'OrderedDict[str, List[NBestList]]' = OrderedDict()
    for nbest in lists:
        sessions.setdefault(nbest.session_id, []).append(nbest)
    for session_id, items in sessions.items():
        items.sort(key=lambda n: n.order)
    return sessions


def read_refs(path: str) -> Dict[str, List[str]]:
    """Reference file: `<utt_id> word word ...` per line"""
    refs = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if fields[0] in refs:
                raise DataError(f"{path}:{lineno}: duplicate utterance id {fields[0]}")
            refs[fields[0]] = fields[1:]
    return refs


def write_refs(path: str, refs: Dict[str, Sequence[str]]):
    with open(path, 'w', encoding='utf-8') as f:
        for utt_id, words in refs.items():
            f.write(' '.join([utt_id] + list(words)) + '\n')
