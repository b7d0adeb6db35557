"""Word confusion statistics harvested from aligned n-best hypotheses."""
import csv
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence

from config.settings import EPS_SYMBOL
from utils.exceptions import DataError
from .alignment import align

logger = logging.getLogger(__name__)

TABLE_HEADER = ['ref_word', 'hyp_word', 'count', 'prob']
POSITIONS_KEY = '# positions'


@dataclass
class ConfusionCounts:
    """Raw (ref word | eps) -> (hyp word | eps) tallies.

    `n_positions` counts insertion slots: for every aligned hypothesis,
    one per reference token plus one for the sentence end.
    """
    rows: Dict[str, Counter] = field(default_factory=dict)
    n_positions: int = 0
    n_hypotheses: int = 0

    def add(self, ref_word: str, hyp_word: str, count: int = 1):
        self.rows.setdefault(ref_word, Counter())[hyp_word] += count

    def merge(self, other: 'ConfusionCounts') -> 'ConfusionCounts':
        merged = ConfusionCounts(n_positions=self.n_positions + other.n_positions,
                                 n_hypotheses=self.n_hypotheses + other.n_hypotheses)
        for source in (self.rows, other.rows):
            for ref_word, row in source.items():
                merged.rows.setdefault(ref_word, Counter()).update(row)
        return merged

    __add__ = merge

    @property
    def total(self) -> int:
        return sum(sum(row.values()) for row in self.rows.values())


@dataclass
class ConfusionTable:
    rows: Dict[str, Dict[str, float]]
    counts: Dict[str, Dict[str, int]]
    n_positions: int = 0

    @property
    def insertion_rate(self) -> float:
        """Insertion events per insertion slot"""
        n_ins = sum(self.counts.get(EPS_SYMBOL, {}).values())
        if self.n_positions == 0:
            return 0.0
        return n_ins / self.n_positions

    def row(self, ref_word: str) -> Dict[str, float]:
        return self.rows.get(ref_word, {})


def _tally_utterance(ref: Sequence[str], hyps) -> ConfusionCounts:
    counts = ConfusionCounts()
    for entry in hyps:
        script = align(list(ref), list(entry.words))
        for step in script.steps:
            ref_word = EPS_SYMBOL if step.ref is None else step.ref
            hyp_word = EPS_SYMBOL if step.hyp is None else step.hyp
            counts.add(ref_word, hyp_word)
        counts.n_positions += len(ref) + 1
        counts.n_hypotheses += 1
    return counts


def accumulate_confusions(refs: Mapping[str, Sequence[str]], nbest_lists, workers: int = 1) -> ConfusionCounts:
    """Align every hypothesis of every list to its reference and tally events.

    All hypotheses count equally regardless of rank or score.
    """
    for nbest in nbest_lists:
        if nbest.utterance_id not in refs:
            raise DataError(f"no reference for utterance {nbest.utterance_id}")

    jobs = [(refs[n.utterance_id], n.entries) for n in nbest_lists]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _tally_utterance(*job), jobs))
    else:
        parts = [_tally_utterance(*job) for job in jobs]

    counts = ConfusionCounts()
    for part in parts:
        counts = counts.merge(part)
    logger.info(f"Accumulated {counts.total} alignment events from {counts.n_hypotheses} hypotheses "
                f"of {len(jobs)} utterances")
    return counts


def finalize_confusion(counts: ConfusionCounts) -> ConfusionTable:
    """Normalize each row; Match tallies stay in and carry the keep mass"""
    rows, raw = {}, {}
    for ref_word, row in counts.rows.items():
        total = sum(row.values())
        if total <= 0:
            continue
        rows[ref_word] = {hyp: c / total for hyp, c in row.items()}
        raw[ref_word] = dict(row)
    if not rows:
        raise DataError("confusion counts are all zero")
    return ConfusionTable(rows, raw, counts.n_positions)


def write_table(path: str, table: ConfusionTable):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(f"{POSITIONS_KEY}\t{table.n_positions}\n")
        writer = csv.writer(f, delimiter='\t', lineterminator='\n')
        writer.writerow(TABLE_HEADER)
        for ref_word in sorted(table.rows):
            for hyp_word in sorted(table.rows[ref_word]):
                writer.writerow([ref_word, hyp_word, table.counts[ref_word][hyp_word],
                                 repr(table.rows[ref_word][hyp_word])])


def read_table(path: str) -> ConfusionTable:
    counts = ConfusionCounts()
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith(POSITIONS_KEY):
            counts.n_positions = int(line.split('\t')[1])
        elif line.strip():
            body.append(line)
    reader = csv.reader(body, delimiter='\t')
    header = next(reader, None)
    if header != TABLE_HEADER:
        raise DataError(f"{path}: unexpected header {header}")
    for fields in reader:
        if len(fields) != 4:
            raise DataError(f"{path}: malformed row {fields}")
        counts.add(fields[0], fields[1], int(fields[2]))
    return finalize_confusion(counts)
