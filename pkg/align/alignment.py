"""Levenshtein alignment with backtrace and WER scoring."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Hashable, List, Optional, Sequence, Tuple

from utils.exceptions import DataError

logger = logging.getLogger(__name__)


class EditOp(Enum):
    MATCH = 'match'
    SUB = 'sub'
    DEL = 'del'
    INS = 'ins'


@dataclass(frozen=True)
class AlignmentStep:
    op: EditOp
    ref: Optional[Hashable]   # None stands for epsilon
    hyp: Optional[Hashable]


@dataclass(frozen=True)
class AlignmentScript:
    steps: Tuple[AlignmentStep, ...]
    cost: int

    def count(self, op: EditOp) -> int:
        return sum(1 for step in self.steps if step.op is op)

    def ref_side(self) -> List[Hashable]:
        return [s.ref for s in self.steps if s.ref is not None]

    def hyp_side(self) -> List[Hashable]:
        return [s.hyp for s in self.steps if s.hyp is not None]


def _cost_matrix(ref: Sequence, hyp: Sequence) -> List[List[int]]:
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    rows = [prev]
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        r = ref[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if r == hyp[j - 1] else 1)
            up = prev[j] + 1
            left = cur[j - 1] + 1
            cur[j] = min(diag, up, left)
        rows.append(cur)
        prev = cur
    return rows


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    return _cost_matrix(ref, hyp)[len(ref)][len(hyp)]


def align(ref: Sequence, hyp: Sequence) -> AlignmentScript:
    """Minimum edit alignment with unit costs.

    Among equal-cost paths the backtrace prefers Match, then Sub, Del, Ins,
    so confusion tallies are deterministic.
    """
    cost = _cost_matrix(ref, hyp)
    i, j = len(ref), len(hyp)
    steps = []
    while i > 0 or j > 0:
        here = cost[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cost[i - 1][j - 1] == here:
            steps.append(AlignmentStep(EditOp.MATCH, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and ref[i - 1] != hyp[j - 1] and cost[i - 1][j - 1] + 1 == here:
            steps.append(AlignmentStep(EditOp.SUB, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i - 1][j] + 1 == here:
            steps.append(AlignmentStep(EditOp.DEL, ref[i - 1], None))
            i -= 1
        else:
            steps.append(AlignmentStep(EditOp.INS, None, hyp[j - 1]))
            j -= 1
    steps.reverse()
    return AlignmentScript(tuple(steps), cost[len(ref)][len(hyp)])


@dataclass(frozen=True)
class WerReport:
    n_ref: int = 0
    subs: int = 0
    dels: int = 0
    inss: int = 0
    n_utterances: int = 0

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.inss

    @property
    def wer(self) -> float:
        if self.n_ref == 0:
            return 0.0 if self.errors == 0 else float('inf')
        return self.errors / self.n_ref

    def merge(self, other: 'WerReport') -> 'WerReport':
        return WerReport(self.n_ref + other.n_ref, self.subs + other.subs, self.dels + other.dels,
                         self.inss + other.inss, self.n_utterances + other.n_utterances)

    __add__ = merge

    def rates(self) -> dict:
        """Per-reference-token substitution/deletion/insertion rates"""
        n = max(self.n_ref, 1)
        return {'sub': self.subs / n, 'del': self.dels / n, 'ins': self.inss / n}

    def to_dict(self) -> dict:
        return {'n_ref': self.n_ref, 'subs': self.subs, 'dels': self.dels, 'inss': self.inss,
                'n_utterances': self.n_utterances, 'wer': self.wer}

    def __str__(self):
        return (f"WER {100 * self.wer:.2f}% [{self.errors} / {self.n_ref}, "
                f"{self.inss} ins, {self.dels} del, {self.subs} sub]")


def utterance_report(ref: Sequence, hyp: Sequence) -> WerReport:
    script = align(ref, hyp)
    return WerReport(len(ref), script.count(EditOp.SUB), script.count(EditOp.DEL),
                     script.count(EditOp.INS), 1)


def wer(refs: Sequence[Sequence], hyps: Sequence[Sequence]) -> WerReport:
    if len(refs) != len(hyps):
        raise DataError(f"{len(refs)} references but {len(hyps)} hypotheses")
    report = WerReport()
    for ref, hyp in zip(refs, hyps):
        report = report.merge(utterance_report(ref, hyp))
    return report
