"""Input and target corruption of training/evaluation sentences.

Sentences are handled as shifted (input, target) pairs. Boundaries are
never edited: BOS stays the first input, EOS stays the last target.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from data.corpus import BOS, EOS, Sentence
from .channels import ActionKind, EditAction, ErrorChannel, KEEP


class TargetMode(Enum):
    S = 'S'
    SDI = 'SDI'


@dataclass(frozen=True)
class PositionedEdit:
    position: int       # index of the clean token in the sentence, EOS slot = len(words) + 1
    action: EditAction


@dataclass(frozen=True)
class CorruptedPair:
    inputs: Tuple[int, ...]
    targets: Tuple[int, ...]
    edit_log: Tuple[PositionedEdit, ...] = ()

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError(f"unaligned pair: {len(self.inputs)} inputs vs {len(self.targets)} targets")

    def __len__(self):
        return len(self.inputs)

    @classmethod
    def clean(cls, s: Sentence) -> 'CorruptedPair':
        inputs, targets = s.shifted_pair()
        return cls(tuple(inputs), tuple(targets))


@dataclass
class EditStats:
    n_tokens: int = 0
    n_slots: int = 0
    n_keep: int = 0
    n_sub: int = 0
    n_del: int = 0
    n_ins: int = 0

    def add_pair(self, s: Sentence, pair: CorruptedPair):
        n_words = len(s.words)
        self.n_tokens += n_words
        self.n_slots += n_words + 1 if n_words else 0
        edited = 0
        for edit in pair.edit_log:
            kind = edit.action.kind
            if kind is ActionKind.SUBSTITUTE:
                self.n_sub += 1
                edited += 1
            elif kind is ActionKind.DELETE:
                self.n_del += 1
                edited += 1
            elif kind is ActionKind.INSERT:
                self.n_ins += 1
        self.n_keep += n_words - edited

    def merge(self, other: 'EditStats') -> 'EditStats':
        return EditStats(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self):
        return (self.n_tokens, self.n_slots, self.n_keep, self.n_sub, self.n_del, self.n_ins)

    def rates(self) -> dict:
        n = max(self.n_tokens, 1)
        return {'sub': self.n_sub / n, 'del': self.n_del / n, 'ins': self.n_ins / n}


def _split_action(channel: ErrorChannel, token: int, rng):
    action = channel.sample_edit(token, rng)
    if channel.dice_inserts:
        if action.kind is ActionKind.INSERT:
            return KEEP, action
        return action, None
    return action, channel.sample_insertion(rng)


def corrupt_for_input(s: Sentence, channel: ErrorChannel, rng: np.random.Generator) -> CorruptedPair:
    """Corrupt the history stream; targets stay the clean words.

    Substitution replaces the input token only, deletion drops the (input,
    target) pair of the word, insertion feeds an extra input whose target is
    the following clean word, which therefore appears twice. One insertion
    slot precedes every word and EOS.
    """
    words = s.words
    if not words:
        return CorruptedPair.clean(s)

    inputs: List[int] = [BOS]
    targets: List[int] = []
    log: List[PositionedEdit] = []
    for position, word in enumerate(words, 1):
        action, insertion = _split_action(channel, word, rng)
        if insertion is not None:
            targets.append(word)
            inputs.append(insertion.word)
            log.append(PositionedEdit(position, insertion))
        if action.kind is ActionKind.DELETE:
            log.append(PositionedEdit(position, action))
            continue
        targets.append(word)
        if action.kind is ActionKind.SUBSTITUTE:
            inputs.append(action.word)
            log.append(PositionedEdit(position, action))
        else:
            inputs.append(word)

    insertion = channel.sample_insertion(rng)
    if insertion is not None:
        targets.append(EOS)
        inputs.append(insertion.word)
        log.append(PositionedEdit(len(words) + 1, insertion))
    targets.append(EOS)
    return CorruptedPair(tuple(inputs), tuple(targets), tuple(log))


def corrupt_for_target(s: Sentence, channel: ErrorChannel, rng: np.random.Generator,
                       mode=TargetMode.S) -> CorruptedPair:
    """Corrupt the prediction targets; inputs stay clean.

    Mode S applies substitutions only. Mode SDI also drops the pair of a
    deleted word, and for an insertion repeats the current input token with
    the sampled word as its target. Insertions follow the word they are
    drawn for, so BOS is never repeated; a deleted word gets none.
    """
    mode = TargetMode(mode)
    words = s.words
    if not words:
        return CorruptedPair.clean(s)

    inputs: List[int] = [BOS]
    targets: List[int] = []
    log: List[PositionedEdit] = []
    for position, word in enumerate(words, 1):
        action, insertion = _split_action(channel, word, rng)
        if action.kind is ActionKind.SUBSTITUTE:
            targets.append(action.word)
            inputs.append(word)
            log.append(PositionedEdit(position, action))
        elif action.kind is ActionKind.DELETE and mode is TargetMode.SDI:
            log.append(PositionedEdit(position, action))
            continue
        else:
            targets.append(word)
            inputs.append(word)
        if insertion is not None and mode is TargetMode.SDI:
            targets.append(insertion.word)
            inputs.append(word)
            log.append(PositionedEdit(position, insertion))
    targets.append(EOS)
    return CorruptedPair(tuple(inputs), tuple(targets), tuple(log))


def corrupt_words(words, channel: ErrorChannel, rng: np.random.Generator) -> List[int]:
    """Corrupted word sequence as an ASR system would output it"""
    s = Sentence(tuple([BOS] + list(words) + [EOS]))
    return list(corrupt_for_input(s, channel, rng).inputs[1:])
