"""Augmentation schemes: which channel corrupts what, and how the lr is halved.

    baseline  clean pretraining
    i0        input corruption, 0-gram channel
    i1        input corruption, 1-gram channel from training n-best statistics
    i1o       as i1 with statistics from the dev n-best lists
    t0S       target substitutions, 0-gram channel
    t0SDI     target substitutions, deletions and insertions, 0-gram channel
    t0LS      label smoothing instead of sampled targets

Finetuning always runs on clean ordered text unless `finetune_augment` is set.
Target schemes train on noisier signals and halve only after 3 bad epochs.
"""
import logging
from dataclasses import dataclass
from typing import Optional

from config.settings import FINETUNE_LR, MAX_EPOCHS, PATIENCE_K, PRETRAIN_BATCH_SIZE, PRETRAIN_LR
from data.corpus import Vocabulary
from noise.channels import ErrorChannel, UnigramChannel, ZeroGramChannel
from noise.corruption import TargetMode
from utils.exceptions import ConfigError
from .scheduler import HalvingPolicy
from .trainer import Corruption, TrainSchedule

logger = logging.getLogger(__name__)

DEFAULT_LABEL_SMOOTHING = 0.1


@dataclass
class SchemePlan:
    name: str
    pretrain: TrainSchedule
    finetune: TrainSchedule
    channel: Optional[ErrorChannel] = None
    finetune_channel: Optional[ErrorChannel] = None


def _zerogram(vocab, channel_config):
    channel_config = channel_config or {}
    return ZeroGramChannel(vocab, p_sub=channel_config.get('p_sub', 0.0), p_del=channel_config.get('p_del', 0.0),
                           p_ins=channel_config.get('p_ins', 0.0))


def _unigram(vocab, confusion_table, channel_config):
    if confusion_table is None:
        raise ConfigError("1-gram schemes need a confusion table")
    ins_rate = (channel_config or {}).get('ins_rate')
    return UnigramChannel.from_table(vocab, confusion_table, ins_rate=ins_rate)


SCHEME_SETTINGS = {
    'baseline': {'channel': None, 'corruption': None},
    'i0': {'channel': 'zerogram', 'corruption': Corruption.INPUT},
    'i1': {'channel': 'unigram', 'corruption': Corruption.INPUT},
    'i1o': {'channel': 'unigram', 'corruption': Corruption.INPUT},
    't0S': {'channel': 'zerogram', 'corruption': Corruption.TARGET, 'target_mode': TargetMode.S},
    't0SDI': {'channel': 'zerogram', 'corruption': Corruption.TARGET, 'target_mode': TargetMode.SDI},
    't0LS': {'channel': None, 'corruption': None, 'label_smoothing': True},
}
TARGET_SCHEMES = ('t0S', 't0SDI', 't0LS')


def build_scheme(name: str, vocab: Vocabulary, channel_config: Optional[dict] = None, confusion_table=None,
                 label_smoothing_eps: float = DEFAULT_LABEL_SMOOTHING, pretrain_lr: float = PRETRAIN_LR,
                 finetune_lr: float = FINETUNE_LR, max_epochs: int = MAX_EPOCHS,
                 finetune_max_epochs: Optional[int] = None, batch_size: int = PRETRAIN_BATCH_SIZE,
                 finetune_augment: bool = False, shards: int = 1) -> SchemePlan:
    settings = SCHEME_SETTINGS.get(name)
    if settings is None:
        raise ConfigError(f"unknown scheme {name!r}; expected one of {sorted(SCHEME_SETTINGS)}")

    channel = None
    if settings['channel'] == 'zerogram':
        channel = _zerogram(vocab, channel_config)
    elif settings['channel'] == 'unigram':
        channel = _unigram(vocab, confusion_table, channel_config)

    halving = HalvingPolicy.ON_NO_IMPROVE_FOR_K if name in TARGET_SCHEMES else HalvingPolicy.ON_NO_IMPROVE
    pretrain = TrainSchedule.pretrain(
        pretrain_lr,
        halving=halving,
        patience=PATIENCE_K,
        batch_size=batch_size,
        corruption=settings['corruption'],
        target_mode=settings.get('target_mode', TargetMode.S),
        label_smoothing_eps=label_smoothing_eps if settings.get('label_smoothing') else 0.0,
        max_epochs=max_epochs,
        shards=shards,
        scheme=name,
    )
    finetune = TrainSchedule.finetune(
        finetune_lr,
        corruption=settings['corruption'] if finetune_augment else None,
        target_mode=settings.get('target_mode', TargetMode.S),
        label_smoothing_eps=0.0,
        max_epochs=finetune_max_epochs or max_epochs,
        scheme=name,
    )
    logger.info(f"Scheme {name}: channel={channel!r}, halving={halving.value}, finetune_augment={finetune_augment}")
    return SchemePlan(name, pretrain, finetune, channel, channel if finetune_augment else None)
