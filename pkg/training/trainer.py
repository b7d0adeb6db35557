"""Plain-SGD training stages for the LSTM LM."""
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import List, Optional

import numpy as np

from config.settings import CLIP_NORM, LR_FLOOR_RATIO, MAX_EPOCHS, PATIENCE_K, PRETRAIN_BATCH_SIZE
from data.corpus import Corpus
from evaluation.perplexity import ppl
from models.lstm_lm import LstmLm, forward_backward, loss_and_grads
from noise.channels import ErrorChannel
from noise.corruption import CorruptedPair, EditStats, TargetMode, corrupt_for_input, corrupt_for_target
from utils.exceptions import ConfigError, TrainingDivergedError
from utils.helpers import derive_rng
from utils.logger import StructuredLogger
from .scheduler import HalvingPolicy, LrScheduler

logger = logging.getLogger(__name__)

# stream keys for derive_rng
_SHUFFLE, _DROPOUT = 0, 1


class Stage(Enum):
    PRETRAIN = 'pretrain'
    FINETUNE = 'finetune'


class Corruption(Enum):
    INPUT = 'input'
    TARGET = 'target'


@dataclass
class TrainSchedule:
    stage: Stage
    initial_lr: float
    halving: HalvingPolicy = HalvingPolicy.ON_NO_IMPROVE
    patience: int = PATIENCE_K
    shuffle: bool = True
    batch_size: int = PRETRAIN_BATCH_SIZE
    corruption: Optional[Corruption] = None
    target_mode: TargetMode = TargetMode.S
    label_smoothing_eps: Optional[float] = None
    max_epochs: int = MAX_EPOCHS
    lr_floor_ratio: float = LR_FLOOR_RATIO
    clip_norm: float = CLIP_NORM
    carry_state: bool = False
    shards: int = 1
    scheme: str = 'baseline'

    def __post_init__(self):
        self.stage = Stage(self.stage)
        self.halving = HalvingPolicy(self.halving)
        self.target_mode = TargetMode(self.target_mode)
        if self.corruption is not None:
            self.corruption = Corruption(self.corruption)
        if self.initial_lr <= 0:
            raise ConfigError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if self.carry_state and self.shuffle:
            raise ConfigError("state can only be carried over ordered text")
        if self.carry_state and self.batch_size != 1:
            raise ConfigError("state carry trains on a single ordered stream (batch_size 1)")

    @classmethod
    def pretrain(cls, initial_lr: float, **kwargs) -> 'TrainSchedule':
        return cls(Stage.PRETRAIN, initial_lr, **kwargs)

    @classmethod
    def finetune(cls, initial_lr: float, **kwargs) -> 'TrainSchedule':
        kwargs.setdefault('shuffle', False)
        kwargs.setdefault('batch_size', 1)
        kwargs.setdefault('carry_state', True)
        return cls(Stage.FINETUNE, initial_lr, **kwargs)


@dataclass
class EpochRecord:
    stage: str
    epoch: int
    lr: float
    train_loss: float
    dev_ppl: float
    halved: bool = False
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    duration: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    lm: LstmLm
    epoch_log: List[EpochRecord] = field(default_factory=list)
    best_dev_ppl: float = float('inf')
    best_epoch: int = 0


def clip_gradients(grads, max_norm: float) -> float:
    """Scale gradients in place to a global norm of at most max_norm; returns the original norm"""
    norm = math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class StageTrainer:
    """Runs one training stage: epochs of SGD with dev-driven lr halving.

    Corruption of sentence i at epoch e uses the generator derived from
    (noise_seed, e, i); shuffling and dropout use streams of `seed`.
    """

    def __init__(self, sched: TrainSchedule, channel: Optional[ErrorChannel] = None, seed: int = 0,
                 noise_seed: Optional[int] = None):
        self.sched = sched
        self.channel = channel
        self.seed = seed
        self.noise_seed = seed if noise_seed is None else noise_seed
        self.corruption = sched.corruption or Corruption.INPUT
        self.logger = logging.getLogger(self.__class__.__name__)
        self.structured = StructuredLogger(self.__class__.__name__)

    def make_pair(self, s, epoch: int, index: int) -> CorruptedPair:
        if self.channel is None:
            return CorruptedPair.clean(s)
        rng = derive_rng(self.noise_seed, epoch, index)
        if self.corruption is Corruption.TARGET:
            return corrupt_for_target(s, self.channel, rng, mode=self.sched.target_mode)
        return corrupt_for_input(s, self.channel, rng)

    def _update(self, lm: LstmLm, grads, lr: float):
        clip_gradients(grads, self.sched.clip_norm)
        for name, g in grads.items():
            lm.params[name] -= lr * g

    def _check_finite(self, loss: float, epoch: int, log: List[EpochRecord]):
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"{self.sched.stage.value} diverged in epoch {epoch}: loss={loss}", epoch_log=log)

    def _run_epoch_batched(self, lm, train: Corpus, epoch: int, lr: float, eps: float, stats: EditStats, log):
        sched = self.sched
        n = len(train)
        order = derive_rng(self.seed, _SHUFFLE, epoch).permutation(n) if sched.shuffle else np.arange(n)
        dropout_rng = derive_rng(self.seed, _DROPOUT, epoch)
        dropout_on = lm.cfg.dropout_rate > 0
        loss_sum, tokens = 0.0, 0
        for start in range(0, n, sched.batch_size):
            idx = order[start:start + sched.batch_size]
            pairs = []
            for i in idx:
                s = train.sentences[int(i)]
                pair = self.make_pair(s, epoch, int(i))
                stats.add_pair(s, pair)
                pairs.append(pair)
            loss, grads = loss_and_grads(lm, pairs, eps, dropout_on, dropout_rng, shards=sched.shards)
            self._check_finite(loss, epoch, log)
            batch_tokens = sum(len(p) for p in pairs)
            loss_sum += loss * batch_tokens
            tokens += batch_tokens
            self._update(lm, grads, lr)
        return loss_sum / max(tokens, 1)

    def _run_epoch_stream(self, lm, train: Corpus, epoch: int, lr: float, eps: float, stats: EditStats, log):
        """Ordered stream, state carried within a session, gradients truncated per sentence"""
        dropout_rng = derive_rng(self.seed, _DROPOUT, epoch)
        dropout_on = lm.cfg.dropout_rate > 0
        loss_sum, tokens = 0.0, 0
        index = 0
        for _, sentences in train.iter_sessions():
            state = None
            for s in sentences:
                pair = self.make_pair(s, epoch, index)
                index += 1
                stats.add_pair(s, pair)
                loss, grads, state = forward_backward(lm, [pair], eps, dropout_on, dropout_rng, state)
                self._check_finite(loss, epoch, log)
                loss_sum += loss * len(pair)
                tokens += len(pair)
                self._update(lm, grads, lr)
        return loss_sum / max(tokens, 1)

    def run(self, lm: LstmLm, train: Corpus, dev: Corpus) -> TrainResult:
        sched = self.sched
        if train.vocab is not None and dev.vocab is not None and train.vocab.content_hash() != dev.vocab.content_hash():
            raise ConfigError("train and dev corpora use different vocabularies")
        eps = lm.cfg.label_smoothing_eps if sched.label_smoothing_eps is None else sched.label_smoothing_eps
        stage = sched.stage.value
        scheduler = LrScheduler(sched.initial_lr, sched.halving, sched.patience, sched.lr_floor_ratio)

        best_ppl = ppl(lm, dev, carry_state=sched.carry_state).ppl
        scheduler.best = best_ppl
        best_params = {k: v.copy() for k, v in lm.params.items()}
        best_epoch = 0
        log: List[EpochRecord] = []
        self.structured.log_stage_start(stage, sched.scheme, sched.initial_lr, len(train))
        self.logger.info(f"{stage} starting dev PPL {best_ppl:.3f}")
        stage_start = time.time()

        for epoch in range(1, sched.max_epochs + 1):
            epoch_start = time.time()
            lr = scheduler.lr
            stats = EditStats()
            if sched.carry_state:
                train_loss = self._run_epoch_stream(lm, train, epoch, lr, eps, stats, log)
            else:
                train_loss = self._run_epoch_batched(lm, train, epoch, lr, eps, stats, log)
            dev_ppl = ppl(lm, dev, carry_state=sched.carry_state).ppl
            if not math.isfinite(dev_ppl):
                raise TrainingDivergedError(f"{stage} dev PPL not finite in epoch {epoch}", epoch_log=log)
            if dev_ppl < best_ppl:
                best_ppl, best_epoch = dev_ppl, epoch
                best_params = {k: v.copy() for k, v in lm.params.items()}
            halved = scheduler.step(dev_ppl)
            rates = stats.rates()
            record = EpochRecord(stage, epoch, lr, train_loss, dev_ppl, halved,
                                 rates['sub'], rates['del'], rates['ins'], time.time() - epoch_start)
            log.append(record)
            self.structured.log_epoch(stage, epoch, lr, train_loss, dev_ppl, halved)
            if scheduler.should_stop():
                self.logger.info(f"{stage}: lr {scheduler.lr:g} fell below the floor; stopping")
                break

        lm.params = best_params
        self.structured.log_stage_end(stage, len(log), best_ppl, time.time() - stage_start)
        return TrainResult(lm, log, best_ppl, best_epoch)


def train_stage(lm: LstmLm, train: Corpus, dev: Corpus, sched: TrainSchedule,
                channel: Optional[ErrorChannel] = None, seed: int = 0,
                noise_seed: Optional[int] = None) -> TrainResult:
    return StageTrainer(sched, channel, seed, noise_seed).run(lm, train, dev)
