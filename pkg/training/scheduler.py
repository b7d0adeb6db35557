import logging
from enum import Enum

from config.settings import LR_FLOOR_RATIO, PATIENCE_K


class HalvingPolicy(Enum):
    ON_NO_IMPROVE = 'on_no_improve'
    ON_NO_IMPROVE_FOR_K = 'on_no_improve_for_k'


class LrScheduler:
    """Learning-rate halving driven by development perplexity.

    ON_NO_IMPROVE halves after every epoch whose dev PPL does not beat the
    best so far. ON_NO_IMPROVE_FOR_K waits for `patience` consecutive such
    epochs, halves once and starts counting again.
    """

    def __init__(self, initial_lr: float, policy=HalvingPolicy.ON_NO_IMPROVE, patience: int = PATIENCE_K,
                 floor_ratio: float = LR_FLOOR_RATIO):
        if initial_lr <= 0:
            raise ValueError(f"initial_lr must be positive, got {initial_lr}")
        self.initial_lr = initial_lr
        self.lr = initial_lr
        self.policy = HalvingPolicy(policy)
        self.patience = patience if self.policy is HalvingPolicy.ON_NO_IMPROVE_FOR_K else 1
        self.floor_ratio = floor_ratio
        self.best = float('inf')
        self.bad_epochs = 0
        self.logger = logging.getLogger(self.__class__.__name__)

    def step(self, dev_ppl: float) -> bool:
        """Record one epoch's dev PPL; returns True when the rate was halved"""
        if dev_ppl < self.best:
            self.best = dev_ppl
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs < self.patience:
            return False
        self.bad_epochs = 0
        self.lr /= 2.0
        self.logger.debug(f"No dev improvement for {self.patience} epoch(s); lr -> {self.lr:g}")
        return True

    def should_stop(self) -> bool:
        return self.lr < self.initial_lr * self.floor_ratio
