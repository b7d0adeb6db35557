# Training package: lr scheduling, SGD stages and augmentation schemes

from .scheduler import HalvingPolicy, LrScheduler
from .trainer import Stage, Corruption, TrainSchedule, EpochRecord, TrainResult, StageTrainer, train_stage
from .schemes import SchemePlan, build_scheme, SCHEME_SETTINGS

__all__ = [
    'HalvingPolicy', 'LrScheduler', 'Stage', 'Corruption', 'TrainSchedule', 'EpochRecord', 'TrainResult',
    'StageTrainer', 'train_stage', 'SchemePlan', 'build_scheme', 'SCHEME_SETTINGS',
]
