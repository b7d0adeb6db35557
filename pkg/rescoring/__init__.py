# N-best rescoring

from .rescorer import (
    RescoreConfig, Selection, SweepResult, Rescorer, mix_logprobs, rescore_session, score_selections, sweep_lambda
)

__all__ = ['RescoreConfig', 'Selection', 'SweepResult', 'Rescorer', 'mix_logprobs', 'rescore_session',
           'score_selections', 'sweep_lambda']
